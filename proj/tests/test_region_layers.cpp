#include "jaanet/region_layers.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace jaanet;
using jaanet::testing::relative_error;

namespace {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& s, Rng& rng) {
  Tensor<Scalar> t(s);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(n(rng));
  return t;
}

template <typename Layer>
ParameterList<double> params_of(Layer& layer) {
  ParameterList<double> out;
  layer.collect_parameters("", out);
  return out;
}

}  // namespace

TEST(PlainBlock, KeepsSpatialSize) {
  Rng rng(1);
  PlainBlock<float> p(64, 24);
  p.init(rng);
  const Tensor<float> y = p.forward(random_tensor<float>({1, 64, 44, 44}, rng));
  EXPECT_EQ(y.shape(), (Shape{1, 24, 44, 44}));
}

TEST(PlainBlock, ZeroWeightsGiveZeroOutput) {
  Rng rng(2);
  PlainBlock<double> p(3, 4);
  const Tensor<double> y = p.forward(random_tensor<double>({2, 3, 8, 8}, rng));
  EXPECT_EQ(y.array().abs().maxCoeff(), 0.0);
}

TEST(PartitionedConv, SingleCellIsPlainConv) {
  Rng rng(3);
  Conv2d<double> plain(3, 5);
  plain.init(rng);
  PartitionedConv2d<double> part(1, 3, 5);
  part.patch(0, 0).weight().value = plain.weight().value;
  part.patch(0, 0).bias().value = Vector<double>::Random(5);
  plain.bias().value = part.patch(0, 0).bias().value;
  const Tensor<double> x = random_tensor<double>({2, 3, 12, 12}, rng);
  EXPECT_EQ(part.forward(x).vector(), plain.forward(x).vector());
}

TEST(PartitionedConv, PatchLocality) {
  Rng rng(4);
  PartitionedConv2d<double> part(4, 2, 3);
  part.init(rng);
  const Tensor<double> x = random_tensor<double>({1, 2, 16, 16}, rng);
  Tensor<double> x2 = x;
  x2(0, 1, 2, 3) += 1.0;
  x2(0, 0, 0, 0) -= 2.0;
  const Tensor<double> y = part.forward(x), y2 = part.forward(x2);
  bool changed = false;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        const bool differs = y(0, c, i, j) != y2(0, c, i, j);
        if (i >= 4 || j >= 4) {
          EXPECT_FALSE(differs) << i << "," << j;
        }
        changed |= differs;
      }
  EXPECT_TRUE(changed);
}

TEST(PartitionedConv, PatchesAreIndependentConvolutions) {
  Rng rng(5);
  PartitionedConv2d<float> part(8, 2, 2);
  part.init(rng);
  const Tensor<float> x = random_tensor<float>({1, 2, 176, 176}, rng);
  const Tensor<float> y = part.forward(x);
  for (int py : {0, 3, 7})
    for (int px : {0, 5, 7}) {
      Tensor<float> crop(1, 2, 22, 22);
      for (int c = 0; c < 2; ++c) crop.plane(0, c) = x.plane(0, c).block(py * 22, px * 22, 22, 22);
      const Tensor<float> expect = part.patch(py, px).forward(crop);
      for (int c = 0; c < 2; ++c)
        EXPECT_EQ(RowMatrix<float>(y.plane(0, c).block(py * 22, px * 22, 22, 22)),
                  RowMatrix<float>(expect.plane(0, c)));
    }
  EXPECT_THROW(part.forward(random_tensor<float>({1, 2, 20, 20}, rng)), ShapeError);
}

TEST(HmRegion, OutputShape) {
  Rng rng(6);
  HmRegionLayer<float> hm(3, 8);
  hm.init(rng);
  EXPECT_EQ(hm.forward(random_tensor<float>({1, 3, 176, 176}, rng)).shape(),
            (Shape{1, 32, 176, 176}));
}

TEST(RegionLayers, ShapePreservation) {
  Rng rng(7);
  for (int size : {8, 16, 24}) {
    const Tensor<float> x = random_tensor<float>({2, 4, size, size}, rng);
    RegionLayer<float> r(4, 2);
    HmRegionLayer<float> hm(4, 2);
    PlainBlock<float> p(4, 2);
    r.init(rng);
    hm.init(rng);
    p.init(rng);
    EXPECT_EQ(r.forward(x).shape(), (Shape{2, 8, size, size}));
    EXPECT_EQ(hm.forward(x).shape(), (Shape{2, 8, size, size}));
    EXPECT_EQ(p.forward(x).shape(), (Shape{2, 2, size, size}));
  }
}

TEST(ParameterCounts, ConstructedMatchesClosedForm) {
  for (int c : {1, 2, 4, 8}) {
    RegionLayer<float> r(3, c);
    HmRegionLayer<float> hm(3, c);
    const std::int64_t c2 = static_cast<std::int64_t>(c) * c;
    EXPECT_EQ(r.parameter_count(), 9216 * c2 + 256 * c);
    EXPECT_EQ(hm.parameter_count(), 4932 * c2 + 148 * c);
    EXPECT_EQ(r.parameter_count(), count_params({BlockKind::Region, 8, 8, c, 3}));
    EXPECT_EQ(hm.parameter_count(), count_params({BlockKind::HmRegion, 8, 8, c, 3}));
    EXPECT_LT(hm.parameter_count(), r.parameter_count());
    // Channel budget of the cascade: 2c + c + c = 4c.
    EXPECT_EQ(hm.out_channels(), 4 * c);
  }
  EXPECT_EQ(count_params({BlockKind::HmRegion, 176, 176, 8, 3}), 316832);
  EXPECT_EQ(count_params({BlockKind::Region, 176, 176, 8, 3}), 591872);
}

TEST(ParameterCounts, PlainBlock) {
  PlainBlock<float> p(64, 24);
  EXPECT_EQ(p.parameter_count(), count_params({BlockKind::Plain, 44, 44, 24, 64}));
  EXPECT_EQ(p.parameter_count(), (9 * 64 + 1) * 24 + (9 * 24 + 1) * 24);
}

TEST(LayerSpec, Validation) {
  EXPECT_THROW((LayerSpec{BlockKind::HmRegion, 20, 20, 2, 3}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((LayerSpec{BlockKind::Plain, 20, 20, 2, 3}.validate()));
  EXPECT_THROW((LayerSpec{BlockKind::Plain, 0, 20, 2, 3}.validate()), std::invalid_argument);
}

namespace {

/// Loss Σ w ⊙ layer(x) for a fixed random w; checks every parameter entry
/// and a sample of input entries against central differences. Biases feeding
/// batch norm have an exact zero gradient, so the relative error is floored
/// well above central-difference round-off.
template <typename Layer>
double worst_gradient_error(Layer& layer, const Shape& in_shape, std::uint64_t seed) {
  Rng rng(seed);
  layer.init(rng);
  auto params = params_of(layer);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : params)
    for (Eigen::Index i = 0; i < p.param->size(); ++i) p.param->value[i] += n(rng);
  Tensor<double> x = random_tensor<double>(in_shape, rng);
  const Tensor<double> y0 = layer.forward(x);
  const Tensor<double> w = random_tensor<double>(y0.shape(), rng);
  auto loss = [&] { return (layer.forward(x).array() * w.array()).sum(); };

  for (auto& p : params) p.param->zero_grad();
  layer.forward(x);
  const Tensor<double> dx = layer.backward(w);

  double worst = 0;
  const double h = 1e-6;
  for (auto& p : params)
    for (Eigen::Index i = 0; i < p.param->size(); ++i) {
      const double fd = jaanet::testing::central_difference(loss, p.param->value[i], h);
      worst = std::max(worst, relative_error(fd, p.param->grad[i], 1e-4));
    }
  for (std::size_t i = 0; i < x.size(); i += 7) {
    const double fd = jaanet::testing::central_difference(loss, x.data()[i], h);
    worst = std::max(worst, relative_error(fd, dx.data()[i], 1e-4));
  }
  return worst;
}

}  // namespace

TEST(GradientCheck, HmRegionTiny) {
  HmRegionLayer<double> hm(1, 1);
  EXPECT_LT(worst_gradient_error(hm, {2, 1, 8, 8}, 11), 1e-4);
}

TEST(GradientCheck, RegionTiny) {
  RegionLayer<double> r(1, 1);
  EXPECT_LT(worst_gradient_error(r, {2, 1, 8, 8}, 12), 1e-4);
}

TEST(GradientCheck, PlainBlockTiny) {
  PlainBlock<double> p(2, 3);
  EXPECT_LT(worst_gradient_error(p, {2, 2, 6, 6}, 13), 1e-4);
}
