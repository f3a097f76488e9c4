#pragma once

#include "jaanet/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace jaanet {

using Rng = std::mt19937_64;

/// Weight decay applies to Weight only.
enum class ParamKind { Weight, Bias, BnAffine };

template <typename Scalar>
struct Parameter {
  ParamKind kind = ParamKind::Weight;
  Vector<Scalar> value;
  Vector<Scalar> grad;

  Parameter() = default;
  Parameter(ParamKind k, Eigen::Index n)
      : kind(k), value(Vector<Scalar>::Zero(n)), grad(Vector<Scalar>::Zero(n)) {}
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Parameter<Scalar>* param;
};

template <typename Scalar>
struct NamedBuffer {
  std::string name;
  Vector<Scalar>* buffer;
};

template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;
template <typename Scalar>
using BufferList = std::vector<NamedBuffer<Scalar>>;

template <typename Scalar>
void uniform_fill(Vector<Scalar>& v, Scalar bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound),
                                              static_cast<double>(bound));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(dist(rng));
}

/// 3×3 convolution, stride 1, zero padding 0 or 1, with bias.
template <typename Scalar>
class Conv2d {
 public:
  static constexpr int kKernel = 3;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int padding = 1)
      : in_(in_channels),
        out_(out_channels),
        pad_(padding),
        weight_(ParamKind::Weight, static_cast<Eigen::Index>(out_channels) * in_channels * 9),
        bias_(ParamKind::Bias, out_channels) {}

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int padding() const { return pad_; }
  std::size_t parameter_count() const { return weight_.size() + bias_.size(); }

  /// He-uniform weights (fan-in scaled), zero bias.
  void init(Rng& rng) {
    uniform_fill(weight_.value, static_cast<Scalar>(std::sqrt(6.0 / (9.0 * in_))), rng);
    bias_.value.setZero();
  }

  Eigen::Map<RowMatrix<Scalar>> weight_matrix() {
    return {weight_.value.data(), out_, in_ * 9};
  }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

  int output_size(int input_size) const { return input_size + 2 * pad_ - (kKernel - 1); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.channels() != in_)
      throw ShapeError("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                       std::to_string(x.channels()));
    in_shape_ = x.shape();
    const int oh = output_size(x.height()), ow = output_size(x.width());
    if (oh <= 0 || ow <= 0) throw ShapeError("Conv2d: input smaller than kernel");
    const int plane = oh * ow;

    col_.resize(static_cast<Eigen::Index>(in_) * 9, static_cast<Eigen::Index>(x.batch()) * plane);
    for (int n = 0; n < x.batch(); ++n) im2col(x, n, oh, ow, n * plane);

    RowMatrix<Scalar> result = weight_matrix() * col_;
    result.colwise() += bias_.value;

    Tensor<Scalar> y(x.batch(), out_, oh, ow);
    for (int n = 0; n < x.batch(); ++n) y.sample(n) = result.middleCols(n * plane, plane);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int plane = dy.plane_size();
    RowMatrix<Scalar> g(out_, static_cast<Eigen::Index>(dy.batch()) * plane);
    for (int n = 0; n < dy.batch(); ++n) g.middleCols(n * plane, plane) = dy.sample(n);

    Eigen::Map<RowMatrix<Scalar>>(weight_.grad.data(), out_, in_ * 9).noalias() +=
        g * col_.transpose();
    bias_.grad += g.rowwise().sum();

    const RowMatrix<Scalar> dcol = weight_matrix().transpose() * g;
    Tensor<Scalar> dx(in_shape_);
    for (int n = 0; n < dy.batch(); ++n) col2im(dcol, dx, n, dy.height(), dy.width(), n * plane);
    return dx;
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

 private:
  void im2col(const Tensor<Scalar>& x, int n, int oh, int ow, Eigen::Index col0) {
    const int h = x.height(), w = x.width();
    for (int c = 0; c < in_; ++c) {
      const Scalar* src = x.plane(n, c).data();
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          Scalar* dst = &col_(c * 9 + ky * 3 + kx, col0);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy + ky - pad_;
            Scalar* row = dst + static_cast<std::size_t>(oy) * ow;
            if (iy < 0 || iy >= h) {
              std::fill(row, row + ow, Scalar(0));
              continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox + kx - pad_;
              row[ox] = (ix < 0 || ix >= w) ? Scalar(0) : src[iy * w + ix];
            }
          }
        }
    }
  }

  void col2im(const RowMatrix<Scalar>& dcol, Tensor<Scalar>& dx, int n, int oh, int ow,
              Eigen::Index col0) const {
    const int h = dx.height(), w = dx.width();
    for (int c = 0; c < in_; ++c) {
      Scalar* dst = &dx(n, c, 0, 0);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const Scalar* src = &dcol(c * 9 + ky * 3 + kx, col0);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy + ky - pad_;
            if (iy < 0 || iy >= h) continue;
            const Scalar* row = src + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox + kx - pad_;
              if (ix >= 0 && ix < w) dst[iy * w + ix] += row[ox];
            }
          }
        }
    }
  }

  int in_ = 0, out_ = 0, pad_ = 1;
  Parameter<Scalar> weight_, bias_;
  RowMatrix<Scalar> col_;
  Shape in_shape_{};
};

/// Splits the map into grid×grid equal patches and convolves each patch with
/// its own filter bank (zero padding at patch borders), then re-tiles.
template <typename Scalar>
class PartitionedConv2d {
 public:
  PartitionedConv2d() = default;
  PartitionedConv2d(int grid, int in_channels, int out_channels)
      : grid_(grid), in_(in_channels), out_(out_channels) {
    patches_.reserve(static_cast<std::size_t>(grid) * grid);
    for (int i = 0; i < grid * grid; ++i) patches_.emplace_back(in_channels, out_channels, 1);
  }

  int grid() const { return grid_; }
  int out_channels() const { return out_; }
  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : patches_) total += p.parameter_count();
    return total;
  }
  Conv2d<Scalar>& patch(int py, int px) { return patches_[py * grid_ + px]; }

  void init(Rng& rng) {
    for (auto& p : patches_) p.init(rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.height() % grid_ != 0 || x.width() % grid_ != 0)
      throw ShapeError("PartitionedConv2d: " + std::to_string(x.height()) + "x" +
                       std::to_string(x.width()) + " not divisible by grid " +
                       std::to_string(grid_));
    in_shape_ = x.shape();
    const int ph = x.height() / grid_, pw = x.width() / grid_;
    Tensor<Scalar> y(x.batch(), out_, x.height(), x.width());
    for (int py = 0; py < grid_; ++py)
      for (int px = 0; px < grid_; ++px) {
        Tensor<Scalar> part = crop(x, py * ph, px * pw, ph, pw);
        paste(y, patch(py, px).forward(part), py * ph, px * pw);
      }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int ph = dy.height() / grid_, pw = dy.width() / grid_;
    Tensor<Scalar> dx(in_shape_);
    for (int py = 0; py < grid_; ++py)
      for (int px = 0; px < grid_; ++px) {
        Tensor<Scalar> part = crop(dy, py * ph, px * pw, ph, pw);
        paste(dx, patch(py, px).backward(part), py * ph, px * pw);
      }
    return dx;
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    for (int py = 0; py < grid_; ++py)
      for (int px = 0; px < grid_; ++px)
        patch(py, px).collect_parameters(
            prefix + "patch" + std::to_string(py) + "_" + std::to_string(px) + ".", out);
  }

 private:
  static Tensor<Scalar> crop(const Tensor<Scalar>& x, int y0, int x0, int h, int w) {
    Tensor<Scalar> out(x.batch(), x.channels(), h, w);
    for (int n = 0; n < x.batch(); ++n)
      for (int c = 0; c < x.channels(); ++c) out.plane(n, c) = x.plane(n, c).block(y0, x0, h, w);
    return out;
  }
  static void paste(Tensor<Scalar>& dst, const Tensor<Scalar>& src, int y0, int x0) {
    for (int n = 0; n < src.batch(); ++n)
      for (int c = 0; c < src.channels(); ++c)
        dst.plane(n, c).block(y0, x0, src.height(), src.width()) = src.plane(n, c);
  }

  int grid_ = 1, in_ = 0, out_ = 0;
  std::vector<Conv2d<Scalar>> patches_;
  Shape in_shape_{};
};

/// Per-channel batch normalization over (batch, height, width).
template <typename Scalar>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, Scalar eps = Scalar(1e-5), Scalar momentum = Scalar(0.1))
      : channels_(channels),
        eps_(eps),
        momentum_(momentum),
        gamma_(ParamKind::BnAffine, channels),
        beta_(ParamKind::BnAffine, channels),
        running_mean_(Vector<Scalar>::Zero(channels)),
        running_var_(Vector<Scalar>::Ones(channels)) {
    gamma_.value.setOnes();
  }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }
  Parameter<Scalar>& gamma() { return gamma_; }
  Parameter<Scalar>& beta() { return beta_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.channels() != channels_) throw ShapeError("BatchNorm2d: channel mismatch");
    const int plane = x.plane_size();
    const Scalar count = static_cast<Scalar>(x.batch()) * plane;
    xhat_ = Tensor<Scalar>(x.shape());
    Tensor<Scalar> y(x.shape());

    Vector<Scalar> mean, var;
    if (training_) {
      mean = Vector<Scalar>::Zero(channels_);
      for (int n = 0; n < x.batch(); ++n) mean += x.sample(n).rowwise().sum();
      mean /= count;
      var = Vector<Scalar>::Zero(channels_);
      for (int n = 0; n < x.batch(); ++n)
        var += (x.sample(n).colwise() - mean).array().square().matrix().rowwise().sum();
      var /= count;
      const Scalar unbias = count > 1 ? count / (count - 1) : Scalar(1);
      running_mean_ = (1 - momentum_) * running_mean_ + momentum_ * mean;
      running_var_ = (1 - momentum_) * running_var_ + momentum_ * unbias * var;
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    inv_std_ = (var.array() + eps_).rsqrt().matrix();

    for (int n = 0; n < x.batch(); ++n) {
      xhat_.sample(n) = inv_std_.asDiagonal() * (x.sample(n).colwise() - mean);
      y.sample(n) = (gamma_.value.asDiagonal() * xhat_.sample(n)).colwise() + beta_.value;
    }
    batch_stats_ = training_;
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int plane = dy.plane_size();
    const Scalar count = static_cast<Scalar>(dy.batch()) * plane;
    Vector<Scalar> sum_dy = Vector<Scalar>::Zero(channels_);
    Vector<Scalar> sum_dy_xhat = Vector<Scalar>::Zero(channels_);
    for (int n = 0; n < dy.batch(); ++n) {
      sum_dy += dy.sample(n).rowwise().sum();
      sum_dy_xhat += dy.sample(n).cwiseProduct(xhat_.sample(n)).rowwise().sum();
    }
    gamma_.grad += sum_dy_xhat;
    beta_.grad += sum_dy;

    Tensor<Scalar> dx(dy.shape());
    const Vector<Scalar> scale = gamma_.value.cwiseProduct(inv_std_);
    for (int n = 0; n < dy.batch(); ++n) {
      if (batch_stats_) {
        // dx = γ/σ · (dy - mean(dy) - x̂·mean(dy·x̂))
        RowMatrix<Scalar> centered =
            (dy.sample(n).colwise() - sum_dy / count) -
            ((sum_dy_xhat / count).asDiagonal() * xhat_.sample(n));
        dx.sample(n) = scale.asDiagonal() * centered;
      } else {
        dx.sample(n) = scale.asDiagonal() * dy.sample(n);
      }
    }
    return dx;
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    out.push_back({prefix + "gamma", &gamma_});
    out.push_back({prefix + "beta", &beta_});
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
  }

 private:
  int channels_ = 0;
  Scalar eps_ = Scalar(1e-5), momentum_ = Scalar(0.1);
  bool training_ = true;
  bool batch_stats_ = true;
  Parameter<Scalar> gamma_, beta_;
  Vector<Scalar> running_mean_, running_var_;
  Vector<Scalar> inv_std_;
  Tensor<Scalar> xhat_;
};

template <typename Scalar>
class Relu {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    mask_ = (x.array() > Scalar(0)).template cast<Scalar>();
    Tensor<Scalar> y(x.shape());
    y.array() = x.array() * mask_;
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(dy.shape());
    dx.array() = dy.array() * mask_;
    return dx;
  }

 private:
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mask_;
};

template <typename Scalar>
class Sigmoid {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    y_ = Tensor<Scalar>(x.shape());
    y_.array() = (Scalar(1) + (-x.array()).exp()).inverse();
    return y_;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    Tensor<Scalar> dx(dy.shape());
    dx.array() = dy.array() * y_.array() * (Scalar(1) - y_.array());
    return dx;
  }

 private:
  Tensor<Scalar> y_;
};

/// 2×2 max pooling, stride 2, no padding; odd trailing rows/columns are dropped.
template <typename Scalar>
class MaxPool2 {
 public:
  static int output_size(int input_size) { return input_size / 2; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    in_shape_ = x.shape();
    const int oh = output_size(x.height()), ow = output_size(x.width());
    if (oh == 0 || ow == 0) throw ShapeError("MaxPool2: input smaller than the window");
    Tensor<Scalar> y(x.batch(), x.channels(), oh, ow);
    argmax_.assign(y.size(), 0);
    std::size_t k = 0;
    for (int n = 0; n < x.batch(); ++n)
      for (int c = 0; c < x.channels(); ++c) {
        const auto in = x.plane(n, c);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++k) {
            int best = 2 * oy * x.width() + 2 * ox;
            Scalar v = in(2 * oy, 2 * ox);
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const Scalar cand = in(2 * oy + dy, 2 * ox + dx);
                if (cand > v) {
                  v = cand;
                  best = (2 * oy + dy) * x.width() + 2 * ox + dx;
                }
              }
            y.plane(n, c)(oy, ox) = v;
            argmax_[k] = best;
          }
      }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    Tensor<Scalar> dx(in_shape_);
    const int plane_out = dy.plane_size();
    const int plane_in = in_shape_.plane();
    std::size_t k = 0;
    for (int nc = 0; nc < dy.batch() * dy.channels(); ++nc)
      for (int i = 0; i < plane_out; ++i, ++k)
        dx.data()[static_cast<std::size_t>(nc) * plane_in + argmax_[k]] += dy.data()[k];
    return dx;
  }

 private:
  Shape in_shape_{};
  std::vector<int> argmax_;
};

/// Fully-connected layer on batch × features matrices.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features)
      : in_(in_features),
        out_(out_features),
        weight_(ParamKind::Weight, static_cast<Eigen::Index>(in_features) * out_features),
        bias_(ParamKind::Bias, out_features) {}

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

  void init(Rng& rng) {
    uniform_fill(weight_.value, static_cast<Scalar>(std::sqrt(6.0 / in_)), rng);
    bias_.value.setZero();
  }
  /// Same fan-in scaling without the ReLU gain, for output layers.
  void init_output(Rng& rng) {
    uniform_fill(weight_.value, static_cast<Scalar>(std::sqrt(1.0 / in_)), rng);
    bias_.value.setZero();
  }

  Eigen::Map<RowMatrix<Scalar>> weight_matrix() { return {weight_.value.data(), out_, in_}; }

  RowMatrix<Scalar> forward(const RowMatrix<Scalar>& x) {
    if (x.cols() != in_)
      throw ShapeError("Linear: expected " + std::to_string(in_) + " features, got " +
                       std::to_string(x.cols()));
    x_ = x;
    RowMatrix<Scalar> y = x * weight_matrix().transpose();
    y.rowwise() += bias_.value.transpose();
    return y;
  }

  RowMatrix<Scalar> backward(const RowMatrix<Scalar>& dy) {
    Eigen::Map<RowMatrix<Scalar>>(weight_.grad.data(), out_, in_).noalias() +=
        dy.transpose() * x_;
    bias_.grad += dy.colwise().sum().transpose();
    return dy * weight_matrix();
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

 private:
  int in_ = 0, out_ = 0;
  Parameter<Scalar> weight_, bias_;
  RowMatrix<Scalar> x_;
};

template <typename Scalar>
class ReluMatrix {
 public:
  RowMatrix<Scalar> forward(const RowMatrix<Scalar>& x) {
    mask_ = (x.array() > Scalar(0)).template cast<Scalar>();
    return (x.array() * mask_).matrix();
  }
  RowMatrix<Scalar> backward(const RowMatrix<Scalar>& dy) const {
    return (dy.array() * mask_).matrix();
  }

 private:
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask_;
};

/// Occurrence probability of each (non-occurrence, occurrence) logit pair:
/// softmax over the pair, taking the second entry.
template <typename Scalar>
RowMatrix<Scalar> pairwise_softmax(const RowMatrix<Scalar>& logits) {
  const Eigen::Index k = logits.cols() / 2;
  RowMatrix<Scalar> p(logits.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto diff = (logits.col(2 * i + 1) - logits.col(2 * i)).array();
    p.col(i) = (Scalar(1) + (-diff).exp()).inverse().matrix();
  }
  return p;
}

/// Gradient of a loss w.r.t. the logit pairs given its gradient w.r.t. the
/// pairwise-softmax probabilities p.
template <typename Scalar>
RowMatrix<Scalar> pairwise_softmax_backward(const RowMatrix<Scalar>& p,
                                            const RowMatrix<Scalar>& dp) {
  RowMatrix<Scalar> dz(p.rows(), 2 * p.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    auto local = (dp.col(i).array() * p.col(i).array() * (Scalar(1) - p.col(i).array())).matrix();
    dz.col(2 * i + 1) = local;
    dz.col(2 * i) = -local;
  }
  return dz;
}

}  // namespace jaanet
