#pragma once

#include "jaanet/layers.hpp"
#include "jaanet/tensor.hpp"

#include <cstdint>
#include <string>

namespace jaanet {

enum class BlockKind { Plain, Region, HmRegion };

/// Block of kind P, R or R_hm producing an l1 × l2 × c1-sized layer.
/// R and R_hm output 4·c1 channels; P outputs c1.
struct LayerSpec {
  BlockKind kind = BlockKind::HmRegion;
  int l1 = 0;
  int l2 = 0;
  int c1 = 0;
  int in_channels = 0;

  void validate() const {
    if (l1 <= 0 || l2 <= 0 || c1 <= 0 || in_channels <= 0)
      throw std::invalid_argument("LayerSpec dimensions must be positive");
    if (kind != BlockKind::Plain && (l1 % 8 != 0 || l2 % 8 != 0))
      throw std::invalid_argument("region layers need spatial sizes divisible by 8");
  }
};

/// Closed-form parameter counts (weights + biases). For R and R_hm the shared
/// first plain convolution is excluded; batch-norm parameters never count.
///   R:    (9·4c1 + 1)·4c1·64                                   = 9216c1² + 256c1
///   R_hm: (9·4c1 + 1)·2c1·64 + (9·2c1 + 1)·c1·16 + (9·c1 + 1)·c1·4 = 4932c1² + 148c1
///   P:    (9·in + 1)·c1 + (9·c1 + 1)·c1
inline std::int64_t count_params(const LayerSpec& spec) {
  const std::int64_t c = spec.c1;
  switch (spec.kind) {
    case BlockKind::Region: return 9216 * c * c + 256 * c;
    case BlockKind::HmRegion: return 4932 * c * c + 148 * c;
    case BlockKind::Plain: return (9LL * spec.in_channels + 1) * c + (9 * c + 1) * c;
  }
  return 0;
}

/// Convolution (plain or partitioned) → batch norm → ReLU.
template <typename Scalar, typename Conv>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  explicit ConvBnRelu(Conv conv) : conv_(std::move(conv)), bn_(conv_.out_channels()) {}

  Conv& conv() { return conv_; }
  BatchNorm2d<Scalar>& bn() { return bn_; }
  void init(Rng& rng) { conv_.init(rng); }
  void set_training(bool t) { bn_.set_training(t); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    return relu_.forward(bn_.forward(conv_.forward(x)));
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    return conv_.backward(bn_.backward(relu_.backward(dy)));
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    conv_.collect_parameters(prefix + "conv.", out);
    bn_.collect_parameters(prefix + "bn.", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    bn_.collect_buffers(prefix + "bn.", out);
  }

 private:
  Conv conv_;
  BatchNorm2d<Scalar> bn_;
  Relu<Scalar> relu_;
};

template <typename Scalar>
using PlainUnit = ConvBnRelu<Scalar, Conv2d<Scalar>>;
template <typename Scalar>
using PartitionedUnit = ConvBnRelu<Scalar, PartitionedConv2d<Scalar>>;

/// P(l1, l2, c1): two 3×3 conv-BN-ReLU layers, padding 1.
template <typename Scalar>
class PlainBlock {
 public:
  PlainBlock() = default;
  PlainBlock(int in_channels, int c1)
      : first_(Conv2d<Scalar>(in_channels, c1)), second_(Conv2d<Scalar>(c1, c1)) {}

  int out_channels() const { return first_.conv().out_channels(); }
  std::int64_t parameter_count() {
    return static_cast<std::int64_t>(first_.conv().parameter_count() +
                                     second_.conv().parameter_count());
  }

  void init(Rng& rng) {
    first_.init(rng);
    second_.init(rng);
  }
  void set_training(bool t) {
    first_.set_training(t);
    second_.set_training(t);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) { return second_.forward(first_.forward(x)); }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    return first_.backward(second_.backward(dy));
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    first_.collect_parameters(prefix + "conv1.", out);
    second_.collect_parameters(prefix + "conv2.", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    first_.collect_buffers(prefix + "conv1.", out);
    second_.collect_buffers(prefix + "conv2.", out);
  }

 private:
  PlainUnit<Scalar> first_, second_;
};

/// R(l1, l2, c1): plain conv to 4c1, one 8×8 partitioned conv to 4c1, and the
/// element-wise sum of the two.
template <typename Scalar>
class RegionLayer {
 public:
  RegionLayer() = default;
  RegionLayer(int in_channels, int c1)
      : plain_(Conv2d<Scalar>(in_channels, 4 * c1)),
        part_(PartitionedConv2d<Scalar>(8, 4 * c1, 4 * c1)) {}

  int out_channels() const { return part_.conv().out_channels(); }
  /// Partitioned-layer weights and biases only.
  std::int64_t parameter_count() { return static_cast<std::int64_t>(part_.conv().parameter_count()); }

  void init(Rng& rng) {
    plain_.init(rng);
    part_.init(rng);
  }
  void set_training(bool t) {
    plain_.set_training(t);
    part_.set_training(t);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> base = plain_.forward(x);
    Tensor<Scalar> y = part_.forward(base);
    y.array() += base.array();
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> dbase = part_.backward(dy);
    dbase.array() += dy.array();
    return plain_.backward(dbase);
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    plain_.collect_parameters(prefix + "plain.", out);
    part_.collect_parameters(prefix + "part8.", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    plain_.collect_buffers(prefix + "plain.", out);
    part_.collect_buffers(prefix + "part8.", out);
  }

 private:
  PlainUnit<Scalar> plain_;
  PartitionedUnit<Scalar> part_;
};

/// R_hm(l1, l2, c1): plain conv to 4c1, then cascaded 8×8 (→2c1), 4×4 (→c1)
/// and 2×2 (→c1) partitioned convs whose outputs are concatenated back to
/// 4c1 channels and summed with the plain-conv output.
template <typename Scalar>
class HmRegionLayer {
 public:
  HmRegionLayer() = default;
  HmRegionLayer(int in_channels, int c1)
      : c1_(c1),
        plain_(Conv2d<Scalar>(in_channels, 4 * c1)),
        part8_(PartitionedConv2d<Scalar>(8, 4 * c1, 2 * c1)),
        part4_(PartitionedConv2d<Scalar>(4, 2 * c1, c1)),
        part2_(PartitionedConv2d<Scalar>(2, c1, c1)) {}

  int out_channels() const { return 4 * c1_; }
  /// Partitioned-layer weights and biases only.
  std::int64_t parameter_count() {
    return static_cast<std::int64_t>(part8_.conv().parameter_count() +
                                     part4_.conv().parameter_count() +
                                     part2_.conv().parameter_count());
  }

  void init(Rng& rng) {
    plain_.init(rng);
    part8_.init(rng);
    part4_.init(rng);
    part2_.init(rng);
  }
  void set_training(bool t) {
    plain_.set_training(t);
    part8_.set_training(t);
    part4_.set_training(t);
    part2_.set_training(t);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> base = plain_.forward(x);
    Tensor<Scalar> a = part8_.forward(base);
    Tensor<Scalar> b = part4_.forward(a);
    Tensor<Scalar> c = part2_.forward(b);
    Tensor<Scalar> y(base.shape());
    write_channels(y, a, 0);
    write_channels(y, b, 2 * c1_);
    write_channels(y, c, 3 * c1_);
    y.array() += base.array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> dc = read_channels(dy, 3 * c1_, c1_);
    Tensor<Scalar> db = read_channels(dy, 2 * c1_, c1_);
    Tensor<Scalar> da = read_channels(dy, 0, 2 * c1_);
    db.array() += part2_.backward(dc).array();
    da.array() += part4_.backward(db).array();
    Tensor<Scalar> dbase = part8_.backward(da);
    dbase.array() += dy.array();
    return plain_.backward(dbase);
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    plain_.collect_parameters(prefix + "plain.", out);
    part8_.collect_parameters(prefix + "part8.", out);
    part4_.collect_parameters(prefix + "part4.", out);
    part2_.collect_parameters(prefix + "part2.", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    plain_.collect_buffers(prefix + "plain.", out);
    part8_.collect_buffers(prefix + "part8.", out);
    part4_.collect_buffers(prefix + "part4.", out);
    part2_.collect_buffers(prefix + "part2.", out);
  }

 private:
  int c1_ = 0;
  PlainUnit<Scalar> plain_;
  PartitionedUnit<Scalar> part8_, part4_, part2_;
};

}  // namespace jaanet
