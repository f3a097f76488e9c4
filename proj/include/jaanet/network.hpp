#pragma once

#include "jaanet/attention_geometry.hpp"
#include "jaanet/landmarks.hpp"
#include "jaanet/layers.hpp"
#include "jaanet/region_layers.hpp"
#include "jaanet/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace jaanet {

struct JaaNetConfig {
  int l = 176;       // input side
  int c = 8;         // channel base
  int d = 512;       // fc width of the alignment and AU heads
  int d_l = 64;      // fc width of the per-AU local heads
  int n_au = 12;
  int n_align = 49;
  double zeta = 0.14;
  double xi = 0.56;
  double epsilon = 1.0;
  double lambda_align = 0.5;
  std::vector<int> au_ids = {1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24};

  int map_size_pre() const { return l / 4 + 8; }
  int map_size() const { return l / 4; }

  void validate() const;

  /// Tiny network for gradient checks: any l divisible by 16 (≥ 32).
  static JaaNetConfig miniature(int l = 32, int c = 1, std::vector<int> au_ids = {1, 12},
                                int n_align = 4);
};

/// The architecture/loss ladder of the ablation study.
enum class Variant { JAA, JAA_BE, JAA_BE_Er, JA, J, HDW, HD, H, R };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Which modules exist and how gradients are routed.
struct Architecture {
  BlockKind trunk = BlockKind::HmRegion;
  bool face_alignment = true;    // alignment module and its loss
  bool integrate = true;         // alignment feature feeds the AU head
  bool global_feature = true;
  bool local_features = true;    // attention-weighted per-AU branches
  bool refine_attention = true;  // learned refinement of the predefined maps
  bool local_heads = true;       // per-AU local predictions
  bool gradient_barrier = true;  // AU-head gradients stop at the assembled local feature
  double bp_enhancement = 1.0;   // gradient multiplier at the refined maps
  bool dice = true;              // Dice term in the AU losses
  bool weighted = true;          // per-AU weights from occurrence rates
  bool refinement_constraint = false;  // cross entropy between refined and predefined maps

  void validate() const;

  static Architecture for_variant(Variant v);
};

template <typename Scalar>
struct ModelOutputs {
  RowMatrix<Scalar> landmarks;       // N × 2·n_align, image pixels (empty without alignment)
  RowMatrix<Scalar> au_probs;        // N × n_au
  RowMatrix<Scalar> local_au_probs;  // N × n_au (empty without local heads)
  std::vector<Tensor<Scalar>> predefined_maps;  // per AU: N × 1 × (l/4+8)²
  std::vector<Tensor<Scalar>> refined_maps;     // per AU: N × 1 × (l/4)²
  std::vector<Tensor<Scalar>> local_features;   // per AU f_i
  Tensor<Scalar> assembled_local;               // f = mean_i f_i
  Tensor<Scalar> alignment_feature;             // N × 5c × l/16 × l/16
  Tensor<Scalar> global_feature;
  Tensor<Scalar> trunk_feature;                 // N × 8c × l/4 × l/4
  std::vector<std::pair<std::string, Shape>> shape_ledger;
};

template <typename Scalar>
struct OutputGradients {
  RowMatrix<Scalar> landmarks;       // dE/dŷ
  RowMatrix<Scalar> au_probs;        // dE/dp̂
  RowMatrix<Scalar> local_au_probs;  // dE/dp̂^(l)
  std::vector<Tensor<Scalar>> refined_maps;  // dE/dV̂ from a map-level loss
};

struct ForwardOptions {
  bool record_shapes = false;
  /// Use these predefined maps (per AU, N × 1 × (l/4+8)²) instead of deriving
  /// them from the predicted landmarks.
  const std::vector<Tensor<double>>* predefined_override = nullptr;
};

/// Two region blocks, each followed by 2×2 max pooling: l → l/4, 3 → 8c channels.
template <typename Scalar>
class Trunk {
 public:
  using Block = std::variant<HmRegionLayer<Scalar>, RegionLayer<Scalar>>;

  Trunk() = default;
  Trunk(BlockKind kind, int c) {
    if (kind == BlockKind::Region) {
      blocks_ = {RegionLayer<Scalar>(3, c), RegionLayer<Scalar>(4 * c, 2 * c)};
    } else {
      blocks_ = {HmRegionLayer<Scalar>(3, c), HmRegionLayer<Scalar>(4 * c, 2 * c)};
    }
  }

  void init(Rng& rng) {
    for (auto& b : blocks_) std::visit([&](auto& blk) { blk.init(rng); }, b);
  }
  void set_training(bool t) {
    for (auto& b : blocks_) std::visit([&](auto& blk) { blk.set_training(t); }, b);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x,
                         std::vector<std::pair<std::string, Shape>>* ledger = nullptr) {
    Tensor<Scalar> h = x;
    for (int i = 0; i < 2; ++i) {
      h = std::visit([&](auto& blk) { return blk.forward(h); }, blocks_[i]);
      if (ledger) ledger->push_back({"trunk.block" + std::to_string(i + 1), h.shape()});
      h = pools_[i].forward(h);
    }
    return h;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> g = dy;
    for (int i = 1; i >= 0; --i) {
      g = pools_[i].backward(g);
      g = std::visit([&](auto& blk) { return blk.backward(g); }, blocks_[i]);
    }
    return g;
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    for (int i = 0; i < 2; ++i)
      std::visit(
          [&](auto& blk) {
            blk.collect_parameters(prefix + "block" + std::to_string(i + 1) + ".", out);
          },
          blocks_[i]);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    for (int i = 0; i < 2; ++i)
      std::visit(
          [&](auto& blk) {
            blk.collect_buffers(prefix + "block" + std::to_string(i + 1) + ".", out);
          },
          blocks_[i]);
  }

 private:
  std::vector<Block> blocks_;
  MaxPool2<Scalar> pools_[2];
};

/// Three P blocks, each followed by max pooling. Used by the alignment,
/// global and local-feature modules.
template <typename Scalar>
class PlainStack {
 public:
  PlainStack() = default;
  PlainStack(int in_channels, std::array<int, 3> widths) {
    int in = in_channels;
    for (int w : widths) {
      blocks_.emplace_back(in, w);
      in = w;
    }
  }

  void init(Rng& rng) {
    for (auto& b : blocks_) b.init(rng);
  }
  void set_training(bool t) {
    for (auto& b : blocks_) b.set_training(t);
  }

  /// Returns the pooled output; last_block_output() holds the third block's
  /// output before its pooling.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, const std::string& name,
                         std::vector<std::pair<std::string, Shape>>* ledger) {
    Tensor<Scalar> h = x;
    for (int i = 0; i < 3; ++i) {
      h = blocks_[i].forward(h);
      if (ledger) ledger->push_back({name + ".block" + std::to_string(i + 1), h.shape()});
      if (i == 2) last_block_ = h;
      h = pools_[i].forward(h);
      if (ledger) ledger->push_back({name + ".pool" + std::to_string(i + 1), h.shape()});
    }
    return h;
  }
  const Tensor<Scalar>& last_block_output() const { return last_block_; }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> g = dy;
    for (int i = 2; i >= 0; --i) g = blocks_[i].backward(pools_[i].backward(g));
    return g;
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    for (int i = 0; i < 3; ++i)
      blocks_[i].collect_parameters(prefix + "block" + std::to_string(i + 1) + ".", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    for (int i = 0; i < 3; ++i)
      blocks_[i].collect_buffers(prefix + "block" + std::to_string(i + 1) + ".", out);
  }

 private:
  std::vector<PlainBlock<Scalar>> blocks_;
  MaxPool2<Scalar> pools_[3];
  Tensor<Scalar> last_block_;
};

/// Three unpadded conv-BN-ReLU layers with 8c channels and a final unpadded
/// one-channel conv with sigmoid: (l/4+8)² → (l/4)².
template <typename Scalar>
class RefinementBranch {
 public:
  RefinementBranch() = default;
  explicit RefinementBranch(int width)
      : conv1_(Conv2d<Scalar>(1, width, 0)),
        conv2_(Conv2d<Scalar>(width, width, 0)),
        conv3_(Conv2d<Scalar>(width, width, 0)),
        conv4_(width, 1, 0) {}

  Conv2d<Scalar>& output_conv() { return conv4_; }

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    conv3_.init(rng);
    conv4_.init(rng);
  }
  void set_training(bool t) {
    conv1_.set_training(t);
    conv2_.set_training(t);
    conv3_.set_training(t);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& map, const std::string& name,
                         std::vector<std::pair<std::string, Shape>>* ledger) {
    Tensor<Scalar> h = conv1_.forward(map);
    if (ledger) ledger->push_back({name + ".conv1", h.shape()});
    h = conv2_.forward(h);
    if (ledger) ledger->push_back({name + ".conv2", h.shape()});
    h = conv3_.forward(h);
    if (ledger) ledger->push_back({name + ".conv3", h.shape()});
    h = sigmoid_.forward(conv4_.forward(h));
    if (ledger) ledger->push_back({name + ".conv4", h.shape()});
    return h;
  }

  void backward(const Tensor<Scalar>& dmap) {
    Tensor<Scalar> g = conv4_.backward(sigmoid_.backward(dmap));
    g = conv3_.backward(g);
    g = conv2_.backward(g);
    conv1_.backward(g);
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    conv1_.collect_parameters(prefix + "conv1.", out);
    conv2_.collect_parameters(prefix + "conv2.", out);
    conv3_.collect_parameters(prefix + "conv3.", out);
    conv4_.collect_parameters(prefix + "conv4.", out);
  }
  void collect_buffers(const std::string& prefix, BufferList<Scalar>& out) {
    conv1_.collect_buffers(prefix + "conv1.", out);
    conv2_.collect_buffers(prefix + "conv2.", out);
    conv3_.collect_buffers(prefix + "conv3.", out);
  }

 private:
  PlainUnit<Scalar> conv1_, conv2_, conv3_;
  Conv2d<Scalar> conv4_;
  Sigmoid<Scalar> sigmoid_;
};

/// fc(width) → ReLU → fc(outputs).
template <typename Scalar>
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(int in, int hidden, int out) : fc1_(in, hidden), fc2_(hidden, out) {}

  Linear<Scalar>& fc1() { return fc1_; }
  Linear<Scalar>& fc2() { return fc2_; }

  void init(Rng& rng) {
    fc1_.init(rng);
    fc2_.init_output(rng);
  }

  RowMatrix<Scalar> forward(const RowMatrix<Scalar>& x) {
    return fc2_.forward(relu_.forward(fc1_.forward(x)));
  }
  RowMatrix<Scalar> backward(const RowMatrix<Scalar>& dy) {
    return fc1_.backward(relu_.backward(fc2_.backward(dy)));
  }

  void collect_parameters(const std::string& prefix, ParameterList<Scalar>& out) {
    fc1_.collect_parameters(prefix + "fc1.", out);
    fc2_.collect_parameters(prefix + "fc2.", out);
  }

 private:
  Linear<Scalar> fc1_, fc2_;
  ReluMatrix<Scalar> relu_;
};

/// Ownership group of a parameter name: trunk, alignment, global, refine.<i>,
/// local.<i> or au_head.
std::string parameter_group(const std::string& name);

/// Parameters whose shape or meaning depends on the AU set.
bool depends_on_au_count(const std::string& name);

/// Joint AU detection and face alignment network.
template <typename Scalar>
class JaaNet {
 public:
  JaaNet(JaaNetConfig config, Architecture arch, std::uint64_t seed = 0,
         LayoutPtr layout = nullptr);

  const JaaNetConfig& config() const { return config_; }
  const Architecture& architecture() const { return arch_; }
  Architecture& architecture() { return arch_; }
  const LandmarkLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }

  void set_training(bool training);
  bool training() const { return training_; }

  ModelOutputs<Scalar> forward(const Tensor<Scalar>& images, const ForwardOptions& options = {});

  /// Accumulates parameter gradients for the last forward pass.
  void backward(const OutputGradients<Scalar>& grads);

  /// dE/dV̂_i reaching each refinement branch in the last backward pass,
  /// after enhancement.
  const std::vector<Tensor<Scalar>>& refined_map_gradients() const { return map_grads_; }

  ParameterList<Scalar> parameters();
  BufferList<Scalar> buffers();
  void zero_grad();
  std::int64_t parameter_count();

  /// Sets the landmark head bias to a mean shape (2·n_align interleaved pixel coordinates).
  void set_landmark_prior(const Eigen::VectorXd& mean_xy);

  /// Predefined maps for a batch of landmark rows (N × 2·n_align).
  std::vector<Tensor<double>> predefine_maps(const RowMatrix<double>& landmarks) const;

  RefinementBranch<Scalar>& refinement(int i) { return refine_[i]; }
  MlpHead<Scalar>& local_head(int i) { return local_heads_[i]; }
  MlpHead<Scalar>& au_head() { return au_head_; }

 private:
  Tensor<Scalar> branch_backward(int i, const Tensor<Scalar>& df, Tensor<Scalar>& d_trunk);

  JaaNetConfig config_;
  Architecture arch_;
  LayoutPtr layout_;
  bool training_ = true;

  Trunk<Scalar> trunk_;
  PlainStack<Scalar> alignment_;
  MlpHead<Scalar> alignment_head_;
  PlainStack<Scalar> global_;
  std::vector<RefinementBranch<Scalar>> refine_;
  std::vector<PlainStack<Scalar>> local_;
  std::vector<MlpHead<Scalar>> local_heads_;
  MlpHead<Scalar> au_head_;

  // Forward cache.
  Tensor<Scalar> trunk_out_;
  std::vector<Tensor<Scalar>> maps_;
  Shape align_pooled_shape_{}, global_pooled_shape_{}, local_shape_{};
  Eigen::Index align_width_ = 0, global_width_ = 0, local_width_ = 0;
  RowMatrix<Scalar> au_probs_, local_probs_;
  std::vector<Tensor<Scalar>> map_grads_;
};

}  // namespace jaanet

#include "jaanet/network_impl.hpp"
