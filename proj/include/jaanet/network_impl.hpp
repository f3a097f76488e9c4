#pragma once

// Template definitions for JaaNet; included from network.hpp.

namespace jaanet {

namespace detail {

inline int flat_width(const Shape& s) { return s.channels * s.height * s.width; }

template <typename Scalar>
Tensor<Scalar> scale_by_map(const Tensor<Scalar>& features, const Tensor<Scalar>& map) {
  Tensor<Scalar> out(features.shape());
  for (int n = 0; n < features.batch(); ++n)
    out.sample(n) = features.sample(n).array().rowwise() * map.sample(n).row(0).array();
  return out;
}

}  // namespace detail

template <typename Scalar>
JaaNet<Scalar>::JaaNet(JaaNetConfig config, Architecture arch, std::uint64_t seed,
                       LayoutPtr layout)
    : config_(std::move(config)), arch_(arch), layout_(std::move(layout)) {
  config_.validate();
  if (!layout_) layout_ = builtin_layout(config_.n_align);
  if (layout_->n_points != config_.n_align)
    throw std::invalid_argument("landmark layout size does not match n_align");
  arch_.validate();

  const int c = config_.c;
  const int feat = 8 * c;
  Rng rng(seed);

  trunk_ = Trunk<Scalar>(arch_.trunk, c);
  trunk_.init(rng);

  const int pooled = config_.l / 32;
  const int stack_width = 5 * c * pooled * pooled;
  int head_in = 0;
  if (arch_.face_alignment) {
    alignment_ = PlainStack<Scalar>(feat, {3 * c, 4 * c, 5 * c});
    alignment_.init(rng);
    alignment_head_ = MlpHead<Scalar>(stack_width, config_.d, 2 * config_.n_align);
    alignment_head_.init(rng);
    // Landmark predictions start at the prior (the fc2 bias).
    alignment_head_.fc2().weight().value.setZero();
    if (arch_.integrate) head_in += stack_width;
  }
  if (arch_.global_feature) {
    global_ = PlainStack<Scalar>(feat, {3 * c, 4 * c, 5 * c});
    global_.init(rng);
    head_in += stack_width;
  }
  if (arch_.local_features) {
    int side = config_.map_size();
    for (int i = 0; i < 3; ++i) side /= 2;
    const int local_width = feat * side * side;
    for (int i = 0; i < config_.n_au; ++i) {
      if (arch_.refine_attention) {
        refine_.emplace_back(feat);
        refine_.back().init(rng);
      }
      local_.emplace_back(feat, std::array<int, 3>{feat, feat, feat});
      local_.back().init(rng);
      if (arch_.local_heads) {
        local_heads_.emplace_back(local_width, config_.d_l, 2);
        local_heads_.back().init(rng);
      }
    }
    head_in += local_width;
  }
  if (head_in == 0) throw std::invalid_argument("AU head has no input features");
  au_head_ = MlpHead<Scalar>(head_in, config_.d, 2 * config_.n_au);
  au_head_.init(rng);

  if (arch_.face_alignment) {
    const LandmarkMatrix prior = canonical_input_landmarks(*layout_, config_.l);
    set_landmark_prior(Eigen::Map<const Eigen::VectorXd>(prior.data(), prior.size()));
  }
}

template <typename Scalar>
void JaaNet<Scalar>::set_training(bool training) {
  training_ = training;
  trunk_.set_training(training);
  alignment_.set_training(training);
  global_.set_training(training);
  for (auto& r : refine_) r.set_training(training);
  for (auto& l : local_) l.set_training(training);
}

template <typename Scalar>
void JaaNet<Scalar>::set_landmark_prior(const Eigen::VectorXd& mean_xy) {
  if (!arch_.face_alignment) return;
  if (mean_xy.size() != 2 * config_.n_align)
    throw std::invalid_argument("landmark prior has the wrong length");
  alignment_head_.fc2().bias().value = mean_xy.cast<Scalar>();
}

template <typename Scalar>
std::vector<Tensor<double>> JaaNet<Scalar>::predefine_maps(
    const RowMatrix<double>& landmarks) const {
  const int pre = config_.map_size_pre();
  const auto geometry =
      AttentionGeometryConfig{config_.l, pre, config_.zeta, config_.xi, config_.au_ids};
  std::vector<Tensor<double>> maps(config_.n_au,
                                   Tensor<double>(static_cast<int>(landmarks.rows()), 1, pre, pre));
  for (Eigen::Index n = 0; n < landmarks.rows(); ++n) {
    const Eigen::VectorXd row = landmarks.row(n).transpose();
    const LandmarkSet set = LandmarkSet::from_interleaved(row, layout_);
    const auto per_au = predefine_all(set, geometry);
    for (int i = 0; i < config_.n_au; ++i)
      maps[i].plane(static_cast<int>(n), 0) = per_au[i].grid;
  }
  return maps;
}

template <typename Scalar>
ModelOutputs<Scalar> JaaNet<Scalar>::forward(const Tensor<Scalar>& images,
                                             const ForwardOptions& options) {
  const int l = config_.l;
  require_shape(images, Shape{images.batch(), 3, l, l}, "JaaNet::forward");
  const int batch = images.batch();
  ModelOutputs<Scalar> out;
  auto* ledger = options.record_shapes ? &out.shape_ledger : nullptr;

  trunk_out_ = trunk_.forward(images, ledger);
  if (ledger) ledger->push_back({"trunk", trunk_out_.shape()});
  out.trunk_feature = trunk_out_;

  std::vector<RowMatrix<Scalar>> head_parts;

  if (arch_.face_alignment) {
    Tensor<Scalar> pooled = alignment_.forward(trunk_out_, "alignment", ledger);
    out.alignment_feature = alignment_.last_block_output();
    align_pooled_shape_ = pooled.shape();
    RowMatrix<Scalar> flat = flatten_hwc(pooled);
    align_width_ = flat.cols();
    out.landmarks = alignment_head_.forward(flat);
    if (ledger) {
      ledger->push_back({"alignment.feature", out.alignment_feature.shape()});
      ledger->push_back({"alignment.fc1", Shape{batch, config_.d, 1, 1}});
      ledger->push_back({"alignment.fc2", Shape{batch, static_cast<int>(out.landmarks.cols()), 1, 1}});
    }
    if (arch_.integrate) head_parts.push_back(std::move(flat));
  }

  if (arch_.global_feature) {
    Tensor<Scalar> pooled = global_.forward(trunk_out_, "global", ledger);
    out.global_feature = global_.last_block_output();
    global_pooled_shape_ = pooled.shape();
    RowMatrix<Scalar> flat = flatten_hwc(pooled);
    global_width_ = flat.cols();
    if (ledger) ledger->push_back({"global.feature", out.global_feature.shape()});
    head_parts.push_back(std::move(flat));
  }

  maps_.clear();
  if (arch_.local_features) {
    std::vector<Tensor<double>> predefined =
        options.predefined_override ? *options.predefined_override
                                    : predefine_maps(out.landmarks.template cast<double>());
    if (static_cast<int>(predefined.size()) != config_.n_au)
      throw ShapeError("predefined map count does not match n_au");

    const int side = config_.map_size();
    out.assembled_local = Tensor<Scalar>();
    RowMatrix<Scalar> local_logits;
    if (arch_.local_heads) local_probs_.resize(batch, config_.n_au);

    for (int i = 0; i < config_.n_au; ++i) {
      const std::string tag = std::to_string(i);
      require_shape(predefined[i], Shape{batch, 1, side + 8, side + 8}, "predefined map");
      out.predefined_maps.push_back(predefined[i].template cast<Scalar>());

      Tensor<Scalar> map;
      if (arch_.refine_attention) {
        map = refine_[i].forward(out.predefined_maps.back(), "refine." + tag, ledger);
      } else {
        map = Tensor<Scalar>(batch, 1, side, side);
        for (int n = 0; n < batch; ++n)
          map.plane(n, 0) = resize_bilinear(predefined[i].plane(n, 0), side).template cast<Scalar>();
      }
      maps_.push_back(map);
      out.refined_maps.push_back(map);

      Tensor<Scalar> f = local_[i].forward(detail::scale_by_map(trunk_out_, map), "local." + tag,
                                           ledger);
      local_shape_ = f.shape();
      if (out.assembled_local.empty()) {
        out.assembled_local = f;
      } else {
        out.assembled_local.array() += f.array();
      }
      if (arch_.local_heads) {
        RowMatrix<Scalar> logits = local_heads_[i].forward(flatten_hwc(f));
        local_probs_.col(i) = pairwise_softmax(logits).col(0);
      }
      out.local_features.push_back(std::move(f));
    }
    out.assembled_local.array() /= static_cast<Scalar>(config_.n_au);
    if (ledger) ledger->push_back({"local.assembled", out.assembled_local.shape()});
    RowMatrix<Scalar> flat = flatten_hwc(out.assembled_local);
    local_width_ = flat.cols();
    head_parts.push_back(std::move(flat));
    if (arch_.local_heads) out.local_au_probs = local_probs_;
  }

  Eigen::Index width = 0;
  for (const auto& p : head_parts) width += p.cols();
  RowMatrix<Scalar> concat(batch, width);
  Eigen::Index col = 0;
  for (const auto& p : head_parts) {
    concat.middleCols(col, p.cols()) = p;
    col += p.cols();
  }
  RowMatrix<Scalar> logits = au_head_.forward(concat);
  if (ledger) {
    ledger->push_back({"au_head.fc1", Shape{batch, config_.d, 1, 1}});
    ledger->push_back({"au_head.fc2", Shape{batch, static_cast<int>(logits.cols()), 1, 1}});
  }
  au_probs_ = pairwise_softmax(logits);
  out.au_probs = au_probs_;
  return out;
}

template <typename Scalar>
Tensor<Scalar> JaaNet<Scalar>::branch_backward(int i, const Tensor<Scalar>& df,
                                               Tensor<Scalar>& d_trunk) {
  Tensor<Scalar> dweighted = local_[i].backward(df);
  d_trunk.array() += detail::scale_by_map(dweighted, maps_[i]).array();
  Tensor<Scalar> dmap(maps_[i].shape());
  for (int n = 0; n < dweighted.batch(); ++n)
    dmap.sample(n) = dweighted.sample(n).cwiseProduct(trunk_out_.sample(n)).colwise().sum();
  return dmap;
}

template <typename Scalar>
void JaaNet<Scalar>::backward(const OutputGradients<Scalar>& grads) {
  const int batch = trunk_out_.batch();
  Tensor<Scalar> d_trunk(trunk_out_.shape());
  bool trunk_touched = false;

  RowMatrix<Scalar> d_concat;
  if (grads.au_probs.size() > 0)
    d_concat = au_head_.backward(pairwise_softmax_backward(au_probs_, grads.au_probs));

  Eigen::Index col = 0;
  RowMatrix<Scalar> d_align_flat, d_global_flat, d_local_flat;
  if (arch_.face_alignment && arch_.integrate) {
    if (d_concat.size() > 0) d_align_flat = d_concat.middleCols(col, align_width_);
    col += align_width_;
  }
  if (arch_.global_feature) {
    if (d_concat.size() > 0) d_global_flat = d_concat.middleCols(col, global_width_);
    col += global_width_;
  }
  if (arch_.local_features) {
    if (d_concat.size() > 0) d_local_flat = d_concat.middleCols(col, local_width_);
  }

  map_grads_.clear();
  if (arch_.local_features) {
    const bool from_all = d_local_flat.size() > 0 && !arch_.gradient_barrier;
    const bool from_local = arch_.local_heads && grads.local_au_probs.size() > 0;
    const Scalar enhance = static_cast<Scalar>(arch_.bp_enhancement);

    Tensor<Scalar> df_all;
    if (from_all) {
      RowMatrix<Scalar> scaled = d_local_flat / static_cast<Scalar>(config_.n_au);
      df_all = unflatten_hwc(scaled, local_shape_);
    }

    for (int i = 0; i < config_.n_au; ++i) {
      Tensor<Scalar> df_local;
      if (from_local) {
        RowMatrix<Scalar> dp = grads.local_au_probs.col(i);
        RowMatrix<Scalar> p = local_probs_.col(i);
        RowMatrix<Scalar> dflat = local_heads_[i].backward(pairwise_softmax_backward(p, dp));
        df_local = unflatten_hwc(dflat, local_shape_);
      }

      Tensor<Scalar> dmap(maps_[i].shape());
      if (from_all && from_local && enhance != Scalar(1)) {
        dmap.array() = enhance * branch_backward(i, df_all, d_trunk).array();
        dmap.array() += branch_backward(i, df_local, d_trunk).array();
        trunk_touched = true;
      } else if (from_all || from_local) {
        Tensor<Scalar> df = from_all ? df_all : df_local;
        if (from_all && from_local) df.array() += df_local.array();
        dmap = branch_backward(i, df, d_trunk);
        if (from_all && !from_local) dmap.array() *= enhance;
        trunk_touched = true;
      }
      if (static_cast<int>(grads.refined_maps.size()) > i && !grads.refined_maps[i].empty())
        dmap.array() += grads.refined_maps[i].array();
      if (arch_.refine_attention) refine_[i].backward(dmap);
      map_grads_.push_back(std::move(dmap));
    }
  }

  if (arch_.face_alignment) {
    RowMatrix<Scalar> d_flat = RowMatrix<Scalar>::Zero(batch, align_width_);
    bool any = false;
    if (grads.landmarks.size() > 0) {
      d_flat += alignment_head_.backward(grads.landmarks);
      any = true;
    }
    if (d_align_flat.size() > 0) {
      d_flat += d_align_flat;
      any = true;
    }
    if (any) {
      d_trunk.array() +=
          alignment_.backward(unflatten_hwc(d_flat, align_pooled_shape_)).array();
      trunk_touched = true;
    }
  }

  if (arch_.global_feature && d_global_flat.size() > 0) {
    d_trunk.array() += global_.backward(unflatten_hwc(d_global_flat, global_pooled_shape_)).array();
    trunk_touched = true;
  }

  if (trunk_touched) trunk_.backward(d_trunk);
}

template <typename Scalar>
ParameterList<Scalar> JaaNet<Scalar>::parameters() {
  ParameterList<Scalar> out;
  trunk_.collect_parameters("trunk.", out);
  if (arch_.face_alignment) {
    alignment_.collect_parameters("alignment.", out);
    alignment_head_.collect_parameters("alignment.head.", out);
  }
  if (arch_.global_feature) global_.collect_parameters("global.", out);
  for (std::size_t i = 0; i < refine_.size(); ++i)
    refine_[i].collect_parameters("refine." + std::to_string(i) + ".", out);
  for (std::size_t i = 0; i < local_.size(); ++i) {
    local_[i].collect_parameters("local." + std::to_string(i) + ".", out);
    if (arch_.local_heads)
      local_heads_[i].collect_parameters("local." + std::to_string(i) + ".head.", out);
  }
  au_head_.collect_parameters("au_head.", out);
  return out;
}

template <typename Scalar>
BufferList<Scalar> JaaNet<Scalar>::buffers() {
  BufferList<Scalar> out;
  trunk_.collect_buffers("trunk.", out);
  if (arch_.face_alignment) alignment_.collect_buffers("alignment.", out);
  if (arch_.global_feature) global_.collect_buffers("global.", out);
  for (std::size_t i = 0; i < refine_.size(); ++i)
    refine_[i].collect_buffers("refine." + std::to_string(i) + ".", out);
  for (std::size_t i = 0; i < local_.size(); ++i)
    local_[i].collect_buffers("local." + std::to_string(i) + ".", out);
  return out;
}

template <typename Scalar>
void JaaNet<Scalar>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

template <typename Scalar>
std::int64_t JaaNet<Scalar>::parameter_count() {
  std::int64_t total = 0;
  for (auto& p : parameters()) total += p.param->size();
  return total;
}

}  // namespace jaanet
