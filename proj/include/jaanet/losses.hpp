#pragma once

#include "jaanet/attention_geometry.hpp"
#include "jaanet/network.hpp"
#include "jaanet/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jaanet {

class ZeroOccurrenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// w_i = (1/r_i) / Σ_u (1/r_u).
Eigen::VectorXd au_weights(const Eigen::VectorXd& rates);

/// Value of a loss and its gradient with respect to the prediction it was
/// given. Losses over a batch are averaged over samples.
template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  RowMatrix<Scalar> grad;
};

/// Landmark loss: per sample (1/(2·d_o²))·Σ (y − ŷ)².
template <typename Scalar>
LossResult<Scalar> face_alignment_loss(const RowMatrix<Scalar>& y, const RowMatrix<Scalar>& y_hat,
                                       const Vector<Scalar>& d_o) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols() || d_o.size() != y.rows())
    throw ShapeError("face_alignment_loss: shape mismatch");
  if ((d_o.array() <= Scalar(0)).any())
    throw std::domain_error("face_alignment_loss: inter-ocular distance must be positive");
  const Scalar batch = static_cast<Scalar>(y.rows());
  const Vector<Scalar> norm = (Scalar(2) * d_o.array().square()).inverse().matrix();
  const RowMatrix<Scalar> diff = y_hat - y;
  LossResult<Scalar> out;
  out.value = (diff.array().square().rowwise().sum() * norm.array()).sum() / batch;
  out.grad = (Scalar(2) / batch) * (norm.asDiagonal() * diff);
  return out;
}

/// −Σ_i w_i [p_i log p̂_i + (1 − p_i) log(1 − p̂_i)], p̂ clamped to [δ, 1 − δ].
template <typename Scalar>
LossResult<Scalar> weighted_cross_entropy(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& p_hat,
                                          const Eigen::VectorXd& w,
                                          double delta = kProbabilityClamp) {
  if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols() || w.size() != p.cols())
    throw ShapeError("weighted_cross_entropy: shape mismatch");
  const Scalar batch = static_cast<Scalar>(p.rows());
  const Scalar lo = static_cast<Scalar>(delta), hi = Scalar(1) - static_cast<Scalar>(delta);
  LossResult<Scalar> out;
  out.grad.resize(p.rows(), p.cols());
  Scalar total = 0;
  for (Eigen::Index n = 0; n < p.rows(); ++n)
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
      const Scalar wi = static_cast<Scalar>(w[i]);
      const Scalar q = std::clamp(p_hat(n, i), lo, hi);
      const Scalar t = p(n, i);
      total -= wi * (t * std::log(q) + (Scalar(1) - t) * std::log(Scalar(1) - q));
      const bool inside = p_hat(n, i) > lo && p_hat(n, i) < hi;
      out.grad(n, i) = inside ? wi * (-t / q + (Scalar(1) - t) / (Scalar(1) - q)) / batch : Scalar(0);
    }
  out.value = total / batch;
  return out;
}

/// Σ_i w_i (1 − (2 p_i p̂_i + ε) / (p_i² + p̂_i² + ε)).
template <typename Scalar>
LossResult<Scalar> weighted_dice(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& p_hat,
                                 const Eigen::VectorXd& w, double epsilon = 1.0) {
  if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols() || w.size() != p.cols())
    throw ShapeError("weighted_dice: shape mismatch");
  if (!(epsilon > 0)) throw std::domain_error("weighted_dice: epsilon must be positive");
  const Scalar batch = static_cast<Scalar>(p.rows());
  const Scalar eps = static_cast<Scalar>(epsilon);
  LossResult<Scalar> out;
  out.grad.resize(p.rows(), p.cols());
  Scalar total = 0;
  for (Eigen::Index n = 0; n < p.rows(); ++n)
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
      const Scalar wi = static_cast<Scalar>(w[i]);
      const Scalar t = p(n, i), q = p_hat(n, i);
      const Scalar num = Scalar(2) * t * q + eps;
      const Scalar den = t * t + q * q + eps;
      total += wi * (Scalar(1) - num / den);
      out.grad(n, i) = -wi * (Scalar(2) * t * den - num * Scalar(2) * q) / (den * den) / batch;
    }
  out.value = total / batch;
  return out;
}

/// Cross entropy plus Dice, optionally without the Dice term.
template <typename Scalar>
LossResult<Scalar> au_detection_loss(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& p_hat,
                                     const Eigen::VectorXd& w, double epsilon = 1.0,
                                     bool with_dice = true) {
  LossResult<Scalar> out = weighted_cross_entropy(p, p_hat, w);
  if (with_dice) {
    LossResult<Scalar> dice = weighted_dice(p, p_hat, w, epsilon);
    out.value += dice.value;
    out.grad += dice.grad;
  }
  return out;
}

/// Same form as au_detection_loss, applied to the per-branch predictions.
template <typename Scalar>
LossResult<Scalar> local_au_loss(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& p_local,
                                 const Eigen::VectorXd& w, double epsilon = 1.0,
                                 bool with_dice = true) {
  return au_detection_loss(p, p_local, w, epsilon, with_dice);
}

template <typename Scalar>
Scalar total_loss(Scalar e_all_au, Scalar e_local_au, Scalar e_align, double lambda_align) {
  if (lambda_align < 0) throw std::domain_error("lambda_align must be non-negative");
  return (e_all_au + e_local_au) + static_cast<Scalar>(lambda_align) * e_align;
}

/// Scales a gradient at the refined-map boundary by λ_e ≥ 1.
template <typename Scalar>
Tensor<Scalar> bp_enhancement(const Tensor<Scalar>& grad, double lambda_e) {
  if (lambda_e < 1) throw std::domain_error("enhancement coefficient must be at least 1");
  Tensor<Scalar> out(grad.shape());
  out.array() = grad.array() * static_cast<Scalar>(lambda_e);
  return out;
}

/// Predefined maps resized to the refined resolution, used as targets.
template <typename Scalar>
std::vector<Tensor<Scalar>> refinement_targets(const std::vector<Tensor<Scalar>>& predefined,
                                               int side) {
  std::vector<Tensor<Scalar>> out;
  for (const auto& m : predefined) {
    Tensor<Scalar> t(m.batch(), 1, side, side);
    for (int n = 0; n < m.batch(); ++n)
      t.plane(n, 0) =
          resize_bilinear(m.plane(n, 0).template cast<double>(), side).template cast<Scalar>();
    out.push_back(std::move(t));
  }
  return out;
}

/// −Σ_i Σ_k [v log v̂ + (1 − v) log(1 − v̂)], averaged over the batch. The
/// gradient is per AU, shaped like the refined maps.
template <typename Scalar>
std::pair<Scalar, std::vector<Tensor<Scalar>>> refinement_constraint(
    const std::vector<Tensor<Scalar>>& targets, const std::vector<Tensor<Scalar>>& refined,
    double delta = kProbabilityClamp) {
  if (targets.size() != refined.size()) throw ShapeError("refinement_constraint: AU count mismatch");
  const Scalar lo = static_cast<Scalar>(delta), hi = Scalar(1) - static_cast<Scalar>(delta);
  Scalar total = 0;
  std::vector<Tensor<Scalar>> grads;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].shape() != refined[i].shape())
      throw ShapeError("refinement_constraint: map shape mismatch");
    const Scalar batch = static_cast<Scalar>(refined[i].batch());
    Tensor<Scalar> g(refined[i].shape());
    for (std::size_t k = 0; k < refined[i].size(); ++k) {
      const Scalar v = targets[i].data()[k];
      const Scalar raw = refined[i].data()[k];
      const Scalar q = std::clamp(raw, lo, hi);
      total -= (v * std::log(q) + (Scalar(1) - v) * std::log(Scalar(1) - q)) / batch;
      g.data()[k] = (raw > lo && raw < hi) ? (-v / q + (Scalar(1) - v) / (Scalar(1) - q)) / batch
                                           : Scalar(0);
    }
    grads.push_back(std::move(g));
  }
  return {total, std::move(grads)};
}

/// Ground truth for one batch.
template <typename Scalar>
struct BatchTargets {
  RowMatrix<Scalar> au_labels;   // N × n_au in {0, 1}
  RowMatrix<Scalar> landmarks;   // N × 2·n_align
  Vector<Scalar> inter_ocular;   // N
};

struct LossTerms {
  double e_align = 0;
  double e_cross = 0;
  double e_dice = 0;
  double e_all_au = 0;
  double e_local_au = 0;
  double e_r = 0;
  double total = 0;
};

/// Evaluates every loss term active for the architecture and fills the
/// output gradients of the total objective.
template <typename Scalar>
LossTerms compute_objective(const ModelOutputs<Scalar>& out, const BatchTargets<Scalar>& targets,
                            const Eigen::VectorXd& weights, const JaaNetConfig& config,
                            const Architecture& arch, OutputGradients<Scalar>* grads) {
  LossTerms terms;
  const int n_au = static_cast<int>(out.au_probs.cols());
  const Eigen::VectorXd w =
      arch.weighted ? weights : Eigen::VectorXd::Constant(n_au, 1.0 / n_au);
  if (w.size() != n_au) throw ShapeError("AU weight count does not match n_au");

  const auto ce = weighted_cross_entropy(targets.au_labels, out.au_probs, w);
  terms.e_cross = static_cast<double>(ce.value);
  RowMatrix<Scalar> d_au = ce.grad;
  if (arch.dice) {
    const auto dice = weighted_dice(targets.au_labels, out.au_probs, w, config.epsilon);
    terms.e_dice = static_cast<double>(dice.value);
    d_au += dice.grad;
  }
  terms.e_all_au = terms.e_cross + terms.e_dice;

  RowMatrix<Scalar> d_local;
  if (arch.local_features && arch.local_heads && out.local_au_probs.size() > 0) {
    const auto local = local_au_loss(targets.au_labels, out.local_au_probs, w, config.epsilon,
                                     arch.dice);
    terms.e_local_au = static_cast<double>(local.value);
    d_local = local.grad;
  }

  RowMatrix<Scalar> d_landmarks;
  if (arch.face_alignment) {
    const auto align = face_alignment_loss(targets.landmarks, out.landmarks, targets.inter_ocular);
    terms.e_align = static_cast<double>(align.value);
    d_landmarks = static_cast<Scalar>(config.lambda_align) * align.grad;
  }

  std::vector<Tensor<Scalar>> d_maps;
  if (arch.local_features && arch.refinement_constraint) {
    const auto tgt = refinement_targets(out.predefined_maps, config.map_size());
    auto [value, g] = refinement_constraint(tgt, out.refined_maps);
    terms.e_r = static_cast<double>(value);
    d_maps = std::move(g);
  }

  terms.total = terms.e_all_au + terms.e_local_au + config.lambda_align * terms.e_align + terms.e_r;
  if (grads) {
    grads->au_probs = std::move(d_au);
    grads->local_au_probs = std::move(d_local);
    grads->landmarks = std::move(d_landmarks);
    grads->refined_maps = std::move(d_maps);
  }
  return terms;
}

}  // namespace jaanet
