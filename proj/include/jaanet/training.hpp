#pragma once

#include "jaanet/checkpoint.hpp"
#include "jaanet/data_pipeline.hpp"
#include "jaanet/evaluation.hpp"
#include "jaanet/losses.hpp"
#include "jaanet/network.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace jaanet {

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 12;
  double lr0 = 0.01;
  double lr_decay_factor = 0.3;
  double lr_decay_every = 2;  // epochs
  double momentum = 0.9;      // Nesterov
  double weight_decay = 0.0005;
  int batch_size = 16;
  Variant variant = Variant::JAA;
  std::uint64_t seed = 0;
  bool augment = true;        // random crop and flip; otherwise center crop
  int eval_every = 1;         // epochs between train-set evaluations; the last is always evaluated
  bool save_checkpoints = true;

  void validate() const;
};

/// lr0 · factor^floor(epoch / decay_every).
double lr_at(double epoch, const TrainConfig& config);
/// Same schedule addressed by optimizer step.
double lr_at_step(long step, long steps_per_epoch, const TrainConfig& config);

/// SGD with Nesterov momentum; weight decay on convolution and
/// fully-connected weights only.
template <typename Scalar>
class NesterovSgd {
 public:
  NesterovSgd(ParameterList<Scalar> params, double momentum, double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    for (auto& p : params_) velocity_.push_back(Vector<Scalar>::Zero(p.param->size()));
  }

  void step(double lr) {
    const Scalar mu = static_cast<Scalar>(momentum_), rate = static_cast<Scalar>(lr);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<Scalar>& p = *params_[i].param;
      Vector<Scalar> g = p.grad;
      if (p.kind == ParamKind::Weight) g += static_cast<Scalar>(weight_decay_) * p.value;
      velocity_[i] = mu * velocity_[i] + g;
      p.value -= rate * (g + mu * velocity_[i]);
    }
  }

 private:
  ParameterList<Scalar> params_;
  std::vector<Vector<Scalar>> velocity_;
  double momentum_, weight_decay_;
};

/// Predictions for a list of samples already cropped to the network input size.
struct Predictions {
  Eigen::MatrixXd au_probs;
  Eigen::MatrixXd local_au_probs;
  Eigen::MatrixXd landmarks;
};

Predictions predict(JaaNet<float>& model, const std::vector<Sample>& samples, int batch_size = 32);

struct EvalMetrics {
  PerAuScores f1;
  PerAuScores accuracy;
  double mean_error = 0;    // percent, when alignment is present
  double failure_rate = 0;
};

EvalMetrics evaluate(JaaNet<float>& model, const std::vector<Sample>& samples,
                     double threshold = 0.5, int batch_size = 32);

/// Batch targets from cropped samples.
template <typename Scalar>
BatchTargets<Scalar> make_targets(const std::vector<Sample>& batch) {
  BatchTargets<Scalar> t;
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n_au = batch.front().au_labels.size();
  const Eigen::Index n_xy = 2 * batch.front().landmarks.size();
  t.au_labels.resize(n, n_au);
  t.landmarks.resize(n, n_xy);
  t.inter_ocular.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = batch[static_cast<std::size_t>(i)];
    t.au_labels.row(i) = s.au_labels.cast<Scalar>().transpose();
    t.landmarks.row(i) = s.landmarks.interleaved().cast<Scalar>().transpose();
    t.inter_ocular[i] = static_cast<Scalar>(s.landmarks.inter_ocular_distance());
  }
  return t;
}

/// Mean landmark vector of the center-cropped samples.
Eigen::VectorXd mean_landmarks(const std::vector<Sample>& samples, int crop_size);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  LossTerms losses;  // means over the epoch's batches
  std::optional<EvalMetrics> train_metrics;
  std::optional<EvalMetrics> eval_metrics;
  double seconds = 0;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainOptions {
  std::optional<std::filesystem::path> run_dir;  // metrics, checkpoints, summary
  const std::vector<Sample>* eval_set = nullptr; // aligned frames, center-cropped for evaluation
  bool set_landmark_prior = true;
  std::ostream* log = nullptr;
  nlohmann::json config_snapshot;                // written to run_dir first
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::optional<std::filesystem::path> final_checkpoint;
};

/// Runs the optimization recipe. Samples are aligned frames at least as large
/// as the network input; each step takes a crop of side l.
TrainResult train(JaaNet<float>& model, const std::vector<Sample>& train_set,
                  const Eigen::VectorXd& au_weights, const TrainConfig& config,
                  const TrainOptions& options = {});

/// Loads and aligns every record of a manifest.
std::vector<Sample> load_samples(const Manifest& manifest, const std::filesystem::path& base_dir,
                                 int aligned_size, bool align = true);

/// Turns an in-memory synthetic corpus into aligned samples.
std::vector<Sample> corpus_samples(const SyntheticCorpus& corpus, int aligned_size,
                                   bool align = true);

std::vector<Sample> center_crops(const std::vector<Sample>& samples, int crop_size);

/// Aligned frame side that leaves the same relative crop margin as 200 → 176.
int aligned_size_for(int l);

}  // namespace jaanet
