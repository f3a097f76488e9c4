#pragma once

#include "jaanet/data_pipeline.hpp"

#include <Eigen/Dense>

#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace jaanet {

/// Per-AU confusion counts over a set of frames.
struct ConfusionCounts {
  Eigen::VectorXi tp, fp, fn, tn;
  int n_frames = 0;

  int n_au() const { return static_cast<int>(tp.size()); }
  void validate() const;
};

/// labels: frames × n_au in {0, 1}; an AU is predicted present when its
/// probability is at least the threshold.
ConfusionCounts confusion_counts(const Eigen::MatrixXi& labels, const Eigen::MatrixXd& probs,
                                 double threshold = 0.5);

struct PerAuScores {
  std::vector<double> per_au;
  double average = 0;  // unweighted mean over AUs
};

/// 2PR/(P+R) per AU, 0 when P + R = 0.
PerAuScores f1_frame(const ConfusionCounts& counts);
PerAuScores accuracy(const ConfusionCounts& counts);

/// Sum in a fixed pairwise order, so averages do not depend on how frames
/// were partitioned.
double pairwise_sum(const double* values, std::size_t n);
double pairwise_mean(const std::vector<double>& values);

/// Mean point-to-point error of each frame over its inter-ocular distance,
/// in percent. Rows are interleaved landmark vectors.
std::vector<double> frame_mean_errors(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat,
                                      const Eigen::VectorXd& d_o);
double mean_error(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat, const Eigen::VectorXd& d_o);

inline constexpr double kFailureThreshold = 10.0;

/// Percentage of frames whose mean error is strictly above 10.
double failure_rate(const std::vector<double>& frame_errors);

/// Frames × n_au occurrence probabilities for a batch of samples.
using AuPredictor = std::function<Eigen::MatrixXd(const std::vector<Sample>&)>;

struct OcclusionTable {
  std::vector<int> au_ids;
  std::vector<std::string> columns;            // Full, Lower, Upper, Right, Left
  std::vector<std::vector<double>> f1;         // [column][au]
  std::vector<double> average;                 // per column

  double at(const std::string& column, int au_id) const;
  nlohmann::json to_json() const;
  /// AUs as rows, one column per occlusion mode, F1 in percent, Avg last.
  std::string to_text() const;
};

/// F1-frame with the full face and with each half-face visible.
OcclusionTable occlusion_sweep(const AuPredictor& predict, const std::vector<Sample>& samples,
                               const std::vector<int>& au_ids, double threshold = 0.5);

}  // namespace jaanet
