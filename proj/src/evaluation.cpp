#include "jaanet/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace jaanet {

void ConfusionCounts::validate() const {
  const int n = n_au();
  if (fp.size() != n || fn.size() != n || tn.size() != n)
    throw std::invalid_argument("confusion count vectors differ in length");
  for (int i = 0; i < n; ++i) {
    if (tp[i] < 0 || fp[i] < 0 || fn[i] < 0 || tn[i] < 0)
      throw std::invalid_argument("negative confusion count");
    if (tp[i] + fp[i] + fn[i] + tn[i] != n_frames)
      throw std::invalid_argument("confusion counts do not sum to the frame count");
  }
}

ConfusionCounts confusion_counts(const Eigen::MatrixXi& labels, const Eigen::MatrixXd& probs,
                                 double threshold) {
  if (labels.rows() != probs.rows() || labels.cols() != probs.cols())
    throw std::invalid_argument("labels and predictions differ in shape");
  const Eigen::Index n_au = labels.cols();
  ConfusionCounts c;
  c.n_frames = static_cast<int>(labels.rows());
  c.tp = c.fp = c.fn = c.tn = Eigen::VectorXi::Zero(n_au);
  for (Eigen::Index f = 0; f < labels.rows(); ++f)
    for (Eigen::Index i = 0; i < n_au; ++i) {
      const bool truth = labels(f, i) != 0;
      const bool pred = probs(f, i) >= threshold;
      if (truth && pred) ++c.tp[i];
      else if (!truth && pred) ++c.fp[i];
      else if (truth && !pred) ++c.fn[i];
      else ++c.tn[i];
    }
  return c;
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return values[0];
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

double pairwise_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

PerAuScores f1_frame(const ConfusionCounts& counts) {
  counts.validate();
  PerAuScores s;
  for (int i = 0; i < counts.n_au(); ++i) {
    const double tp = counts.tp[i];
    const double p = tp + counts.fp[i] > 0 ? tp / (tp + counts.fp[i]) : 0.0;
    const double r = tp + counts.fn[i] > 0 ? tp / (tp + counts.fn[i]) : 0.0;
    s.per_au.push_back(p + r > 0 ? 2 * p * r / (p + r) : 0.0);
  }
  s.average = pairwise_mean(s.per_au);
  return s;
}

PerAuScores accuracy(const ConfusionCounts& counts) {
  counts.validate();
  PerAuScores s;
  for (int i = 0; i < counts.n_au(); ++i)
    s.per_au.push_back(counts.n_frames > 0
                           ? static_cast<double>(counts.tp[i] + counts.tn[i]) / counts.n_frames
                           : 0.0);
  s.average = pairwise_mean(s.per_au);
  return s;
}

std::vector<double> frame_mean_errors(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat,
                                      const Eigen::VectorXd& d_o) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols() || d_o.size() != y.rows() ||
      y.cols() % 2 != 0)
    throw std::invalid_argument("landmark arrays differ in shape");
  const Eigen::Index points = y.cols() / 2;
  std::vector<double> out;
  std::vector<double> dist(static_cast<std::size_t>(points));
  for (Eigen::Index f = 0; f < y.rows(); ++f) {
    if (!(d_o[f] > 0)) throw std::domain_error("inter-ocular distance must be positive");
    for (Eigen::Index j = 0; j < points; ++j)
      dist[static_cast<std::size_t>(j)] =
          std::hypot(y(f, 2 * j) - y_hat(f, 2 * j), y(f, 2 * j + 1) - y_hat(f, 2 * j + 1));
    out.push_back(pairwise_mean(dist) / d_o[f] * 100.0);
  }
  return out;
}

double mean_error(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat, const Eigen::VectorXd& d_o) {
  return pairwise_mean(frame_mean_errors(y, y_hat, d_o));
}

double failure_rate(const std::vector<double>& frame_errors) {
  if (frame_errors.empty()) return 0.0;
  std::size_t failures = 0;
  for (double e : frame_errors)
    if (e > kFailureThreshold) ++failures;
  return 100.0 * static_cast<double>(failures) / static_cast<double>(frame_errors.size());
}

double OcclusionTable::at(const std::string& column, int au_id) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == column)
      for (std::size_t i = 0; i < au_ids.size(); ++i)
        if (au_ids[i] == au_id) return f1[c][i];
  throw std::out_of_range("no entry for " + column + " / AU " + std::to_string(au_id));
}

nlohmann::json OcclusionTable::to_json() const {
  nlohmann::json j;
  j["metric"] = "f1_frame";
  j["au_ids"] = au_ids;
  j["columns"] = columns;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    nlohmann::json col;
    for (std::size_t i = 0; i < au_ids.size(); ++i) col["AU" + std::to_string(au_ids[i])] = f1[c][i];
    col["Avg"] = average[c];
    j["f1"][columns[c]] = col;
  }
  return j;
}

std::string OcclusionTable::to_text() const {
  std::ostringstream out;
  char buf[32];
  out << "AU    ";
  for (const auto& c : columns) {
    std::snprintf(buf, sizeof buf, "%8s", c.c_str());
    out << buf;
  }
  out << "\n";
  for (std::size_t i = 0; i <= au_ids.size(); ++i) {
    const std::string label = i < au_ids.size() ? std::to_string(au_ids[i]) : "Avg";
    std::snprintf(buf, sizeof buf, "%-6s", label.c_str());
    out << buf;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const double v = i < au_ids.size() ? f1[c][i] : average[c];
      std::snprintf(buf, sizeof buf, "%8.1f", 100.0 * v);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

OcclusionTable occlusion_sweep(const AuPredictor& predict, const std::vector<Sample>& samples,
                               const std::vector<int>& au_ids, double threshold) {
  OcclusionTable table;
  table.au_ids = au_ids;
  table.columns = {"Full", "Lower", "Upper", "Right", "Left"};
  Eigen::MatrixXi labels(static_cast<Eigen::Index>(samples.size()),
                         static_cast<Eigen::Index>(au_ids.size()));
  for (std::size_t f = 0; f < samples.size(); ++f)
    labels.row(static_cast<Eigen::Index>(f)) = samples[f].au_labels.transpose();

  auto score = [&](const std::vector<Sample>& batch) {
    const PerAuScores s = f1_frame(confusion_counts(labels, predict(batch), threshold));
    table.f1.push_back(s.per_au);
    table.average.push_back(s.average);
  };
  score(samples);
  for (auto mode : {OcclusionMode::Lower, OcclusionMode::Upper, OcclusionMode::Right,
                    OcclusionMode::Left}) {
    std::vector<Sample> occluded;
    occluded.reserve(samples.size());
    for (const auto& s : samples) occluded.push_back(occlude(s, mode));
    score(occluded);
  }
  return table;
}

}  // namespace jaanet
