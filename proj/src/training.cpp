#include "jaanet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace jaanet {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("train.epochs must be positive");
  if (!(lr0 > 0)) throw std::invalid_argument("train.lr0 must be positive");
  if (!(lr_decay_factor > 0 && lr_decay_factor <= 1))
    throw std::invalid_argument("train.lr_decay_factor must lie in (0, 1]");
  if (!(lr_decay_every > 0)) throw std::invalid_argument("train.lr_decay_every must be positive");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("train.momentum must lie in [0, 1)");
  if (weight_decay < 0) throw std::invalid_argument("train.weight_decay must be non-negative");
  if (batch_size <= 0) throw std::invalid_argument("train.batch_size must be positive");
  if (eval_every <= 0) throw std::invalid_argument("train.eval_every must be positive");
}

double lr_at(double epoch, const TrainConfig& config) {
  if (epoch < 0) throw std::invalid_argument("negative epoch");
  return config.lr0 * std::pow(config.lr_decay_factor, std::floor(epoch / config.lr_decay_every));
}

double lr_at_step(long step, long steps_per_epoch, const TrainConfig& config) {
  if (step < 0 || steps_per_epoch <= 0) throw std::invalid_argument("invalid step");
  return lr_at(static_cast<double>(step / steps_per_epoch), config);
}

int aligned_size_for(int l) { return static_cast<int>(std::lround(l * 200.0 / 176.0)); }

Predictions predict(JaaNet<float>& model, const std::vector<Sample>& samples, int batch_size) {
  const bool was_training = model.training();
  model.set_training(false);
  Predictions out;
  const auto n = static_cast<Eigen::Index>(samples.size());
  const int n_au = model.config().n_au;
  out.au_probs.resize(n, n_au);
  if (model.architecture().local_heads) out.local_au_probs.resize(n, n_au);
  if (model.architecture().face_alignment) out.landmarks.resize(n, 2 * model.config().n_align);
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
    std::vector<const Image*> images;
    for (Eigen::Index i = 0; i < count; ++i) images.push_back(&samples[static_cast<std::size_t>(start + i)].image);
    const auto result = model.forward(to_network_input<float>(images));
    out.au_probs.middleRows(start, count) = result.au_probs.cast<double>();
    if (out.local_au_probs.size() > 0)
      out.local_au_probs.middleRows(start, count) = result.local_au_probs.cast<double>();
    if (out.landmarks.size() > 0) out.landmarks.middleRows(start, count) = result.landmarks.cast<double>();
  }
  model.set_training(was_training);
  return out;
}

EvalMetrics evaluate(JaaNet<float>& model, const std::vector<Sample>& samples, double threshold,
                     int batch_size) {
  const Predictions pred = predict(model, samples, batch_size);
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXi labels(n, model.config().n_au);
  for (Eigen::Index i = 0; i < n; ++i) labels.row(i) = samples[static_cast<std::size_t>(i)].au_labels.transpose();
  const ConfusionCounts counts = confusion_counts(labels, pred.au_probs, threshold);
  EvalMetrics m;
  m.f1 = f1_frame(counts);
  m.accuracy = accuracy(counts);
  if (pred.landmarks.size() > 0) {
    Eigen::MatrixXd truth(n, pred.landmarks.cols());
    Eigen::VectorXd d_o(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      truth.row(i) = samples[static_cast<std::size_t>(i)].landmarks.interleaved().transpose();
      d_o[i] = samples[static_cast<std::size_t>(i)].landmarks.inter_ocular_distance();
    }
    const auto errors = frame_mean_errors(truth, pred.landmarks, d_o);
    m.mean_error = pairwise_mean(errors);
    m.failure_rate = failure_rate(errors);
  }
  return m;
}

Eigen::VectorXd mean_landmarks(const std::vector<Sample>& samples, int crop_size) {
  if (samples.empty()) throw std::invalid_argument("no samples for the landmark mean");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2 * samples.front().landmarks.size());
  for (const auto& s : samples) sum += center_crop(s, crop_size).landmarks.interleaved();
  return sum / static_cast<double>(samples.size());
}

namespace {

nlohmann::json to_json(const LossTerms& t) {
  return {{"e_align", t.e_align},       {"e_cross", t.e_cross}, {"e_dice", t.e_dice},
          {"e_all_au", t.e_all_au},     {"e_local_au", t.e_local_au},
          {"e_r", t.e_r},               {"total", t.total}};
}

nlohmann::json to_json(const EvalMetrics& m) {
  return {{"f1_frame", m.f1.average},       {"f1_per_au", m.f1.per_au},
          {"accuracy", m.accuracy.average}, {"mean_error", m.mean_error},
          {"failure_rate", m.failure_rate}};
}

void accumulate(LossTerms& sum, const LossTerms& t) {
  sum.e_align += t.e_align;
  sum.e_cross += t.e_cross;
  sum.e_dice += t.e_dice;
  sum.e_all_au += t.e_all_au;
  sum.e_local_au += t.e_local_au;
  sum.e_r += t.e_r;
  sum.total += t.total;
}

void scale(LossTerms& t, double k) {
  t.e_align *= k;
  t.e_cross *= k;
  t.e_dice *= k;
  t.e_all_au *= k;
  t.e_local_au *= k;
  t.e_r *= k;
  t.total *= k;
}

bool finite(const LossTerms& t) {
  return std::isfinite(t.total) && std::isfinite(t.e_align) && std::isfinite(t.e_all_au) &&
         std::isfinite(t.e_local_au) && std::isfinite(t.e_r);
}

[[noreturn]] void abort_non_finite(const TrainOptions& options, int epoch, std::size_t batch_index,
                                   const std::vector<Sample>& batch,
                                   const std::vector<std::size_t>& indices, const LossTerms& terms) {
  std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
  if (options.run_dir) {
    const fs::path dir = *options.run_dir / ("abort_epoch" + std::to_string(epoch) + "_batch" +
                                             std::to_string(batch_index));
    fs::create_directories(dir);
    nlohmann::json snap = {{"epoch", epoch}, {"batch", batch_index}, {"sample_indices", indices},
                           {"losses", to_json(terms)}};
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::string name = "sample_" + std::to_string(i) + ".ppm";
      write_ppm(dir / name, batch[i].image);
      snap["samples"].push_back({{"image", name},
                                 {"labels", std::vector<int>(batch[i].au_labels.data(),
                                                             batch[i].au_labels.data() +
                                                                 batch[i].au_labels.size())},
                                 {"landmarks", std::vector<double>(
                                                   batch[i].landmarks.interleaved().data(),
                                                   batch[i].landmarks.interleaved().data() +
                                                       2 * batch[i].landmarks.size())}});
    }
    std::ofstream(dir / "snapshot.json") << snap.dump(2) << "\n";
    where += "; snapshot in " + dir.string();
  }
  throw NonFiniteLossError("non-finite loss at " + where);
}

}  // namespace

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"lr", r.lr}, {"losses", to_json(r.losses)},
                      {"seconds", r.seconds}};
  if (r.train_metrics) j["train"] = to_json(*r.train_metrics);
  if (r.eval_metrics) j["eval"] = to_json(*r.eval_metrics);
  return j;
}

TrainResult train(JaaNet<float>& model, const std::vector<Sample>& train_set,
                  const Eigen::VectorXd& au_weights, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  const int l = model.config().l;
  Rng rng(config.seed);

  if (options.run_dir) {
    fs::create_directories(*options.run_dir / "checkpoints");
    std::ofstream(*options.run_dir / "config.json") << options.config_snapshot.dump(2) << "\n";
    std::ofstream(*options.run_dir / "metrics.jsonl", std::ios::trunc);
  }
  if (options.set_landmark_prior && model.architecture().face_alignment)
    model.set_landmark_prior(mean_landmarks(train_set, l));

  const std::vector<Sample> train_eval = center_crops(train_set, l);
  std::vector<Sample> eval_crops;
  if (options.eval_set) eval_crops = center_crops(*options.eval_set, l);

  NesterovSgd<float> optimizer(model.parameters(), config.momentum, config.weight_decay);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model.set_training(true);
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_at(epoch, config);
    LossTerms sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Sample> batch;
      std::vector<std::size_t> indices(order.begin() + static_cast<long>(start),
                                       order.begin() + static_cast<long>(end));
      for (std::size_t i : indices)
        batch.push_back(config.augment ? random_crop_flip(train_set[i], rng, l)
                                       : center_crop(train_set[i], l));
      // A single-sample batch gives degenerate batch statistics.
      if (batch.size() < 2 && order.size() >= 2) continue;
      std::vector<const Image*> images;
      for (const auto& s : batch) images.push_back(&s.image);

      model.zero_grad();
      ModelOutputs<float> out;
      try {
        out = model.forward(to_network_input<float>(images));
      } catch (const DegenerateGeometryError&) {
        // Landmark predictions without usable geometry only arise from a diverged run.
        LossTerms bad;
        bad.total = bad.e_align = std::numeric_limits<double>::quiet_NaN();
        abort_non_finite(options, epoch, batches, batch, indices, bad);
      }
      OutputGradients<float> grads;
      const LossTerms terms = compute_objective(out, make_targets<float>(batch), au_weights,
                                                model.config(), model.architecture(), &grads);
      if (!finite(terms)) abort_non_finite(options, epoch, batches, batch, indices, terms);
      model.backward(grads);
      optimizer.step(lr);
      accumulate(sum, terms);
      ++batches;
    }
    if (batches > 0) scale(sum, 1.0 / static_cast<double>(batches));

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.losses = sum;
    const bool last = epoch + 1 == config.epochs;
    if (last || (epoch + 1) % config.eval_every == 0) {
      record.train_metrics = evaluate(model, train_eval);
      if (!eval_crops.empty()) record.eval_metrics = evaluate(model, eval_crops);
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (options.run_dir) {
      std::ofstream(*options.run_dir / "metrics.jsonl", std::ios::app) << to_json(record).dump() << "\n";
      if (config.save_checkpoints || last) {
        Checkpoint ck = make_checkpoint(model, to_string(config.variant));
        ck.extra = {{"epoch", epoch}};
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
        const fs::path path = *options.run_dir / "checkpoints" / name;
        write_checkpoint(path, ck);
        if (last) result.final_checkpoint = path;
      }
    }
    if (options.log) {
      *options.log << "epoch " << epoch << " lr " << lr << " loss " << sum.total;
      if (record.train_metrics)
        *options.log << " train_f1 " << record.train_metrics->f1.average << " mean_error "
                     << record.train_metrics->mean_error;
      if (record.eval_metrics) *options.log << " eval_f1 " << record.eval_metrics->f1.average;
      *options.log << " (" << record.seconds << " s)\n";
    }
    result.history.push_back(std::move(record));
  }

  if (options.run_dir) {
    nlohmann::json summary = {{"variant", to_string(config.variant)},
                              {"epochs", config.epochs},
                              {"final", to_json(result.history.back())}};
    if (result.final_checkpoint) summary["checkpoint"] = result.final_checkpoint->string();
    std::ofstream(*options.run_dir / "summary.json") << summary.dump(2) << "\n";
  }
  return result;
}

std::vector<Sample> load_samples(const Manifest& manifest, const fs::path& base_dir,
                                 int aligned_size, bool align) {
  const LayoutPtr layout =
      builtin_layout(static_cast<int>(manifest.records.empty() ? 49 : manifest.records.front().landmarks.size() / 2));
  std::vector<Sample> out;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    Sample s = load_sample(manifest, i, base_dir, layout);
    out.push_back(align ? similarity_align(s, aligned_size) : std::move(s));
  }
  return out;
}

std::vector<Sample> corpus_samples(const SyntheticCorpus& corpus, int aligned_size, bool align) {
  std::vector<Sample> out;
  const auto& records = corpus.manifest.records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Sample s;
    s.image = corpus.images[i];
    s.au_labels = records[i].labels;
    s.landmarks = LandmarkSet::from_interleaved(
        records[i].landmarks, builtin_layout(static_cast<int>(records[i].landmarks.size() / 2)));
    s.subject_id = records[i].subject_id;
    out.push_back(align ? similarity_align(s, aligned_size) : std::move(s));
  }
  return out;
}

std::vector<Sample> center_crops(const std::vector<Sample>& samples, int crop_size) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(center_crop(s, crop_size));
  return out;
}

}  // namespace jaanet
