// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "jaanet/attention_geometry.hpp"
#include "jaanet/checkpoint.hpp"
#include "jaanet/evaluation.hpp"
#include "jaanet/losses.hpp"
#include "jaanet/network.hpp"
#include "jaanet/region_layers.hpp"
#include "jaanet/training.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace jaanet;
using jaanet::testing::central_difference;
using jaanet::testing::relative_error;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

template <typename Scalar>
Tensor<Scalar> random_images(int n, int l, Rng& rng) {
  Tensor<Scalar> t(n, 3, l, l);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(u(rng));
  return t;
}

template <typename Scalar>
void perturb(JaaNet<Scalar>& net, Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& p : net.parameters())
    for (Eigen::Index i = 0; i < p.param->size(); ++i)
      p.param->value[i] += static_cast<Scalar>(n(rng));
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Timer t;
  std::ostringstream detail;
  bool ok = true;
  for (int c : {1, 2, 4, 8}) {
    const std::int64_t c2 = static_cast<std::int64_t>(c) * c;
    const std::int64_t hm = HmRegionLayer<float>(3, c).parameter_count();
    const std::int64_t r = RegionLayer<float>(3, c).parameter_count();
    ok &= hm == 4932 * c2 + 148 * c && r == 9216 * c2 + 256 * c;
    detail << "c=" << c << " R_hm " << hm << " R " << r << "; ";
  }
  ok &= HmRegionLayer<float>(3, 8).parameter_count() == 316832;
  ok &= RegionLayer<float>(3, 8).parameter_count() == 591872;
  const double s = t.seconds();
  ok &= s < 1.0;
  detail << fmt(s, 3) << " s";
  return {ok, detail.str()};
}

Outcome criterion2() {
  Timer t;
  const std::vector<int> aus = {1, 2, 4, 6, 7, 9, 10, 12, 14, 15, 17, 23, 24, 25, 26};
  const auto cfg = AttentionGeometryConfig::for_image(176, aus);
  Rng rng(2024);
  long mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const LandmarkSet face = jaanet::testing::random_face(rng, 176);
    const auto maps = predefine_all(face, cfg);
    for (std::size_t i = 0; i < aus.size(); ++i) {
      const RowMatrix<double> oracle =
          jaanet::testing::oracle_map(face, aus[i], 176, cfg.map_size, cfg.zeta, cfg.xi);
      mismatches += (maps[i].grid.array() != oracle.array()).count();
    }
  }
  const double s = t.seconds();
  return {mismatches == 0 && s < 30.0,
          "1000 faces x " + std::to_string(aus.size()) + " AUs, " + std::to_string(mismatches) +
              " differing cells, " + fmt(s, 3) + " s"};
}

Outcome criterion3() {
  Timer t;
  JaaNet<float> net(JaaNetConfig{}, Architecture::for_variant(Variant::JAA), 3);
  net.set_training(false);
  Rng rng(3);
  ForwardOptions opt;
  opt.record_shapes = true;
  const auto out = net.forward(random_images<float>(1, 176, rng), opt);
  const double s = t.seconds();

  std::map<std::string, Shape> expected = {
      {"trunk", {1, 64, 44, 44}},          {"alignment.feature", {1, 40, 11, 11}},
      {"global.feature", {1, 40, 11, 11}}, {"alignment.fc1", {1, 512, 1, 1}},
      {"alignment.fc2", {1, 98, 1, 1}},    {"au_head.fc1", {1, 512, 1, 1}},
      {"au_head.fc2", {1, 24, 1, 1}},      {"local.assembled", {1, 64, 5, 5}},
  };
  for (int i = 0; i < 12; ++i) {
    const std::string r = "refine." + std::to_string(i);
    expected[r + ".conv1"] = {1, 64, 50, 50};
    expected[r + ".conv2"] = {1, 64, 48, 48};
    expected[r + ".conv3"] = {1, 64, 46, 46};
    expected[r + ".conv4"] = {1, 1, 44, 44};
  }
  std::map<std::string, Shape> got(out.shape_ledger.begin(), out.shape_ledger.end());
  int bad = 0;
  std::string first_bad;
  for (const auto& [name, shape] : expected) {
    auto it = got.find(name);
    if (it == got.end() || !(it->second == shape)) {
      if (bad++ == 0) first_bad = name;
    }
  }
  for (int i = 0; i < 12; ++i) {
    if (!(out.predefined_maps[i].shape() == Shape{1, 1, 52, 52})) ++bad;
    if (!(out.refined_maps[i].shape() == Shape{1, 1, 44, 44})) ++bad;
    if (!(out.local_features[i].shape() == Shape{1, 64, 5, 5})) ++bad;
  }
  if (out.local_au_probs.cols() != 12 || out.au_probs.cols() != 12 || out.landmarks.cols() != 98)
    ++bad;
  std::string detail = std::to_string(expected.size()) + " ledger entries checked, " +
                       std::to_string(bad) + " mismatches";
  if (bad) detail += " (first: " + first_bad + ")";
  return {bad == 0 && s < 10.0, detail + ", " + fmt(s, 3) + " s"};
}

Outcome criterion4() {
  Timer t;
  const auto cfg = JaaNetConfig::miniature(32, 1, {1, 12}, 4);
  Architecture arch = Architecture::for_variant(Variant::JAA);
  arch.gradient_barrier = false;
  JaaNet<double> net(cfg, arch, 4);
  Rng rng(4);
  perturb(net, rng, 0.05);
  const Tensor<double> x = random_images<double>(3, 32, rng);

  BatchTargets<double> targets;
  targets.au_labels.resize(3, 2);
  targets.au_labels << 1, 0, 0, 1, 1, 1;
  targets.landmarks.resize(3, 8);
  std::uniform_real_distribution<double> u(8.0, 24.0);
  for (Eigen::Index i = 0; i < targets.landmarks.size(); ++i) targets.landmarks.data()[i] = u(rng);
  targets.inter_ocular = Vector<double>::Constant(3, 10.0);
  const Eigen::VectorXd w = au_weights(Eigen::Vector2d(0.3, 0.6));

  // Predefinition rounds landmarks to grid cells, so the maps are held fixed.
  std::vector<Tensor<double>> maps = net.predefine_maps(net.forward(x).landmarks);
  ForwardOptions opt;
  opt.predefined_override = &maps;
  auto loss = [&] {
    return compute_objective<double>(net.forward(x, opt), targets, w, cfg, arch, nullptr).total;
  };
  net.zero_grad();
  OutputGradients<double> g;
  compute_objective<double>(net.forward(x, opt), targets, w, cfg, arch, &g);
  net.backward(g);

  struct Entry {
    Parameter<double>* p;
    Eigen::Index i;
  };
  std::vector<Entry> all;
  for (auto& p : net.parameters())
    for (Eigen::Index i = 0; i < p.param->size(); ++i) all.push_back({p.param, i});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(all.size(), 250));
  double worst_total = 0;
  for (const auto& e : all) {
    const double analytic = e.p->grad[e.i];
    const double fd = central_difference(loss, e.p->value[e.i], 1e-6);
    worst_total = std::max(worst_total, relative_error(fd, analytic, 1e-5));
  }

  // Per-loss checks on the loss functions themselves.
  using M = RowMatrix<double>;
  const int n = 4, k = 3;
  M p(n, k), q(n, k);
  std::bernoulli_distribution b(0.4);
  std::uniform_real_distribution<double> up(0.05, 0.95);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p.data()[i] = b(rng);
    q.data()[i] = up(rng);
  }
  const Eigen::VectorXd w3 = au_weights(Eigen::Vector3d(0.15, 0.4, 0.25));
  auto worst_of = [](M& var, const M& grad, const std::function<double()>& f) {
    double worst = 0;
    for (Eigen::Index i = 0; i < var.size(); ++i)
      worst = std::max(worst, relative_error(central_difference(f, var.data()[i], 1e-6),
                                             grad.data()[i]));
    return worst;
  };
  std::map<std::string, double> per_loss;
  per_loss["align"] = [&] {
    std::normal_distribution<double> gd(50.0, 20.0);
    M y(n, 8), yh(n, 8);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y.data()[i] = gd(rng);
      yh.data()[i] = gd(rng);
    }
    const Vector<double> d = Vector<double>::LinSpaced(n, 20.0, 35.0);
    return worst_of(yh, face_alignment_loss(y, yh, d).grad,
                    [&] { return face_alignment_loss(y, yh, d).value; });
  }();
  per_loss["cross_entropy"] = worst_of(q, weighted_cross_entropy(p, q, w3).grad,
                                       [&] { return weighted_cross_entropy(p, q, w3).value; });
  per_loss["dice"] =
      worst_of(q, weighted_dice(p, q, w3).grad, [&] { return weighted_dice(p, q, w3).value; });
  per_loss["local_au"] =
      worst_of(q, local_au_loss(p, q, w3).grad, [&] { return local_au_loss(p, q, w3).value; });
  per_loss["refinement"] = [&] {
    Tensor<double> v(2, 1, 5, 5), vh(2, 1, 5, 5);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v.data()[i] = up(rng);
      vh.data()[i] = up(rng);
    }
    const auto grads = refinement_constraint<double>({v}, {vh}).second;
    double worst = 0;
    for (std::size_t i = 0; i < vh.size(); ++i) {
      const double fd = central_difference(
          [&] { return refinement_constraint<double>({v}, {vh}).first; }, vh.data()[i], 1e-6);
      worst = std::max(worst, relative_error(fd, grads[0].data()[i]));
    }
    return worst;
  }();

  bool ok = worst_total < 1e-3;
  std::ostringstream detail;
  detail << all.size() << " parameters, total-loss worst rel err " << fmt(worst_total, 3);
  for (const auto& [name, v] : per_loss) {
    ok &= v < 1e-5;
    detail << ", " << name << " " << fmt(v, 3);
  }
  const double s = t.seconds();
  ok &= s < 300.0;
  detail << ", " << fmt(s, 3) << " s";
  return {ok, detail.str()};
}

std::map<std::string, Eigen::VectorXd> run_backward(JaaNet<double>& net, const Tensor<double>& x,
                                                    const OutputGradients<double>& g) {
  net.zero_grad();
  net.forward(x);
  net.backward(g);
  std::map<std::string, Eigen::VectorXd> out;
  for (auto& p : net.parameters()) out[p.name] = p.param->grad;
  return out;
}

Outcome criterion5() {
  const auto cfg = JaaNetConfig::miniature(32, 1, {1, 2, 12}, 49);
  JaaNet<double> net(cfg, Architecture::for_variant(Variant::JAA), 5);
  Rng rng(5);
  perturb(net, rng, 0.05);
  const Tensor<double> x = random_images<double>(4, 32, rng);
  const auto out = net.forward(x);
  RowMatrix<double> labels(4, 3);
  labels << 1, 0, 1, 0, 1, 0, 1, 1, 0, 0, 0, 1;
  const Eigen::VectorXd w = au_weights(Eigen::Vector3d(0.5, 0.5, 0.5));

  OutputGradients<double> all_au;
  all_au.au_probs = au_detection_loss(labels, out.au_probs, w).grad;
  const auto g_all = run_backward(net, x, all_au);
  double max_branch = 0;
  for (const auto& [name, g] : g_all) {
    const std::string grp = parameter_group(name);
    if (starts_with(grp, "refine.") || starts_with(grp, "local."))
      max_branch = std::max(max_branch, g.cwiseAbs().maxCoeff());
  }

  OutputGradients<double> local;
  local.local_au_probs = local_au_loss(labels, out.local_au_probs, w).grad;
  const auto g_local = run_backward(net, x, local);
  std::map<std::string, double> per_group;
  for (const auto& [name, g] : g_local) {
    const std::string grp = parameter_group(name);
    if (starts_with(grp, "refine.") || starts_with(grp, "local."))
      per_group[grp] = std::max(per_group[grp], g.cwiseAbs().maxCoeff());
  }
  bool every_branch = per_group.size() == 6;
  double weakest = INFINITY;
  for (const auto& [grp, v] : per_group) {
    every_branch &= v > 0;
    weakest = std::min(weakest, v);
  }
  return {max_branch < 1e-12 && every_branch,
          "max |dE_all_au/dtheta| over branches " + fmt(max_branch, 3) + "; smallest per-branch max " +
              "|dE_local_au/dtheta| " + fmt(weakest, 3) + " over " +
              std::to_string(per_group.size()) + " branches"};
}

Outcome criterion6() {
  const auto cfg = JaaNetConfig::miniature(32, 1, {1, 12}, 49);
  Architecture enhanced = Architecture::for_variant(Variant::JAA_BE);
  Architecture plain = enhanced;
  plain.bp_enhancement = 1.0;
  JaaNet<double> a(cfg, enhanced, 6), b(cfg, plain, 6);
  Rng rng(6);
  std::normal_distribution<double> n(0.0, 0.05);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (Eigen::Index j = 0; j < pa[i].param->size(); ++j)
      pb[i].param->value[j] = pa[i].param->value[j] += n(rng);
  const Tensor<double> x = random_images<double>(3, 32, rng);

  const auto oa = a.forward(x), ob = b.forward(x);
  bool identical = oa.au_probs == ob.au_probs && oa.landmarks == ob.landmarks;
  for (std::size_t i = 0; i < oa.refined_maps.size(); ++i)
    identical &= oa.refined_maps[i].vector() == ob.refined_maps[i].vector();

  BatchTargets<double> targets;
  targets.au_labels.resize(3, 2);
  targets.au_labels << 1, 0, 0, 1, 1, 1;
  targets.landmarks = oa.landmarks.array() + 1.0;
  targets.inter_ocular = Vector<double>::Constant(3, 10.0);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  OutputGradients<double> ga, gb;
  compute_objective(oa, targets, w, cfg, enhanced, &ga);
  compute_objective(ob, targets, w, cfg, plain, &gb);
  a.zero_grad();
  b.zero_grad();
  a.backward(ga);
  b.backward(gb);
  double worst = 0;
  bool nonzero = true;
  for (std::size_t i = 0; i < a.refined_map_gradients().size(); ++i) {
    const auto& ea = a.refined_map_gradients()[i];
    const auto& eb = b.refined_map_gradients()[i];
    nonzero &= eb.array().abs().maxCoeff() > 0;
    for (std::size_t j = 0; j < ea.size(); ++j)
      worst = std::max(worst, relative_error(ea.data()[j], 2.0 * eb.data()[j], 1e-300));
  }
  return {identical && nonzero && worst < 1e-12,
          std::string("forward outputs ") + (identical ? "bit-identical" : "DIFFER") +
              "; worst relative error of map gradient vs 2x unenhanced " + fmt(worst, 3)};
}

// Synthetic corpus of the overfit and occlusion experiments.
struct OverfitSetup {
  static constexpr int l = 96;
  std::vector<int> au_ids = {1, 6, 12, 23};
  SyntheticConfig synthetic;
  std::vector<Sample> train, test;
  Eigen::VectorXd weights;

  OverfitSetup() {
    synthetic.image_size = aligned_size_for(l);
    synthetic.au_ids = au_ids;
    synthetic.rates = {0.5, 0.5, 0.125, 0.125};
    Rng rng(1);
    const SyntheticCorpus a = generate_synthetic(synthetic, rng, 64);
    const SyntheticCorpus b = generate_synthetic(synthetic, rng, 256);
    train = corpus_samples(a, synthetic.image_size);
    test = corpus_samples(b, synthetic.image_size);
    weights = au_weights(a.manifest.occurrence_rates());
  }

  JaaNetConfig network() const {
    JaaNetConfig cfg;
    cfg.l = l;
    cfg.c = 2;
    cfg.d = 64;
    cfg.d_l = 16;
    cfg.au_ids = au_ids;
    cfg.n_au = static_cast<int>(au_ids.size());
    return cfg;
  }

  TrainConfig recipe() const {
    TrainConfig t;
    t.epochs = 200;
    t.lr_decay_every = 2.0 * t.epochs / 12.0;  // 12 epochs with decay every 2, stretched
    t.batch_size = 16;
    t.eval_every = 50;
    t.save_checkpoints = false;
    return t;
  }
};

struct TrainedModel {
  std::unique_ptr<OverfitSetup> setup;
  std::unique_ptr<JaaNet<float>> net;
  TrainResult result;
  double seconds = 0;
};

TrainedModel train_overfit_model() {
  TrainedModel m;
  m.setup = std::make_unique<OverfitSetup>();
  m.net = std::make_unique<JaaNet<float>>(m.setup->network(), Architecture::for_variant(Variant::JAA), 5);
  TrainOptions opt;
  opt.eval_set = &m.setup->test;
  Timer t;
  m.result = train(*m.net, m.setup->train, m.setup->weights, m.setup->recipe(), opt);
  m.seconds = t.seconds();
  return m;
}

Outcome criterion7(const TrainedModel& m) {
  const EpochRecord& last = m.result.history.back();
  const double f1 = last.train_metrics->f1.average;
  const double err = last.train_metrics->mean_error;
  const double held_out = last.eval_metrics->f1.average;
  const bool ok = f1 >= 0.95 && err <= 3.0 && held_out >= 0.80 && m.seconds < 1800;
  return {ok, "train F1 " + fmt(f1) + ", mean error " + fmt(err) + ", held-out F1 " +
                  fmt(held_out) + " (256 samples), " + fmt(m.seconds, 4) + " s"};
}

Outcome criterion8() {
  Timer t;
  const int l = 48;
  const std::vector<int> aus = {1, 6, 12, 23};
  const std::vector<Variant> variants = {Variant::JA, Variant::J, Variant::HDW};
  std::map<Variant, std::vector<double>> scores;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig sc;
    sc.image_size = aligned_size_for(l);
    sc.au_ids = aus;
    sc.rates = {0.5, 0.5, 0.125, 0.125};
    Rng rng(100 + seed);
    const SyntheticCorpus a = generate_synthetic(sc, rng, 64);
    const SyntheticCorpus b = generate_synthetic(sc, rng, 256);
    const auto train_set = corpus_samples(a, sc.image_size);
    const auto test_set = center_crops(corpus_samples(b, sc.image_size), l);
    const Eigen::VectorXd w = au_weights(a.manifest.occurrence_rates());
    for (Variant v : variants) {
      JaaNetConfig cfg;
      cfg.l = l;
      cfg.c = 2;
      cfg.d = 64;
      cfg.d_l = 16;
      cfg.au_ids = aus;
      cfg.n_au = 4;
      JaaNet<float> net(cfg, Architecture::for_variant(v), seed);
      TrainConfig tc;
      tc.epochs = 40;
      tc.lr_decay_every = 2.0 * tc.epochs / 12.0;
      tc.batch_size = 16;
      tc.eval_every = tc.epochs;
      tc.save_checkpoints = false;
      tc.variant = v;
      tc.seed = seed;
      train(net, train_set, w, tc);
      scores[v].push_back(evaluate(net, test_set).f1.average);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double ja = median(scores[Variant::JA]), j = median(scores[Variant::J]),
               hdw = median(scores[Variant::HDW]);
  const double inv1 = j - ja, inv2 = hdw - j;  // positive = inverted
  const int inversions = (inv1 > 0) + (inv2 > 0);
  const bool ok = inversions == 0 || (inversions == 1 && std::max(inv1, inv2) < 0.02);
  std::string detail = "median test F1 JA " + fmt(ja) + ", J " + fmt(j) + ", HDW " + fmt(hdw);
  if (inversions == 1 && ok) detail += " (one adjacent pair inverted by < 0.02, reported)";
  return {ok, detail + ", " + fmt(t.seconds(), 4) + " s"};
}

Outcome criterion9() {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution b(0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> frames(1, 12), aus(1, 5);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int nf = frames(rng), na = aus(rng);
    Eigen::MatrixXi labels(nf, na);
    Eigen::MatrixXd probs(nf, na);
    for (int f = 0; f < nf; ++f)
      for (int a = 0; a < na; ++a) {
        labels(f, a) = b(rng);
        probs(f, a) = u(rng);
      }
    const ConfusionCounts counts = confusion_counts(labels, probs);
    const PerAuScores f1 = f1_frame(counts), acc = accuracy(counts);
    for (int a = 0; a < na; ++a) {
      int tp = 0, fp = 0, fn = 0, tn = 0;
      for (int f = 0; f < nf; ++f) {
        const bool pred = probs(f, a) >= 0.5, truth = labels(f, a) == 1;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
        tn += !pred && !truth;
      }
      const double expect_f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
      const double expect_acc = static_cast<double>(tp + tn) / nf;
      bad += std::abs(f1.per_au[a] - expect_f1) > 1e-15;
      bad += acc.per_au[a] != expect_acc;
    }

    // Mean error on offsets of integer length, where every summation order is exact.
    static const std::vector<Eigen::Vector2d> offsets = {{0, 0}, {3, 4}, {-6, 8}, {5, -12}, {0, 7}};
    std::uniform_int_distribution<int> pick(0, 4), points(1, 9);
    const int np = points(rng);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(nf, 2 * np), yh = y;
    Eigen::VectorXd d(nf);
    std::vector<double> expect;
    for (int f = 0; f < nf; ++f) {
      d[f] = 8.0 * (1 + f);
      double sum = 0;
      for (int j = 0; j < np; ++j) {
        const Eigen::Vector2d o = offsets[pick(rng)];
        yh(f, 2 * j) = o.x();
        yh(f, 2 * j + 1) = o.y();
        sum += o.norm();
      }
      expect.push_back(sum / np / d[f] * 100.0);
    }
    const std::vector<double> errors = frame_mean_errors(y, yh, d);
    bad += errors != expect;
    int fails = 0;
    for (double e : errors) fails += e > kFailureThreshold;
    bad += failure_rate(errors) != 100.0 * fails / nf;
  }

  // Hand examples: TP=2, FP=1, FN=1; every landmark off by d_o/10; 1 of 4 frames failing.
  Eigen::MatrixXi hl(4, 1);
  hl << 1, 1, 1, 0;
  Eigen::MatrixXd hp(4, 1);
  hp << 0.9, 0.8, 0.2, 0.7;
  const double f1_two_thirds = f1_frame(confusion_counts(hl, hp)).per_au[0];
  Eigen::MatrixXd y0 = Eigen::MatrixXd::Zero(1, 4), y1(1, 4);
  y1 << 4.5, 6, -6, 4.5;
  const double me = mean_error(y0, y1, Eigen::VectorXd::Constant(1, 75.0));
  const double fr = failure_rate({1.0, 2.0, 12.0, 3.0});
  const bool hand = f1_two_thirds == 2.0 / 3.0 && me == 10.0 && fr == 25.0;
  return {bad == 0 && hand, "100 random instances, " + std::to_string(bad) +
                                " oracle disagreements; hand examples F1 " + fmt(f1_two_thirds) +
                                ", mean error " + fmt(me) + ", failure rate " + fmt(fr)};
}

Outcome criterion10(TrainedModel& m) {
  const int l = OverfitSetup::l;
  const std::vector<Sample> crops = center_crops(m.setup->test, l);
  JaaNet<float>& net = *m.net;
  const AuPredictor predictor = [&](const std::vector<Sample>& s) { return predict(net, s).au_probs; };
  const OcclusionTable table = occlusion_sweep(predictor, crops, m.setup->au_ids);
  const double full = table.at("Full", 1);
  const double upper_visible = table.at("Upper", 1);
  const double upper_hidden = table.at("Lower", 1);
  const bool ok = std::abs(upper_visible - full) <= 0.05 && full - upper_hidden >= 0.3;
  std::cout << table.to_text();
  return {ok, "AU1 F1 full " + fmt(full) + ", upper half visible " + fmt(upper_visible) +
                  ", upper half occluded " + fmt(upper_hidden)};
}

Outcome criterion11() {
  Rng rng(11);
  const std::vector<int> aus = {1, 2, 4, 6, 7, 9, 10, 12, 14, 15, 17, 23, 24, 25, 26};
  const int side = 200, crop = 176;
  const auto geometry = AttentionGeometryConfig::for_image(crop, aus);
  std::uniform_real_distribution<float> pixel(0.0f, 1.0f);
  std::uniform_int_distribution<int> offset(0, side - crop);
  int crop_bad = 0, flip_bad = 0, mirror_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Sample s;
    s.image = Image(side, side);
    for (auto& v : s.image.data) v = pixel(rng);
    s.landmarks = jaanet::testing::random_face(rng, side, 2.0);
    s.au_labels = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(aus.size()));
    s.subject_id = "s";
    const int x0 = offset(rng), y0 = offset(rng);

    // Crop round trip: pixels are the window, landmarks shift back exactly.
    const Sample c = crop_flip(s, x0, y0, crop, false);
    const Eigen::MatrixXd back = c.landmarks.points().rowwise() + Eigen::RowVector2d(x0, y0);
    crop_bad += (back - s.landmarks.points()).cwiseAbs().maxCoeff() > 1e-9;
    crop_bad += RowMatrix<float>(c.image.channel(1)) !=
                RowMatrix<float>(s.image.channel(1).block(y0, x0, crop, crop));

    // Flip: an involution that mirrors pixels.
    const Sample f = crop_flip(s, x0, y0, crop, true);
    const Sample ff = crop_flip(f, 0, 0, crop, true);
    flip_bad += !(ff.image == c.image);
    flip_bad += (ff.landmarks.points() - c.landmarks.points()).cwiseAbs().maxCoeff() > 1e-9;
    flip_bad += f.image.at(0, 7, 0) != c.image.at(0, 7, crop - 1);
    flip_bad += f.au_labels != c.au_labels;

    // Maps from flipped landmarks mirror the maps from the originals.
    const auto a = map_centers(c.landmarks, geometry), bm = map_centers(f.landmarks, geometry);
    const auto maps_c = predefine_all(c.landmarks, geometry), maps_f = predefine_all(f.landmarks, geometry);
    for (std::size_t i = 0; i < aus.size(); ++i) {
      for (int k = 0; k < 2; ++k) {
        const MapCell m(geometry.map_size - 1 - a[i][1 - k].x(), a[i][1 - k].y());
        mirror_bad += (bm[i][k] - m).cwiseAbs().maxCoeff() > 1;
      }
      // Mass and peak survive mirroring exactly unless a window is clipped differently.
      const RowMatrix<double> mirrored = maps_c[i].grid.rowwise().reverse();
      mirror_bad += std::abs(mirrored.maxCoeff() - maps_f[i].grid.maxCoeff()) > 1e-12;
    }
  }
  return {crop_bad + flip_bad + mirror_bad == 0,
          "1000 samples: crop " + std::to_string(crop_bad) + ", flip " + std::to_string(flip_bad) +
              ", map mirror " + std::to_string(mirror_bad) + " violations"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& run) {
    if (!wanted(n)) return;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "CRITERION " << n << ": " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail
              << std::endl;
  };

  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);
  report(5, criterion5);
  report(6, criterion6);
  std::optional<TrainedModel> model;
  auto trained = [&]() -> TrainedModel& {
    if (!model) model = train_overfit_model();
    return *model;
  };
  report(7, [&] { return criterion7(trained()); });
  report(8, criterion8);
  report(9, criterion9);
  report(10, [&] { return criterion10(trained()); });
  report(11, criterion11);
  return failures == 0 ? 0 : 1;
}
