#include "jaanet/checkpoint.hpp"
#include "jaanet/config.hpp"
#include "jaanet/evaluation.hpp"
#include "jaanet/region_layers.hpp"
#include "jaanet/training.hpp"
#include "jaanet/visualize.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace jaanet;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
};

void add_common(CLI::App* app, CommonOptions& opts) {
  app->add_option("--config", opts.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", opts.overrides, "override, section.key=value (repeatable)");
  app->add_option("--out", opts.out, "output directory (default: $JAANET_OUT)");
  app->add_option("--seed", opts.seed, "overrides train.seed");
  app->add_option("--variant", opts.variant, "overrides train.variant");
}

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig config = opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
  for (const auto& o : opts.overrides) apply_override(config, o);
  if (opts.seed) set_value(config, "train.seed", std::to_string(*opts.seed));
  if (!opts.variant.empty()) set_value(config, "train.variant", opts.variant);
  config.finalize();
  return config;
}

fs::path resolve_out(const CommonOptions& opts) {
  if (!opts.out.empty()) return opts.out;
  if (const char* env = std::getenv("JAANET_OUT"); env && *env) return env;
  throw ConfigError("--out", "no output directory: pass --out or set JAANET_OUT");
}

/// Creates the output directory and writes the configuration snapshot plus
/// the command-specific arguments before anything else happens.
fs::path prepare_out(const CommonOptions& opts, const RunConfig& config,
                     const nlohmann::json& command) {
  const fs::path out = resolve_out(opts);
  fs::create_directories(out);
  std::ofstream(out / "config.ini") << to_ini(config);
  std::ofstream(out / "command.json") << command.dump(2) << "\n";
  return out;
}

/// Generated data draws from independent streams for training and testing.
SyntheticCorpus synthetic_corpus(const RunConfig& config, bool test) {
  Rng rng(config.train.seed * 2 + (test ? 1 : 0));
  return generate_synthetic(config.synthetic, rng, config.synthetic_samples);
}

/// Aligned frames for the requested split. With a manifest and test_fold ≥ 0
/// the split follows subject-exclusive folds; otherwise every record is used.
std::vector<Sample> dataset(const RunConfig& config, bool test, Eigen::VectorXd* rates = nullptr) {
  if (config.data.manifest.empty()) {
    const SyntheticCorpus corpus = synthetic_corpus(config, test);
    if (rates) *rates = corpus.manifest.occurrence_rates();
    return corpus_samples(corpus, config.data.aligned_size, config.data.align);
  }
  const fs::path path = config.data.manifest;
  Manifest manifest = load_manifest(path);
  if (manifest.au_ids != config.network.au_ids)
    throw ConfigError("network.au_ids", "network.au_ids does not match the manifest header");
  if (config.data.test_fold >= 0) {
    const auto folds = subject_folds(manifest, config.data.n_folds);
    std::vector<std::size_t> pick;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if ((static_cast<int>(f) == config.data.test_fold) == test)
        pick.insert(pick.end(), folds[f].begin(), folds[f].end());
    manifest = manifest.subset(pick);
  }
  if (rates) *rates = manifest.occurrence_rates();
  return load_samples(manifest, path.parent_path(), config.data.aligned_size, config.data.align);
}

JaaNet<float> model_from_checkpoint(const fs::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  JaaNet<float> model(ck.config, ck.architecture);
  load_weights(model, ck);
  return model;
}

int cmd_gen_synthetic(const CommonOptions& opts, int n) {
  RunConfig config = resolve_config(opts);
  config.synthetic_samples = n;
  const fs::path out = prepare_out(opts, config, {{"command", "gen-synthetic"}, {"n", n}});
  write_corpus(out, synthetic_corpus(config, false));
  std::cout << "wrote " << n << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& opts, const std::string& init_from) {
  const RunConfig config = resolve_config(opts);
  const fs::path out = prepare_out(opts, config, {{"command", "train"}, {"init_from", init_from}});
  Eigen::VectorXd rates;
  const std::vector<Sample> train_set = dataset(config, false, &rates);
  std::vector<Sample> eval_set;
  if (config.data.manifest.empty() || config.data.test_fold >= 0)
    eval_set = dataset(config, true);

  JaaNet<float> model(config.network, Architecture::for_variant(config.train.variant),
                      config.train.seed);
  if (!init_from.empty()) {
    const TransferReport report = transfer_init(model, read_checkpoint(init_from));
    std::cout << "initialized " << report.copied.size() << " arrays from " << init_from << ", "
              << report.fresh.size() << " left fresh\n";
  }
  TrainOptions options;
  options.run_dir = out;
  options.eval_set = eval_set.empty() ? nullptr : &eval_set;
  options.log = &std::cout;
  options.config_snapshot = {{"ini", to_ini(config)}};
  const TrainResult result = train(model, train_set, au_weights(rates), config.train, options);
  if (result.final_checkpoint) std::cout << "checkpoint " << result.final_checkpoint->string() << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint) {
  const RunConfig config = resolve_config(opts);
  const fs::path out = prepare_out(opts, config, {{"command", "eval"}, {"checkpoint", checkpoint}});
  JaaNet<float> model = model_from_checkpoint(checkpoint);
  const auto samples = center_crops(dataset(config, true), model.config().l);
  const EvalMetrics m = evaluate(model, samples, config.eval.threshold, config.eval.batch_size);
  nlohmann::json j = {{"au_ids", model.config().au_ids},
                      {"f1", m.f1.per_au},
                      {"f1_avg", m.f1.average},
                      {"accuracy", m.accuracy.per_au},
                      {"accuracy_avg", m.accuracy.average},
                      {"frames", samples.size()}};
  if (model.architecture().face_alignment) {
    j["mean_error"] = m.mean_error;
    j["failure_rate"] = m.failure_rate;
  }
  std::ofstream(out / "metrics.json") << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_occlusion(const CommonOptions& opts, const std::string& checkpoint) {
  const RunConfig config = resolve_config(opts);
  const fs::path out =
      prepare_out(opts, config, {{"command", "occlusion-eval"}, {"checkpoint", checkpoint}});
  JaaNet<float> model = model_from_checkpoint(checkpoint);
  const auto samples = center_crops(dataset(config, true), model.config().l);
  const AuPredictor predictor = [&](const std::vector<Sample>& batch) {
    return predict(model, batch, config.eval.batch_size).au_probs;
  };
  const OcclusionTable table =
      occlusion_sweep(predictor, samples, model.config().au_ids, config.eval.threshold);
  std::ofstream(out / "occlusion.json") << table.to_json().dump(2) << "\n";
  std::ofstream(out / "occlusion.txt") << table.to_text();
  std::cout << table.to_text();
  return 0;
}

int cmd_visualize(const CommonOptions& opts, const std::string& checkpoint, int n_images) {
  const RunConfig config = resolve_config(opts);
  const fs::path out = prepare_out(
      opts, config,
      {{"command", "visualize-attention"}, {"checkpoint", checkpoint}, {"n", n_images}});
  JaaNet<float> model = model_from_checkpoint(checkpoint);
  model.set_training(false);
  auto samples = center_crops(dataset(config, true), model.config().l);
  if (static_cast<int>(samples.size()) > n_images) samples.resize(static_cast<std::size_t>(n_images));
  fs::create_directories(out / "overlays");
  fs::create_directories(out / "maps");

  const auto& ids = model.config().au_ids;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Image& image = samples[s].image;
    const ModelOutputs<float> outputs = model.forward(to_network_input<float>({&image}));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto emit = [&](const std::string& kind, const std::vector<Tensor<float>>& maps) {
        if (maps.empty()) return;
        const RowMatrix<double> grid = maps[i].plane(0, 0).cast<double>();
        std::ostringstream stem;
        stem << "img" << std::setw(4) << std::setfill('0') << s << "_au" << ids[i] << "_" << kind;
        write_ppm(out / "overlays" / (stem.str() + ".ppm"), overlay_attention(image, grid));
        write_map_text(out / "maps" / (stem.str() + ".txt"), grid);
      };
      emit("predefined", outputs.predefined_maps);
      emit("refined", outputs.refined_maps);
    }
  }
  std::cout << "wrote overlays for " << samples.size() << " images to " << out.string() << "\n";
  return 0;
}

int cmd_count_params(int c) {
  if (c <= 0) throw ConfigError("--c", "--c must be positive");
  // Spatial extent does not enter the count; 8×8 is the smallest valid size.
  RegionLayer<float> r(4 * c, c);
  HmRegionLayer<float> hm(4 * c, c);
  const LayerSpec r_spec{BlockKind::Region, 8, 8, c, 4 * c};
  const LayerSpec hm_spec{BlockKind::HmRegion, 8, 8, c, 4 * c};
  std::cout << "R: " << r.parameter_count() << "\n" << "R_hm: " << hm.parameter_count() << "\n";
  if (r.parameter_count() != count_params(r_spec) || hm.parameter_count() != count_params(hm_spec)) {
    std::cerr << "constructed layers disagree with the closed forms\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint AU detection and face alignment"};
  app.require_subcommand(1);

  CommonOptions opts;
  int n_samples = 64, n_images = 4, channels = 8;
  std::string checkpoint, init_from;

  auto* gen = app.add_subcommand("gen-synthetic", "write a procedural corpus");
  add_common(gen, opts);
  gen->add_option("--n", n_samples, "number of samples");

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, opts);
  tr->add_option("--init-from", init_from, "checkpoint to initialize shared layers from")
      ->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "F1, accuracy and landmark error of a checkpoint");
  add_common(ev, opts);
  ev->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* occ = app.add_subcommand("occlusion-eval", "F1 with half of the face occluded");
  add_common(occ, opts);
  occ->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* vis = app.add_subcommand("visualize-attention", "overlay predefined and refined maps");
  add_common(vis, opts);
  vis->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  vis->add_option("--n", n_images, "number of images");

  auto* cnt = app.add_subcommand("count-params", "region-layer parameter counts");
  cnt->add_option("--c", channels, "c1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_synthetic(opts, n_samples);
    if (*tr) return cmd_train(opts, init_from);
    if (*ev) return cmd_eval(opts, checkpoint);
    if (*occ) return cmd_occlusion(opts, checkpoint);
    if (*vis) return cmd_visualize(opts, checkpoint, n_images);
    if (*cnt) return cmd_count_params(channels);
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
