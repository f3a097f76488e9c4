#pragma once

#include "jaanet/data_pipeline.hpp"
#include "jaanet/network.hpp"
#include "jaanet/training.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace jaanet {

/// A bad or unknown configuration key; the message names the key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct DataConfig {
  std::string manifest;     // empty: use a generated corpus
  int aligned_size = 200;
  bool align = true;
  int n_folds = 3;
  int test_fold = -1;       // -1: train on everything
};

struct EvalConfig {
  double threshold = 0.5;
  int batch_size = 32;
};

/// Everything a command needs. au_ids live under [network]; the synthetic
/// generator uses the same list.
struct RunConfig {
  JaaNetConfig network;
  TrainConfig train;
  DataConfig data;
  SyntheticConfig synthetic;
  int synthetic_samples = 64;
  EvalConfig eval;

  /// Keeps derived fields (n_au, synthetic AU list) consistent and validates.
  void finalize();
};

/// Flat INI with [network], [train], [data], [synthetic] and [eval] sections.
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "section.key=value". Throws ConfigError for unknown keys or bad values.
void apply_override(RunConfig& config, const std::string& assignment);
void set_value(RunConfig& config, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

/// INI text that load_run_config reads back to the same configuration.
std::string to_ini(const RunConfig& config);

}  // namespace jaanet
