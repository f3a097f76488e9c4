#pragma once

#include "jaanet/network.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace jaanet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const JaaNetConfig& config);
JaaNetConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

/// File layout (little endian):
///   8 bytes  "JAANETCK"
///   u32      format version
///   u64      length of the JSON header, then the header (config, architecture,
///            variant name, layout name)
///   u64      number of arrays, then per array: u32 name length, name,
///            u64 element count, float64 elements
/// Arrays hold every parameter and batch-norm statistic by name.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  JaaNetConfig config;
  Architecture architecture;
  std::string variant;
  nlohmann::json extra = nlohmann::json::object();
  std::map<std::string, Eigen::VectorXd> arrays;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
Checkpoint make_checkpoint(JaaNet<Scalar>& model, const std::string& variant) {
  Checkpoint ck;
  ck.config = model.config();
  ck.architecture = model.architecture();
  ck.variant = variant;
  for (auto& p : model.parameters()) ck.arrays[p.name] = p.param->value.template cast<double>();
  for (auto& b : model.buffers()) ck.arrays[b.name] = b.buffer->template cast<double>();
  return ck;
}

/// Copies every parameter and buffer; the checkpoint must match the model exactly.
template <typename Scalar>
void load_weights(JaaNet<Scalar>& model, const Checkpoint& ck) {
  auto take = [&](const std::string& name, Vector<Scalar>& dst) {
    auto it = ck.arrays.find(name);
    if (it == ck.arrays.end()) throw CheckpointError("checkpoint lacks '" + name + "'");
    if (it->second.size() != dst.size())
      throw CheckpointError("size mismatch for '" + name + "'");
    dst = it->second.cast<Scalar>();
  };
  for (auto& p : model.parameters()) take(p.name, p.param->value);
  for (auto& b : model.buffers()) take(b.name, *b.buffer);
}

struct TransferReport {
  std::vector<std::string> copied;
  std::vector<std::string> fresh;
};

/// Initializes from a model trained on another AU set: everything whose
/// shape and meaning carry over is copied, AU-count-dependent parameters keep
/// their fresh initialization when the AU sets differ.
template <typename Scalar>
TransferReport transfer_init(JaaNet<Scalar>& model, const Checkpoint& source) {
  TransferReport report;
  const bool same_aus = source.config.au_ids == model.config().au_ids;
  auto visit = [&](const std::string& name, Vector<Scalar>& dst, bool is_param) {
    const bool au_bound = depends_on_au_count(name);
    auto it = source.arrays.find(name);
    if (au_bound && !same_aus) {
      if (is_param) report.fresh.push_back(name);
      return;
    }
    if (it == source.arrays.end() || it->second.size() != dst.size())
      throw CheckpointError("shape mismatch for shared parameter '" + name + "'");
    dst = it->second.cast<Scalar>();
    if (is_param) report.copied.push_back(name);
  };
  for (auto& p : model.parameters()) visit(p.name, p.param->value, true);
  for (auto& b : model.buffers()) visit(b.name, *b.buffer, false);
  return report;
}

}  // namespace jaanet
