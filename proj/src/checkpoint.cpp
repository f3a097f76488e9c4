#include "jaanet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace jaanet {

namespace fs = std::filesystem;

nlohmann::json to_json(const JaaNetConfig& c) {
  return {{"l", c.l},         {"c", c.c},         {"d", c.d},
          {"d_l", c.d_l},     {"n_au", c.n_au},   {"n_align", c.n_align},
          {"zeta", c.zeta},   {"xi", c.xi},       {"epsilon", c.epsilon},
          {"lambda_align", c.lambda_align},       {"au_ids", c.au_ids}};
}

JaaNetConfig network_config_from_json(const nlohmann::json& j) {
  JaaNetConfig c;
  c.l = j.at("l");
  c.c = j.at("c");
  c.d = j.at("d");
  c.d_l = j.at("d_l");
  c.n_au = j.at("n_au");
  c.n_align = j.at("n_align");
  c.zeta = j.at("zeta");
  c.xi = j.at("xi");
  c.epsilon = j.at("epsilon");
  c.lambda_align = j.at("lambda_align");
  c.au_ids = j.at("au_ids").get<std::vector<int>>();
  c.validate();
  return c;
}

nlohmann::json to_json(const Architecture& a) {
  return {{"trunk", a.trunk == BlockKind::Region ? "R" : "R_hm"},
          {"face_alignment", a.face_alignment},
          {"integrate", a.integrate},
          {"global_feature", a.global_feature},
          {"local_features", a.local_features},
          {"refine_attention", a.refine_attention},
          {"local_heads", a.local_heads},
          {"gradient_barrier", a.gradient_barrier},
          {"bp_enhancement", a.bp_enhancement},
          {"dice", a.dice},
          {"weighted", a.weighted},
          {"refinement_constraint", a.refinement_constraint}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  a.trunk = j.at("trunk") == "R" ? BlockKind::Region : BlockKind::HmRegion;
  a.face_alignment = j.at("face_alignment");
  a.integrate = j.at("integrate");
  a.global_feature = j.at("global_feature");
  a.local_features = j.at("local_features");
  a.refine_attention = j.at("refine_attention");
  a.local_heads = j.at("local_heads");
  a.gradient_barrier = j.at("gradient_barrier");
  a.bp_enhancement = j.at("bp_enhancement");
  a.dice = j.at("dice");
  a.weighted = j.at("weighted");
  a.refinement_constraint = j.at("refinement_constraint");
  a.validate();
  return a;
}

namespace {

constexpr char kMagic[8] = {'J', 'A', 'A', 'N', 'E', 'T', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw CheckpointError("truncated checkpoint");
  return value;
}

std::string get_string(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 30)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(const fs::path& path, const Checkpoint& ck) {
  nlohmann::json header = {{"config", to_json(ck.config)},
                           {"architecture", to_json(ck.architecture)},
                           {"variant", ck.variant},
                           {"extra", ck.extra}};
  const std::string text = header.dump();
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, Checkpoint::kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(out, ck.arrays.size());
    for (const auto& [name, values] : ck.arrays) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(values.size()));
      out.write(reinterpret_cast<const char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != Checkpoint::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<std::uint64_t>(in);
  const nlohmann::json header = nlohmann::json::parse(get_string(in, header_len));
  Checkpoint ck;
  ck.config = network_config_from_json(header.at("config"));
  ck.architecture = architecture_from_json(header.at("architecture"));
  ck.variant = header.at("variant");
  ck.extra = header.value("extra", nlohmann::json::object());
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name = get_string(in, name_len);
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw CheckpointError("implausible array size in checkpoint");
    Eigen::VectorXd values(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint");
    ck.arrays.emplace(std::move(name), std::move(values));
  }
  return ck;
}

}  // namespace jaanet
