#include "jaanet/network.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace jaanet {

void JaaNetConfig::validate() const {
  if (l < 32 || l % 16 != 0) throw std::invalid_argument("l must be a multiple of 16, at least 32");
  if (c <= 0 || d <= 0 || d_l <= 0 || n_au <= 0 || n_align <= 0)
    throw std::invalid_argument("network widths and counts must be positive");
  if (static_cast<int>(au_ids.size()) != n_au)
    throw std::invalid_argument("au_ids has " + std::to_string(au_ids.size()) +
                                " entries but n_au is " + std::to_string(n_au));
  if (!(zeta > 0 && zeta < 1)) throw std::invalid_argument("zeta must lie in (0, 1)");
  if (xi < 0) throw std::invalid_argument("xi must be non-negative");
  if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  if (lambda_align < 0) throw std::invalid_argument("lambda_align must be non-negative");
  for (int au : au_ids) au_center_rule(au);
}

JaaNetConfig JaaNetConfig::miniature(int l, int c, std::vector<int> au_ids, int n_align) {
  JaaNetConfig cfg;
  cfg.l = l;
  cfg.c = c;
  cfg.d = 16;
  cfg.d_l = 8;
  cfg.n_au = static_cast<int>(au_ids.size());
  cfg.au_ids = std::move(au_ids);
  cfg.n_align = n_align;
  cfg.validate();
  return cfg;
}

namespace {

constexpr std::array<std::pair<Variant, const char*>, 9> kVariantNames = {{
    {Variant::JAA, "JAA"},
    {Variant::JAA_BE, "JAA_BE"},
    {Variant::JAA_BE_Er, "JAA_BE_Er"},
    {Variant::JA, "JA"},
    {Variant::J, "J"},
    {Variant::HDW, "HDW"},
    {Variant::HD, "HD"},
    {Variant::H, "H"},
    {Variant::R, "R"},
}};

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [value, name] : kVariantNames)
    if (value == v) return name;
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [value, label] : kVariantNames)
    if (name == label) return value;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

void Architecture::validate() const {
  if (bp_enhancement < 1) throw std::invalid_argument("bp_enhancement must be at least 1");
  if (local_features && !face_alignment)
    throw std::invalid_argument("local features need the face alignment module");
  if (local_heads && !local_features) throw std::invalid_argument("local heads need local features");
  if (refinement_constraint && !refine_attention)
    throw std::invalid_argument("refinement constraint needs attention refinement");
}

Architecture Architecture::for_variant(Variant v) {
  Architecture a;
  switch (v) {
    case Variant::JAA:
      return a;
    case Variant::JAA_BE_Er:
      a.refinement_constraint = true;
      [[fallthrough]];
    case Variant::JAA_BE:
      a.local_heads = false;
      a.gradient_barrier = false;
      a.bp_enhancement = 2.0;
      return a;
    case Variant::JA:
      a.refine_attention = false;
      a.local_heads = false;
      return a;
    case Variant::J:
      a.local_features = false;
      a.refine_attention = false;
      a.local_heads = false;
      return a;
    case Variant::R:
    case Variant::H:
    case Variant::HD:
    case Variant::HDW:
      a.face_alignment = false;
      a.integrate = false;
      a.local_features = false;
      a.refine_attention = false;
      a.local_heads = false;
      a.trunk = v == Variant::R ? BlockKind::Region : BlockKind::HmRegion;
      a.dice = v == Variant::HD || v == Variant::HDW;
      a.weighted = v == Variant::HDW;
      return a;
  }
  return a;
}

std::string parameter_group(const std::string& name) {
  const auto first = name.find('.');
  const std::string head = name.substr(0, first);
  if (head == "refine" || head == "local") {
    const auto second = name.find('.', first + 1);
    return name.substr(0, second);
  }
  return head;
}

bool depends_on_au_count(const std::string& name) {
  return name.rfind("refine.", 0) == 0 || name.rfind("local.", 0) == 0 ||
         name.rfind("au_head.fc2.", 0) == 0;
}

}  // namespace jaanet
