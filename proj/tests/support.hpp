#pragma once

#include "jaanet/attention_geometry.hpp"
#include "jaanet/landmarks.hpp"
#include "jaanet/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>

namespace jaanet::testing {

/// Canonical input-frame face with every point moved by uniform noise, then
/// scaled and shifted as a whole. Eye centers stay roughly horizontal.
inline LandmarkSet random_face(Rng& rng, int image_size, double noise = 2.0,
                               const LayoutPtr& layout = builtin_layout(49)) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LandmarkMatrix pts = canonical_input_landmarks(*layout, image_size);
  const double s = 1.0 + 0.08 * u(rng);
  const Eigen::Vector2d shift(0.05 * image_size * u(rng), 0.05 * image_size * u(rng));
  const Eigen::Vector2d mid(image_size / 2.0, image_size / 2.0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Eigen::Vector2d p = pts.row(i).transpose();
    p = mid + s * (p - mid) + shift + noise * Eigen::Vector2d(u(rng), u(rng));
    pts.row(i) = p.transpose();
  }
  return LandmarkSet(pts, layout);
}

/// AU center rules restated independently of the library: anchor role, signed
/// vertical offset in units of the inner-eye-corner distance (negative is up).
struct OracleRule {
  Role anchor;
  double offset;
};

inline const std::map<int, OracleRule>& oracle_rules() {
  static const std::map<int, OracleRule> rules = {
      {1, {Role::InnerBrow, -1.0 / 2.0}},  {2, {Role::OuterBrow, -1.0 / 3.0}},
      {4, {Role::BrowCenter, 1.0 / 3.0}},  {6, {Role::EyeBottom, 1.0}},
      {7, {Role::Eye, 0.0}},               {9, {Role::NoseBottom, -1.0 / 2.0}},
      {10, {Role::UpperLipCenter, 0.0}},   {12, {Role::LipCorner, 0.0}},
      {14, {Role::LipCorner, 0.0}},        {15, {Role::LipCorner, 0.0}},
      {17, {Role::LowerLip, 1.0 / 2.0}},   {23, {Role::LipCenter, 0.0}},
      {24, {Role::LipCenter, 0.0}},        {25, {Role::LipCenter, 0.0}},
      {26, {Role::LowerLip, 1.0 / 2.0}},
  };
  return rules;
}

inline Eigen::Vector2d oracle_centroid(const LandmarkSet& s, const std::vector<int>& idx) {
  double x = 0, y = 0;
  for (int i : idx) {
    x += s.points()(i, 0);
    y += s.points()(i, 1);
  }
  return {x / static_cast<double>(idx.size()), y / static_cast<double>(idx.size())};
}

/// Per-cell brute force of one predefined map: nearest-cell centers, an odd
/// square window per center, linear Manhattan decay, max over windows.
inline RowMatrix<double> oracle_map(const LandmarkSet& s, int au_id, int image_size, int map_size,
                                    double zeta, double xi) {
  const OracleRule rule = oracle_rules().at(au_id);
  const auto& inner = s.layout().anchors(Role::InnerEyeCorner);
  const double scale = (oracle_centroid(s, inner[1]) - oracle_centroid(s, inner[0])).norm();
  const auto& anchors = s.layout().anchors(rule.anchor);

  int cx[2], cy[2];
  for (int side = 0; side < 2; ++side) {
    Eigen::Vector2d p = oracle_centroid(s, anchors[side]);
    p.y() += rule.offset * scale;
    const double f = static_cast<double>(map_size) / image_size;
    auto cell = [&](double v) {
      long r = std::lround(v * f);
      return static_cast<int>(std::clamp<long>(r, 0, map_size - 1));
    };
    cx[side] = cell(p.x());
    cy[side] = cell(p.y());
  }
  // Odd window side nearest to map_size·ζ, ties going up.
  int side_len = 1;
  for (int k = 1; k <= map_size; k += 2)
    if (std::abs(k - map_size * zeta) <= std::abs(side_len - map_size * zeta)) side_len = k;
  const int half = side_len / 2;
  const double denom = map_size * zeta;

  RowMatrix<double> grid = RowMatrix<double>::Zero(map_size, map_size);
  for (int y = 0; y < map_size; ++y)
    for (int x = 0; x < map_size; ++x)
      for (int c = 0; c < 2; ++c) {
        const int dx = std::abs(x - cx[c]), dy = std::abs(y - cy[c]);
        if (dx > half || dy > half) continue;
        const double v = std::max(1.0 - static_cast<double>(dx + dy) * xi / denom, 0.0);
        grid(y, x) = std::max(grid(y, x), v);
      }
  return grid;
}

/// Relative error with an absolute floor so exact zeros compare cleanly.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central finite difference of f with respect to the variable x.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double plus = f();
  x = saved - h;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2 * h);
}

}  // namespace jaanet::testing
