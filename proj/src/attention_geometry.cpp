#include "jaanet/attention_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jaanet {

const std::vector<AuCenterRule>& au_center_rules() {
  using D = OffsetDirection;
  static const std::vector<AuCenterRule> rules = {
      {1, Role::InnerBrow, D::Above, 1.0 / 2.0, true},
      {2, Role::OuterBrow, D::Above, 1.0 / 3.0, true},
      {4, Role::BrowCenter, D::Below, 1.0 / 3.0, true},
      {6, Role::EyeBottom, D::Below, 1.0, true},
      {7, Role::Eye, D::None, 0.0, true},
      {9, Role::NoseBottom, D::Above, 1.0 / 2.0, false},
      {10, Role::UpperLipCenter, D::None, 0.0, false},
      {12, Role::LipCorner, D::None, 0.0, true},
      {14, Role::LipCorner, D::None, 0.0, true},
      {15, Role::LipCorner, D::None, 0.0, true},
      {17, Role::LowerLip, D::Below, 1.0 / 2.0, false},
      {23, Role::LipCenter, D::None, 0.0, false},
      {24, Role::LipCenter, D::None, 0.0, false},
      {25, Role::LipCenter, D::None, 0.0, false},
      {26, Role::LowerLip, D::Below, 1.0 / 2.0, false},
  };
  return rules;
}

const AuCenterRule& au_center_rule(int au_id) {
  const auto& rules = au_center_rules();
  auto it = std::find_if(rules.begin(), rules.end(),
                         [&](const AuCenterRule& r) { return r.au_id == au_id; });
  if (it == rules.end())
    throw UnsupportedAuError("no center rule for AU " + std::to_string(au_id));
  return *it;
}

std::vector<AuCenters> compute_au_centers(const LandmarkSet& landmarks,
                                          const std::vector<int>& au_ids) {
  const double scale = landmarks.scale();
  if (!(scale > 0.0)) throw DegenerateGeometryError("inner eye corner distance is zero");

  std::vector<AuCenters> out;
  out.reserve(au_ids.size());
  for (int au : au_ids) {
    const AuCenterRule& rule = au_center_rule(au);
    double dy = rule.offset_multiplier * scale;
    if (rule.direction == OffsetDirection::Above) dy = -dy;
    if (rule.direction == OffsetDirection::None) dy = 0.0;

    AuCenters c{au, {}};
    for (int side = 0; side < 2; ++side) {
      c.points[side] = landmarks.anchor(rule.anchor, side);
      c.points[side].y() += dy;
    }
    out.push_back(c);
  }
  return out;
}

MapCell image_to_map_coords(const Eigen::Vector2d& point, int image_size, int map_size) {
  const double factor = static_cast<double>(map_size) / static_cast<double>(image_size);
  MapCell cell;
  for (int k = 0; k < 2; ++k) {
    const double v = std::round(point[k] * factor);
    cell[k] = static_cast<int>(std::clamp(v, 0.0, static_cast<double>(map_size - 1)));
  }
  return cell;
}

int sub_roi_side(int map_size, double ratio) {
  const double side = map_size * ratio;
  const int k = static_cast<int>(std::round((side - 1.0) / 2.0));
  return 2 * std::max(k, 0) + 1;
}

AttentionMap predefine_attention_map(const std::array<MapCell, 2>& centers, int map_size,
                                     double zeta, double xi, int au_id) {
  using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int half = sub_roi_side(map_size, zeta) / 2;
  const double denom = map_size * zeta;

  // Column and row index grids.
  const Grid xs = Eigen::RowVectorXd::LinSpaced(map_size, 0, map_size - 1)
                      .replicate(map_size, 1)
                      .array();
  const Grid ys = Eigen::VectorXd::LinSpaced(map_size, 0, map_size - 1)
                      .replicate(1, map_size)
                      .array();

  Grid weights = Grid::Zero(map_size, map_size);
  for (const MapCell& c : centers) {
    const Grid dx = (xs - c.x()).abs();
    const Grid dy = (ys - c.y()).abs();
    const auto inside = (dx <= half && dy <= half);
    const Grid decay = (1.0 - (dx + dy) * xi / denom).max(0.0);
    weights = weights.max(inside.select(decay, 0.0));
  }
  return {au_id, MapKind::Predefined, weights.matrix()};
}

std::vector<std::array<MapCell, 2>> map_centers(const LandmarkSet& landmarks,
                                                const AttentionGeometryConfig& config) {
  std::vector<std::array<MapCell, 2>> out;
  for (const AuCenters& c : compute_au_centers(landmarks, config.au_ids)) {
    out.push_back({image_to_map_coords(c.points[0], config.image_size, config.map_size),
                   image_to_map_coords(c.points[1], config.image_size, config.map_size)});
  }
  return out;
}

std::vector<AttentionMap> predefine_all(const LandmarkSet& landmarks,
                                        const AttentionGeometryConfig& config) {
  const auto centers = map_centers(landmarks, config);
  std::vector<AttentionMap> maps;
  maps.reserve(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i)
    maps.push_back(predefine_attention_map(centers[i], config.map_size, config.zeta, config.xi,
                                           config.au_ids[i]));
  return maps;
}

RowMatrix<double> resize_bilinear(const RowMatrix<double>& grid, int new_size) {
  const int n = static_cast<int>(grid.rows());
  RowMatrix<double> out(new_size, new_size);
  const double step = new_size > 1 ? static_cast<double>(n - 1) / (new_size - 1) : 0.0;
  for (int y = 0; y < new_size; ++y) {
    const double sy = y * step;
    const int y0 = std::min(static_cast<int>(sy), n - 1);
    const int y1 = std::min(y0 + 1, n - 1);
    const double fy = sy - y0;
    for (int x = 0; x < new_size; ++x) {
      const double sx = x * step;
      const int x0 = std::min(static_cast<int>(sx), n - 1);
      const int x1 = std::min(x0 + 1, n - 1);
      const double fx = sx - x0;
      out(y, x) = (1 - fy) * ((1 - fx) * grid(y0, x0) + fx * grid(y0, x1)) +
                  fy * ((1 - fx) * grid(y1, x0) + fx * grid(y1, x1));
    }
  }
  return out;
}

}  // namespace jaanet
