#pragma once

#include "jaanet/landmarks.hpp"
#include "jaanet/tensor.hpp"

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace jaanet {

class UnsupportedAuError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OffsetDirection { None, Above, Below };

/// Where an AU's two centers sit relative to a landmark role, as a fraction
/// of the inner-eye-corner distance.
struct AuCenterRule {
  int au_id = 0;
  Role anchor = Role::Eye;
  OffsetDirection direction = OffsetDirection::None;
  double offset_multiplier = 0.0;
  bool bilateral = true;
};

/// Rule for au_id; throws UnsupportedAuError for AUs without a definition.
const AuCenterRule& au_center_rule(int au_id);
const std::vector<AuCenterRule>& au_center_rules();

struct AuCenters {
  int au_id = 0;
  std::array<Eigen::Vector2d, 2> points;
};

/// Two image-scale centers per requested AU. The face must be aligned with its
/// eye centers on one horizontal line; offsets are purely vertical.
std::vector<AuCenters> compute_au_centers(const LandmarkSet& landmarks,
                                          const std::vector<int>& au_ids);

using MapCell = Eigen::Vector2i;  // (x, y) grid index

/// Scale an image-space point to a map of side map_size, rounding to the
/// nearest cell and clamping into the grid.
MapCell image_to_map_coords(const Eigen::Vector2d& point, int image_size, int map_size);

/// Side of a square sub-ROI: map_size·ratio rounded to the nearest odd integer.
int sub_roi_side(int map_size, double ratio);

enum class MapKind { Predefined, Refined };

struct AttentionMap {
  int au_id = 0;
  MapKind kind = MapKind::Predefined;
  RowMatrix<double> grid;  // grid(y, x)

  int size() const { return static_cast<int>(grid.rows()); }
};

/// Two square sub-ROIs around the centers; inside each, the weight decays
/// linearly in Manhattan distance, max{1 - d·ξ/(l_a·ζ), 0}; zero elsewhere;
/// overlaps take the larger weight.
AttentionMap predefine_attention_map(const std::array<MapCell, 2>& centers, int map_size,
                                     double zeta, double xi, int au_id = 0);

struct AttentionGeometryConfig {
  int image_size = 176;  // l
  int map_size = 52;     // l/4 + 8
  double zeta = 0.14;
  double xi = 0.56;
  std::vector<int> au_ids;

  static AttentionGeometryConfig for_image(int image_size, std::vector<int> au_ids,
                                           double zeta = 0.14, double xi = 0.56) {
    return {image_size, image_size / 4 + 8, zeta, xi, std::move(au_ids)};
  }
};

std::vector<std::array<MapCell, 2>> map_centers(const LandmarkSet& landmarks,
                                                const AttentionGeometryConfig& config);

/// One predefined map per configured AU.
std::vector<AttentionMap> predefine_all(const LandmarkSet& landmarks,
                                        const AttentionGeometryConfig& config);

/// Bilinear resampling of a square grid to a new side, with corner-aligned
/// sample positions (the first and last cells map onto each other).
RowMatrix<double> resize_bilinear(const RowMatrix<double>& grid, int new_size);

}  // namespace jaanet
