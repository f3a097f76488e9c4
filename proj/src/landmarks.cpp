#include "jaanet/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jaanet {

std::string to_string(Role role) {
  switch (role) {
    case Role::InnerBrow: return "inner_brow";
    case Role::OuterBrow: return "outer_brow";
    case Role::BrowCenter: return "brow_center";
    case Role::EyeBottom: return "eye_bottom";
    case Role::Eye: return "eye";
    case Role::InnerEyeCorner: return "inner_eye_corner";
    case Role::NoseBottom: return "nose_bottom";
    case Role::UpperLipCenter: return "upper_lip_center";
    case Role::LipCenter: return "lip_center";
    case Role::LipCorner: return "lip_corner";
    case Role::LowerLip: return "lower_lip";
  }
  return "unknown";
}

const AnchorPair& LandmarkLayout::anchors(Role role) const {
  auto it = roles.find(role);
  if (it == roles.end())
    throw std::invalid_argument("layout '" + name + "' has no role " + to_string(role));
  return it->second;
}

void LandmarkLayout::validate() const {
  auto check = [&](const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("layout '" + name + "': empty anchor");
    for (int i : idx)
      if (i < 0 || i >= n_points)
        throw std::invalid_argument("layout '" + name + "': index out of range");
  };
  for (const auto& [role, pair] : roles) {
    check(pair[0]);
    check(pair[1]);
  }
  check(eye_centers[0]);
  check(eye_centers[1]);
  if (static_cast<int>(flip_permutation.size()) != n_points)
    throw std::invalid_argument("layout '" + name + "': flip permutation size");
  for (int i = 0; i < n_points; ++i)
    if (flip_permutation[flip_permutation[i]] != i)
      throw std::invalid_argument("layout '" + name + "': flip permutation is not an involution");
}

LandmarkLayout LandmarkLayout::standard49() {
  LandmarkLayout layout;
  layout.name = "standard49";
  layout.n_points = 49;
  // Index convention, image left to right:
  //   0-4 left brow (outer→inner), 5-9 right brow (inner→outer)
  //   10-13 nose bridge, 14-18 nose bottom (16 center)
  //   19-24 left eye: 19 outer, 20-21 top, 22 inner, 23-24 bottom
  //   25-30 right eye: 25 inner, 26-27 top, 28 outer, 29-30 bottom
  //   31-42 outer lip: 31 left corner, 34 top center, 37 right corner, 40 bottom center
  //   43-48 inner lip: 43-45 upper (44 center), 46-48 lower (47 center)
  layout.roles = {
      {Role::InnerBrow, {{{4}, {5}}}},
      {Role::OuterBrow, {{{0}, {9}}}},
      {Role::BrowCenter, {{{2}, {7}}}},
      {Role::EyeBottom, {{{23, 24}, {29, 30}}}},
      {Role::Eye, {{{19, 20, 21, 22, 23, 24}, {25, 26, 27, 28, 29, 30}}}},
      {Role::InnerEyeCorner, {{{22}, {25}}}},
      {Role::NoseBottom, {{{16}, {16}}}},
      {Role::UpperLipCenter, {{{34}, {34}}}},
      {Role::LipCenter, {{{44, 47}, {44, 47}}}},
      {Role::LipCorner, {{{31}, {37}}}},
      {Role::LowerLip, {{{40}, {40}}}},
  };
  layout.eye_centers = {{{19, 20, 21, 22, 23, 24}, {25, 26, 27, 28, 29, 30}}};

  std::vector<int> perm(49);
  std::iota(perm.begin(), perm.end(), 0);
  auto pair = [&](int a, int b) {
    perm[a] = b;
    perm[b] = a;
  };
  for (int i = 0; i < 5; ++i) pair(i, 9 - i);
  pair(14, 18);
  pair(15, 17);
  pair(19, 28);
  pair(20, 27);
  pair(21, 26);
  pair(22, 25);
  pair(23, 30);
  pair(24, 29);
  pair(31, 37);
  pair(32, 36);
  pair(33, 35);
  pair(38, 42);
  pair(39, 41);
  pair(43, 45);
  pair(46, 48);
  layout.flip_permutation = std::move(perm);
  return layout;
}

LandmarkLayout LandmarkLayout::minimal4() {
  LandmarkLayout layout;
  layout.name = "minimal4";
  layout.n_points = 4;
  const AnchorPair eyes{{{0}, {1}}};
  const AnchorPair nose{{{2}, {2}}};
  const AnchorPair mouth{{{3}, {3}}};
  layout.roles = {
      {Role::InnerBrow, eyes},      {Role::OuterBrow, eyes},  {Role::BrowCenter, eyes},
      {Role::EyeBottom, eyes},      {Role::Eye, eyes},        {Role::InnerEyeCorner, eyes},
      {Role::NoseBottom, nose},     {Role::UpperLipCenter, mouth},
      {Role::LipCenter, mouth},     {Role::LipCorner, mouth}, {Role::LowerLip, mouth},
  };
  layout.eye_centers = eyes;
  layout.flip_permutation = {1, 0, 2, 3};
  return layout;
}

LandmarkLayout LandmarkLayout::for_points(int n_points) {
  if (n_points == 49) return standard49();
  if (n_points == 4) return minimal4();
  throw std::invalid_argument("no built-in landmark layout with " + std::to_string(n_points) +
                              " points");
}

LayoutPtr builtin_layout(int n_points) {
  static const LayoutPtr standard = std::make_shared<const LandmarkLayout>(LandmarkLayout::standard49());
  static const LayoutPtr minimal = std::make_shared<const LandmarkLayout>(LandmarkLayout::minimal4());
  if (n_points == 49) return standard;
  if (n_points == 4) return minimal;
  return std::make_shared<const LandmarkLayout>(LandmarkLayout::for_points(n_points));
}

LandmarkSet::LandmarkSet(LandmarkMatrix points, LayoutPtr layout)
    : points_(std::move(points)), layout_(std::move(layout)) {
  if (layout_ == nullptr) throw std::invalid_argument("LandmarkSet requires a layout");
}

LandmarkSet LandmarkSet::from_interleaved(const Eigen::Ref<const Eigen::VectorXd>& xy,
                                          LayoutPtr layout) {
  if (xy.size() % 2 != 0) throw std::invalid_argument("odd landmark coordinate count");
  LandmarkMatrix pts(xy.size() / 2, 2);
  for (Eigen::Index j = 0; j < pts.rows(); ++j) pts.row(j) << xy[2 * j], xy[2 * j + 1];
  return LandmarkSet(std::move(pts), std::move(layout));
}

Eigen::VectorXd LandmarkSet::interleaved() const {
  return Eigen::Map<const Eigen::VectorXd>(points_.data(), points_.size());
}

Eigen::Vector2d LandmarkSet::centroid(const std::vector<int>& indices) const {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int i : indices) sum += points_.row(i).transpose();
  return sum / static_cast<double>(indices.size());
}

Eigen::Vector2d LandmarkSet::anchor(Role role, int side) const {
  return centroid(layout_->anchors(role)[side]);
}

Eigen::Vector2d LandmarkSet::eye_center(int side) const {
  return centroid(layout_->eye_centers[side]);
}

double LandmarkSet::inter_ocular_distance() const {
  return (eye_center(1) - eye_center(0)).norm();
}

double LandmarkSet::scale() const {
  return (anchor(Role::InnerEyeCorner, 1) - anchor(Role::InnerEyeCorner, 0)).norm();
}

void LandmarkSet::validate() const {
  if (size() != layout_->n_points)
    throw std::invalid_argument("expected " + std::to_string(layout_->n_points) +
                                " landmarks, got " + std::to_string(size()));
  if (!points_.allFinite()) throw std::invalid_argument("non-finite landmark coordinate");
  if (!(inter_ocular_distance() > 0.0))
    throw DegenerateGeometryError("inter-ocular distance is zero");
  if (!(scale() > 0.0)) throw DegenerateGeometryError("inner eye corner distance is zero");
}

LandmarkMatrix canonical_landmarks(const LandmarkLayout& layout, double frame_size) {
  LandmarkMatrix pts;
  if (layout.n_points == 49) {
    pts.resize(49, 2);
    pts << 52, 52, 60, 47, 70, 45, 80, 47, 88, 52,                  // left brow
        112, 52, 120, 47, 130, 45, 140, 47, 148, 52,                 // right brow
        100, 72, 100, 82, 100, 92, 100, 102,                         // nose bridge
        88, 110, 94, 112, 100, 114, 106, 112, 112, 110,              // nose bottom
        58, 70, 64, 66, 76, 66, 82, 70, 76, 74, 64, 74,              // left eye
        118, 70, 124, 66, 136, 66, 142, 70, 136, 74, 124, 74,        // right eye
        80, 140, 87, 135, 94, 132, 100, 133, 106, 132, 113, 135,     // upper outer lip
        120, 140, 113, 146, 106, 149, 100, 150, 94, 149, 87, 146,    // lower outer lip
        90, 139, 100, 138, 110, 139, 110, 142, 100, 143, 90, 142;    // inner lip
  } else if (layout.n_points == 4) {
    pts.resize(4, 2);
    pts << 70, 70, 130, 70, 100, 114, 100, 140.5;
  } else {
    throw std::invalid_argument("no canonical template for layout '" + layout.name + "'");
  }
  return pts * (frame_size / 200.0);
}

LandmarkMatrix canonical_input_landmarks(const LandmarkLayout& layout, int image_size) {
  LandmarkMatrix pts = canonical_landmarks(layout).array() - 12.0;
  return pts * (image_size / 176.0);
}

}  // namespace jaanet
