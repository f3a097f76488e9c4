#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace jaanet {

class DegenerateGeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Semantic landmark roles referenced by the AU center rules.
enum class Role {
  InnerBrow,
  OuterBrow,
  BrowCenter,
  EyeBottom,
  Eye,
  InnerEyeCorner,
  NoseBottom,
  UpperLipCenter,
  LipCenter,
  LipCorner,
  LowerLip,
};

std::string to_string(Role role);

/// A role resolves to two anchors (image-left, image-right). Each anchor is the
/// centroid of a set of landmark indices. Central roles use the same set twice.
using AnchorPair = std::array<std::vector<int>, 2>;

/// Index conventions of a landmark scheme: role anchors, eye centers for the
/// inter-ocular distance, and the left/right permutation applied on a
/// horizontal flip.
struct LandmarkLayout {
  std::string name;
  int n_points = 0;
  std::map<Role, AnchorPair> roles;
  AnchorPair eye_centers;
  std::vector<int> flip_permutation;

  const AnchorPair& anchors(Role role) const;
  void validate() const;

  /// The 49-point layout (brows 0-9, nose 10-18, eyes 19-30, mouth 31-48).
  static LandmarkLayout standard49();
  /// Four points: left eye, right eye, nose tip, mouth center. Used by
  /// miniature configurations in tests.
  static LandmarkLayout minimal4();
  static LandmarkLayout for_points(int n_points);
};

using LayoutPtr = std::shared_ptr<const LandmarkLayout>;

/// Shared immutable instance of a built-in layout.
LayoutPtr builtin_layout(int n_points);

/// n × 2 landmark coordinates (x, y) in pixels.
using LandmarkMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

class LandmarkSet {
 public:
  LandmarkSet() = default;
  LandmarkSet(LandmarkMatrix points, LayoutPtr layout);

  /// From 2n interleaved reals x1 y1 x2 y2 ...
  static LandmarkSet from_interleaved(const Eigen::Ref<const Eigen::VectorXd>& xy,
                                      LayoutPtr layout);
  Eigen::VectorXd interleaved() const;

  const LandmarkMatrix& points() const { return points_; }
  LandmarkMatrix& points() { return points_; }
  const LandmarkLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  int size() const { return static_cast<int>(points_.rows()); }

  Eigen::Vector2d centroid(const std::vector<int>& indices) const;
  Eigen::Vector2d anchor(Role role, int side) const;
  Eigen::Vector2d eye_center(int side) const;

  /// Distance between the two eye centers.
  double inter_ocular_distance() const;
  /// Distance between the two inner eye corners ("scale" of the AU rules).
  double scale() const;

  /// Throws if the point count, finiteness, or distance invariants fail.
  void validate() const;

 private:
  LandmarkMatrix points_;
  LayoutPtr layout_ = nullptr;
};

/// Mean frontal face in the aligned frame: 200×200 with eye centers at
/// (70, 70) and (130, 70), rescaled to an aligned frame of side frame_size.
LandmarkMatrix canonical_landmarks(const LandmarkLayout& layout, double frame_size = 200.0);

/// The canonical face after the centered 176/200 crop, rescaled to an
/// image_size × image_size network input.
LandmarkMatrix canonical_input_landmarks(const LandmarkLayout& layout, int image_size);

}  // namespace jaanet
