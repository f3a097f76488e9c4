#pragma once

#include "jaanet/landmarks.hpp"
#include "jaanet/layers.hpp"
#include "jaanet/tensor.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace jaanet {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Three-channel image, channel-major, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  Eigen::ArrayXf data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(Eigen::ArrayXf::Constant(3 * h * w, fill)) {}

  float& at(int c, int y, int x) { return data[(c * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(c * height + y) * width + x]; }
  Eigen::Map<RowMatrix<float>> channel(int c) { return {data.data() + c * height * width, height, width}; }
  Eigen::Map<const RowMatrix<float>> channel(int c) const {
    return {data.data() + c * height * width, height, width};
  }
  bool operator==(const Image& o) const {
    return height == o.height && width == o.width && (data == o.data).all();
  }
};

/// Binary PPM (P6), 8 bits per channel.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit level, so writing and reading
/// back is lossless.
void quantize(Image& image);

struct Sample {
  Image image;
  Eigen::VectorXi au_labels;
  LandmarkSet landmarks;
  std::string subject_id;
};

struct ManifestRecord {
  std::string image_path;
  Eigen::VectorXi labels;
  Eigen::VectorXd landmarks;  // interleaved x, y
  std::string subject_id;
};

struct Manifest {
  std::vector<int> au_ids;
  std::vector<ManifestRecord> records;

  int n_au() const { return static_cast<int>(au_ids.size()); }
  /// Per-AU occurrence rate over the records; throws when there are none.
  Eigen::VectorXd occurrence_rates() const;
  Manifest subset(const std::vector<std::size_t>& indices) const;
};

/// Text format: a header line with the AU ids, then one record per line:
/// image path, n_au labels in {0, 1}, 2·n_align landmark reals, subject id.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Subject-exclusive folds, balanced greedily by record count. Returns the
/// record indices of each fold.
std::vector<std::vector<std::size_t>> subject_folds(const Manifest& manifest, int n_folds = 3);

Sample load_sample(const Manifest& manifest, std::size_t index,
                   const std::filesystem::path& base_dir, const LayoutPtr& layout);

/// Eye centers in a 200×200 aligned frame.
inline const Eigen::Vector2d kCanonicalLeftEye{70.0, 70.0};
inline const Eigen::Vector2d kCanonicalRightEye{130.0, 70.0};

/// p ↦ s·R·p + t.
struct SimilarityTransform {
  double scale = 1.0;
  double angle = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Eigen::Matrix2d linear() const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return linear() * p + translation; }
  SimilarityTransform inverse() const;
  LandmarkSet apply(const LandmarkSet& landmarks) const;
};

/// The similarity taking the two eye centers to their canonical positions
/// in an output frame of side out_size.
SimilarityTransform alignment_transform(const LandmarkSet& landmarks, int out_size = 200);

/// Warps the image with bilinear sampling; pixels mapping outside the source
/// take the fill value.
Image warp_similarity(const Image& image, const SimilarityTransform& transform, int out_size,
                      float fill = 0.5f);

/// Aligns a face so the eye centers land on the canonical positions.
Sample similarity_align(const Sample& sample, int out_size = 200);

/// Crop of side crop_size at (x0, y0), then an optional horizontal flip that
/// also remaps landmark indices through the layout's flip permutation.
Sample crop_flip(const Sample& sample, int x0, int y0, int crop_size, bool flip);

/// Offsets uniform in [0, side − crop_size]², flip with probability 1/2.
Sample random_crop_flip(const Sample& sample, Rng& rng, int crop_size = 176);

/// Centered crop, no flip.
Sample center_crop(const Sample& sample, int crop_size = 176);

/// Intensity 0..5 to occurrence (intensity ≥ 2).
int binarize_intensity(int intensity);

/// Which half of the face stays visible.
enum class OcclusionMode { Lower, Upper, Right, Left };

std::string to_string(OcclusionMode mode);
OcclusionMode parse_occlusion_mode(const std::string& name);

inline constexpr float kOcclusionFill = 0.5f;

/// Replaces the hidden half with mid-gray. For a side-h image, Lower keeps
/// rows h/2..h−1, Upper keeps 0..h/2−1, Right keeps columns w/2..w−1 and
/// Left keeps 0..w/2−1 (image coordinates).
Sample occlude(const Sample& sample, OcclusionMode mode);

/// Stacks images into a network input batch, shifting [0, 1] to [−0.5, 0.5].
template <typename Scalar>
Tensor<Scalar> to_network_input(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("empty batch");
  const int h = images.front()->height, w = images.front()->width;
  Tensor<Scalar> out(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->height != h || images[n]->width != w)
      throw ShapeError("images in a batch must share one size");
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(out.sample(static_cast<int>(n)).data(),
                                                        3 * h * w) =
        images[n]->data.template cast<Scalar>() - Scalar(0.5);
  }
  return out;
}

struct SyntheticConfig {
  int image_size = 200;  // side of the aligned frame
  std::vector<int> au_ids = {1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24};
  std::vector<double> rates;  // per AU; empty means 0.3 each
  int n_align = 49;
  int n_subjects = 8;
  double max_rotation_deg = 3.0;
  double max_scale = 0.03;
  double max_shift = 0.02;     // fraction of the side
  double shape_jitter = 0.004;  // per-subject landmark noise, fraction of the side
  double pattern_strength = 0.35;
  double noise = 0.02;

  void validate() const;
};

/// Where an AU's chroma pattern is painted: its two attention centers, with
/// AUs whose centers crowd an earlier AU pushed apart horizontally.
std::vector<std::array<Eigen::Vector2d, 2>> synthetic_pattern_centers(
    const LandmarkSet& landmarks, const std::vector<int>& au_ids);

/// Blob width for a face with the given landmarks.
double synthetic_pattern_sigma(const LandmarkSet& landmarks);

struct SyntheticCorpus {
  Manifest manifest;
  std::vector<Image> images;
};

/// Procedural faces: the canonical template under a random similarity, landmark
/// dots, and a red-minus-blue blob at each occurring AU's centers.
SyntheticCorpus generate_synthetic(const SyntheticConfig& config, Rng& rng, int n_samples);

/// Writes images/NNNNNN.ppm and manifest.txt under dir.
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

/// Labels read back from pixels: mean red-minus-blue around each pattern
/// center, thresholded at a fraction of the pattern strength.
Eigen::VectorXi synthetic_pixel_oracle(const Image& image, const LandmarkSet& landmarks,
                                       const std::vector<int>& au_ids, double pattern_strength);

}  // namespace jaanet
