#include "jaanet/data_pipeline.hpp"

#include "jaanet/attention_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace jaanet {

namespace fs = std::filesystem;

void quantize(Image& image) {
  image.data = (image.data.max(0.0f).min(1.0f) * 255.0f).round() / 255.0f;
}

void write_ppm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3) * image.height * image.width);
  std::size_t k = 0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        bytes[k++] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw std::runtime_error("truncated image header");
}

}  // namespace

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P6" && magic != "P5")
    throw std::runtime_error(path.string() + ": not a binary PPM/PGM file");
  const int width = std::stoi(next_token(in));
  const int height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
    throw std::runtime_error(path.string() + ": unsupported image header");
  in.get();
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(channels) * width * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  Image image(height, width);
  std::size_t k = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (channels == 3) {
        for (int c = 0; c < 3; ++c) image.at(c, y, x) = bytes[k++] / static_cast<float>(maxval);
      } else {
        const float v = bytes[k++] / static_cast<float>(maxval);
        for (int c = 0; c < 3; ++c) image.at(c, y, x) = v;
      }
    }
  return image;
}

// ---------------------------------------------------------------------------
// Manifest

Eigen::VectorXd Manifest::occurrence_rates() const {
  if (records.empty()) throw ManifestError("occurrence rates are undefined for an empty manifest");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_au());
  for (const auto& r : records) sum += r.labels.cast<double>();
  return sum / static_cast<double>(records.size());
}

Manifest Manifest::subset(const std::vector<std::size_t>& indices) const {
  Manifest out;
  out.au_ids = au_ids;
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  int line_no = 0;
  bool header = false;
  int n_landmark_values = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (!header) {
      for (const auto& t : tokens) {
        try {
          m.au_ids.push_back(std::stoi(t));
        } catch (const std::exception&) {
          fail("header must list integer AU ids, got '" + t + "'");
        }
      }
      header = true;
      continue;
    }
    const int n_au = m.n_au();
    const int values = static_cast<int>(tokens.size()) - 2 - n_au;
    if (values <= 0 || values % 2 != 0)
      fail("expected path, " + std::to_string(n_au) + " labels, landmark pairs and subject id");
    if (n_landmark_values < 0) n_landmark_values = values;
    if (values != n_landmark_values)
      fail("landmark count " + std::to_string(values / 2) + " differs from earlier records (" +
           std::to_string(n_landmark_values / 2) + ")");
    ManifestRecord r;
    r.image_path = tokens[0];
    r.labels.resize(n_au);
    for (int i = 0; i < n_au; ++i) {
      const std::string& t = tokens[1 + i];
      if (t != "0" && t != "1") fail("label '" + t + "' is not 0 or 1");
      r.labels[i] = t == "1";
    }
    r.landmarks.resize(values);
    for (int j = 0; j < values; ++j) {
      try {
        std::size_t used = 0;
        r.landmarks[j] = std::stod(tokens[1 + n_au + j], &used);
        if (used != tokens[1 + n_au + j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail("landmark value '" + tokens[1 + n_au + j] + "' is not a number");
      }
      if (!std::isfinite(r.landmarks[j])) fail("non-finite landmark value");
    }
    r.subject_id = tokens.back();
    m.records.push_back(std::move(r));
  }
  if (!header) throw ManifestError(path.string() + ": missing AU header line");
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ManifestError("cannot write " + tmp.string());
    for (std::size_t i = 0; i < manifest.au_ids.size(); ++i)
      out << (i ? " " : "") << manifest.au_ids[i];
    out << "\n" << std::setprecision(17);
    for (const auto& r : manifest.records) {
      if (r.labels.size() != manifest.n_au()) throw ManifestError("label count mismatch");
      out << r.image_path;
      for (int i = 0; i < r.labels.size(); ++i) out << " " << r.labels[i];
      for (int j = 0; j < r.landmarks.size(); ++j) out << " " << r.landmarks[j];
      out << " " << r.subject_id << "\n";
    }
  }
  fs::rename(tmp, path);
}

std::vector<std::vector<std::size_t>> subject_folds(const Manifest& manifest, int n_folds) {
  if (n_folds <= 0) throw std::invalid_argument("fold count must be positive");
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    by_subject[manifest.records[i].subject_id].push_back(i);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> subjects(by_subject.begin(),
                                                                         by_subject.end());
  std::stable_sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) {
    return a.second.size() > b.second.size();
  });
  std::vector<std::vector<std::size_t>> folds(n_folds);
  for (const auto& [id, rows] : subjects) {
    auto smallest = std::min_element(folds.begin(), folds.end(), [](const auto& a, const auto& b) {
      return a.size() < b.size();
    });
    smallest->insert(smallest->end(), rows.begin(), rows.end());
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Sample load_sample(const Manifest& manifest, std::size_t index, const fs::path& base_dir,
                   const LayoutPtr& layout) {
  const ManifestRecord& r = manifest.records.at(index);
  Sample s;
  s.image = read_ppm(base_dir / r.image_path);
  s.au_labels = r.labels;
  s.landmarks = LandmarkSet::from_interleaved(r.landmarks, layout);
  s.subject_id = r.subject_id;
  return s;
}

// ---------------------------------------------------------------------------
// Geometry

Eigen::Matrix2d SimilarityTransform::linear() const {
  return scale * Eigen::Rotation2Dd(angle).toRotationMatrix();
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.angle = -angle;
  inv.translation = -(inv.linear() * translation);
  return inv;
}

LandmarkSet SimilarityTransform::apply(const LandmarkSet& landmarks) const {
  LandmarkMatrix pts = landmarks.points();
  const Eigen::Matrix2d a = linear();
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    pts.row(i) = (a * pts.row(i).transpose() + translation).transpose();
  return LandmarkSet(std::move(pts), landmarks.layout_ptr());
}

SimilarityTransform alignment_transform(const LandmarkSet& landmarks, int out_size) {
  const Eigen::Vector2d left = landmarks.eye_center(0);
  const Eigen::Vector2d right = landmarks.eye_center(1);
  const Eigen::Vector2d src = right - left;
  if (!(src.norm() > 0)) throw DegenerateGeometryError("eye centers coincide");
  const double k = out_size / 200.0;
  const Eigen::Vector2d dst_left = kCanonicalLeftEye * k;
  const Eigen::Vector2d dst = (kCanonicalRightEye - kCanonicalLeftEye) * k;
  SimilarityTransform t;
  t.scale = dst.norm() / src.norm();
  t.angle = std::atan2(dst.y(), dst.x()) - std::atan2(src.y(), src.x());
  t.translation = dst_left - t.linear() * left;
  return t;
}

Image warp_similarity(const Image& image, const SimilarityTransform& transform, int out_size,
                      float fill) {
  const SimilarityTransform inv = transform.inverse();
  const Eigen::Matrix2d a = inv.linear();
  Image out(out_size, out_size, fill);
  for (int y = 0; y < out_size; ++y)
    for (int x = 0; x < out_size; ++x) {
      const Eigen::Vector2d src = a * Eigen::Vector2d(x, y) + inv.translation;
      const double fx = std::floor(src.x()), fy = std::floor(src.y());
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double ax = src.x() - fx, ay = src.y() - fy;
      for (int c = 0; c < 3; ++c) {
        double acc = 0, wsum = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double w = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
            if (w == 0) continue;
            const int sx = x0 + dx, sy = y0 + dy;
            const double v = (sx < 0 || sy < 0 || sx >= image.width || sy >= image.height)
                                 ? fill
                                 : image.at(c, sy, sx);
            acc += w * v;
            wsum += w;
          }
        out.at(c, y, x) = static_cast<float>(wsum > 0 ? acc / wsum : fill);
      }
    }
  return out;
}

Sample similarity_align(const Sample& sample, int out_size) {
  const SimilarityTransform t = alignment_transform(sample.landmarks, out_size);
  Sample out;
  out.image = warp_similarity(sample.image, t, out_size);
  out.landmarks = t.apply(sample.landmarks);
  out.au_labels = sample.au_labels;
  out.subject_id = sample.subject_id;
  return out;
}

Sample crop_flip(const Sample& sample, int x0, int y0, int crop_size, bool flip) {
  const Image& src = sample.image;
  if (x0 < 0 || y0 < 0 || x0 + crop_size > src.width || y0 + crop_size > src.height)
    throw ShapeError("crop window leaves the image");
  Sample out;
  out.image = Image(crop_size, crop_size);
  for (int c = 0; c < 3; ++c) {
    auto block = src.channel(c).block(y0, x0, crop_size, crop_size);
    if (flip) {
      out.image.channel(c) = block.rowwise().reverse();
    } else {
      out.image.channel(c) = block;
    }
  }
  LandmarkMatrix pts = sample.landmarks.points();
  pts.col(0).array() -= x0;
  pts.col(1).array() -= y0;
  if (flip) {
    const auto& perm = sample.landmarks.layout().flip_permutation;
    LandmarkMatrix mirrored(pts.rows(), 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      mirrored(perm[i], 0) = (crop_size - 1) - pts(i, 0);
      mirrored(perm[i], 1) = pts(i, 1);
    }
    pts = std::move(mirrored);
  }
  out.landmarks = LandmarkSet(std::move(pts), sample.landmarks.layout_ptr());
  out.au_labels = sample.au_labels;
  out.subject_id = sample.subject_id;
  return out;
}

Sample random_crop_flip(const Sample& sample, Rng& rng, int crop_size) {
  const int max_x = sample.image.width - crop_size, max_y = sample.image.height - crop_size;
  if (max_x < 0 || max_y < 0) throw ShapeError("image smaller than the crop");
  std::uniform_int_distribution<int> ox(0, max_x), oy(0, max_y);
  std::bernoulli_distribution flip(0.5);
  const int x0 = ox(rng), y0 = oy(rng);
  return crop_flip(sample, x0, y0, crop_size, flip(rng));
}

Sample center_crop(const Sample& sample, int crop_size) {
  return crop_flip(sample, (sample.image.width - crop_size) / 2,
                   (sample.image.height - crop_size) / 2, crop_size, false);
}

int binarize_intensity(int intensity) {
  if (intensity < 0 || intensity > 5)
    throw std::out_of_range("AU intensity " + std::to_string(intensity) + " outside 0..5");
  return intensity >= 2 ? 1 : 0;
}

std::string to_string(OcclusionMode mode) {
  switch (mode) {
    case OcclusionMode::Lower: return "lower";
    case OcclusionMode::Upper: return "upper";
    case OcclusionMode::Right: return "right";
    case OcclusionMode::Left: return "left";
  }
  return "?";
}

OcclusionMode parse_occlusion_mode(const std::string& name) {
  for (auto m : {OcclusionMode::Lower, OcclusionMode::Upper, OcclusionMode::Right,
                 OcclusionMode::Left})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown occlusion mode '" + name + "'");
}

Sample occlude(const Sample& sample, OcclusionMode mode) {
  Sample out = sample;
  const int h = sample.image.height, w = sample.image.width;
  for (int c = 0; c < 3; ++c) {
    auto ch = out.image.channel(c);
    switch (mode) {
      case OcclusionMode::Lower: ch.topRows(h / 2).setConstant(kOcclusionFill); break;
      case OcclusionMode::Upper: ch.bottomRows(h - h / 2).setConstant(kOcclusionFill); break;
      case OcclusionMode::Right: ch.leftCols(w / 2).setConstant(kOcclusionFill); break;
      case OcclusionMode::Left: ch.rightCols(w - w / 2).setConstant(kOcclusionFill); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticConfig::validate() const {
  if (image_size < 16) throw std::invalid_argument("synthetic image_size must be at least 16");
  if (au_ids.empty()) throw std::invalid_argument("synthetic corpus needs at least one AU");
  if (!rates.empty() && rates.size() != au_ids.size())
    throw std::invalid_argument("synthetic rates must match au_ids");
  for (double r : rates)
    if (r < 0 || r > 1) throw std::invalid_argument("synthetic rates must lie in [0, 1]");
  if (n_subjects <= 0) throw std::invalid_argument("n_subjects must be positive");
  for (int au : au_ids) au_center_rule(au);
}

double synthetic_pattern_sigma(const LandmarkSet& landmarks) { return 0.12 * landmarks.scale(); }

std::vector<std::array<Eigen::Vector2d, 2>> synthetic_pattern_centers(
    const LandmarkSet& landmarks, const std::vector<int>& au_ids) {
  const auto centers = compute_au_centers(landmarks, au_ids);
  const double step = 3.0 * synthetic_pattern_sigma(landmarks);
  std::vector<std::array<Eigen::Vector2d, 2>> out;
  auto crowded = [&](const Eigen::Vector2d& p) {
    for (const auto& placed : out)
      for (const auto& q : placed)
        if ((q - p).norm() < step - 1e-9) return true;
    return false;
  };
  for (const auto& au : centers) {
    std::array<Eigen::Vector2d, 2> c = au.points;
    for (int k = 1; crowded(c[0]) || crowded(c[1]); ++k) {
      c = au.points;
      c[0].x() -= k * step;
      c[1].x() += k * step;
    }
    out.push_back(c);
  }
  return out;
}

namespace {

void add_blob(Image& image, const Eigen::Vector2d& center, double sigma,
              const Eigen::Vector3f& amplitude, bool max_combine) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  const int cx = static_cast<int>(std::lround(center.x())), cy = static_cast<int>(std::lround(center.y()));
  for (int y = std::max(0, cy - r); y <= std::min(image.height - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(image.width - 1, cx + r); ++x) {
      const double d2 = (Eigen::Vector2d(x, y) - center).squaredNorm();
      const float g = static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
      for (int c = 0; c < 3; ++c) {
        const float delta = amplitude[c] * g;
        float& px = image.at(c, y, x);
        px = max_combine ? (std::abs(delta) > std::abs(px) ? delta : px) : px + delta;
      }
    }
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& config, Rng& rng, int n_samples) {
  config.validate();
  const LayoutPtr layout = builtin_layout(config.n_align);
  const int side = config.image_size;
  const LandmarkMatrix canonical = canonical_landmarks(*layout, side);
  const Eigen::Vector2d mid(0.5 * (side - 1), 0.5 * (side - 1));

  // Subject identities: a fixed landmark jitter and skin tone each.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<LandmarkMatrix> identity;
  std::vector<float> tone;
  for (int s = 0; s < config.n_subjects; ++s) {
    LandmarkMatrix j(canonical.rows(), 2);
    for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = gauss(rng) * config.shape_jitter * side;
    identity.push_back(j);
    tone.push_back(static_cast<float>(0.62 + 0.06 * unit(rng)));
  }

  SyntheticCorpus corpus;
  corpus.manifest.au_ids = config.au_ids;
  const int n_au = static_cast<int>(config.au_ids.size());
  std::uniform_int_distribution<int> pick_subject(0, config.n_subjects - 1);
  for (int n = 0; n < n_samples; ++n) {
    const int subject = pick_subject(rng);
    SimilarityTransform t;
    t.angle = unit(rng) * config.max_rotation_deg * std::numbers::pi / 180.0;
    t.scale = 1.0 + unit(rng) * config.max_scale;
    const Eigen::Vector2d shift(unit(rng) * config.max_shift * side, unit(rng) * config.max_shift * side);
    t.translation = mid + shift - t.linear() * mid;
    LandmarkMatrix pts = canonical + identity[subject];
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      pts.row(i) = t.apply(pts.row(i).transpose()).transpose();
    LandmarkSet landmarks(pts, layout);

    Eigen::VectorXi labels(n_au);
    for (int i = 0; i < n_au; ++i) {
      const double rate = config.rates.empty() ? 0.3 : config.rates[i];
      labels[i] = std::bernoulli_distribution(rate)(rng) ? 1 : 0;
    }

    // Background, face ellipse, landmark dots.
    Image image(side, side, 0.45f);
    const Eigen::Vector2d face_center = t.apply(Eigen::Vector2d(0.5 * side, 0.5 * side));
    const double rx = 0.36 * side * t.scale, ry = 0.46 * side * t.scale;
    const double ca = std::cos(t.angle), sa = std::sin(t.angle);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double dx = x - face_center.x(), dy = y - face_center.y();
        const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
        if (u * u + v * v <= 1.0)
          for (int c = 0; c < 3; ++c) image.at(c, y, x) = tone[subject];
      }
    const double dot = std::max(0.6, 0.008 * side);
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      add_blob(image, pts.row(i).transpose(), dot, Eigen::Vector3f::Constant(-0.3f), false);

    // AU patterns: red up, blue down, so gray content has zero red-minus-blue.
    Image chroma(side, side, 0.0f);
    const double sigma = synthetic_pattern_sigma(landmarks);
    const float a = static_cast<float>(config.pattern_strength / 2);
    const auto centers = synthetic_pattern_centers(landmarks, config.au_ids);
    for (int i = 0; i < n_au; ++i) {
      if (!labels[i]) continue;
      for (const auto& c : centers[i]) add_blob(chroma, c, sigma, Eigen::Vector3f(a, 0, -a), true);
    }
    image.data += chroma.data;

    std::normal_distribution<float> noise(0.0f, static_cast<float>(config.noise));
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const float g = noise(rng);
        for (int c = 0; c < 3; ++c) image.at(c, y, x) += g;
      }
    quantize(image);

    ManifestRecord r;
    std::ostringstream name;
    name << "images/" << std::setw(6) << std::setfill('0') << n << ".ppm";
    r.image_path = name.str();
    r.labels = labels;
    r.landmarks = landmarks.interleaved();
    std::ostringstream sid;
    sid << "subject_" << std::setw(2) << std::setfill('0') << subject;
    r.subject_id = sid.str();
    corpus.manifest.records.push_back(std::move(r));
    corpus.images.push_back(std::move(image));
  }
  return corpus;
}

void write_corpus(const fs::path& dir, const SyntheticCorpus& corpus) {
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < corpus.images.size(); ++i)
    write_ppm(dir / corpus.manifest.records[i].image_path, corpus.images[i]);
  write_manifest(dir / "manifest.txt", corpus.manifest);
}

Eigen::VectorXi synthetic_pixel_oracle(const Image& image, const LandmarkSet& landmarks,
                                       const std::vector<int>& au_ids, double pattern_strength) {
  const auto centers = synthetic_pattern_centers(landmarks, au_ids);
  const double sigma = synthetic_pattern_sigma(landmarks);
  const int r = std::max(0, static_cast<int>(std::floor(0.5 * sigma)));
  Eigen::VectorXi out(static_cast<Eigen::Index>(au_ids.size()));
  for (std::size_t i = 0; i < au_ids.size(); ++i) {
    double best = 0;
    for (const auto& c : centers[i]) {
      const int cx = static_cast<int>(std::lround(c.x())), cy = static_cast<int>(std::lround(c.y()));
      double sum = 0;
      int count = 0;
      for (int y = cy - r; y <= cy + r; ++y)
        for (int x = cx - r; x <= cx + r; ++x) {
          if (x < 0 || y < 0 || x >= image.width || y >= image.height) continue;
          sum += image.at(0, y, x) - image.at(2, y, x);
          ++count;
        }
      if (count) best = std::max(best, sum / count);
    }
    out[static_cast<Eigen::Index>(i)] = best > 0.5 * pattern_strength ? 1 : 0;
  }
  return out;
}

}  // namespace jaanet
