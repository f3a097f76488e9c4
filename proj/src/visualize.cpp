#include "jaanet/visualize.hpp"

#include "jaanet/attention_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace jaanet {

Eigen::Vector3f colormap(double value) {
  static const std::array<Eigen::Vector3f, 5> anchors = {
      Eigen::Vector3f(0, 0, 1), Eigen::Vector3f(0, 1, 1), Eigen::Vector3f(0, 1, 0),
      Eigen::Vector3f(1, 1, 0), Eigen::Vector3f(1, 0, 0)};
  const double v = std::isfinite(value) ? std::clamp(value, 0.0, 1.0) : 0.0;
  const double pos = v * 4.0;
  const int i = std::min(3, static_cast<int>(std::floor(pos)));
  const float t = static_cast<float>(pos - i);
  return (1.0f - t) * anchors[i] + t * anchors[i + 1];
}

RowMatrix<double> upsample_map(const RowMatrix<double>& grid, int image_size) {
  const int side = static_cast<int>(grid.rows());
  RowMatrix<double> out(image_size, image_size);
  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x) {
      const MapCell cell = image_to_map_coords(Eigen::Vector2d(x, y), image_size, side);
      out(y, x) = grid(cell.y(), cell.x());
    }
  return out;
}

Image overlay_attention(const Image& image, const RowMatrix<double>& grid, float alpha) {
  if (image.height != image.width) throw ShapeError("overlay needs a square image");
  const RowMatrix<double> up = upsample_map(grid, image.height);
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const Eigen::Vector3f color = colormap(up(y, x));
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = (1.0f - alpha) * image.at(c, y, x) + alpha * color[c];
    }
  return out;
}

void write_map_text(const std::filesystem::path& path, const RowMatrix<double>& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << grid.rows() << " " << grid.cols() << "\n" << std::setprecision(17);
  for (Eigen::Index y = 0; y < grid.rows(); ++y) {
    for (Eigen::Index x = 0; x < grid.cols(); ++x) out << (x ? " " : "") << grid(y, x);
    out << "\n";
  }
}

RowMatrix<double> read_map_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows <= 0 || cols <= 0)
    throw std::runtime_error(path.string() + ": bad map header");
  RowMatrix<double> grid(rows, cols);
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (!(in >> grid.data()[i])) throw std::runtime_error(path.string() + ": truncated map");
  return grid;
}

}  // namespace jaanet
