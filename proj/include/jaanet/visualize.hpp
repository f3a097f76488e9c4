#pragma once

#include "jaanet/data_pipeline.hpp"
#include "jaanet/tensor.hpp"

#include <Eigen/Dense>

#include <filesystem>

namespace jaanet {

/// Blue-to-red jet colormap with fixed anchors:
/// 0 → (0,0,255), 0.25 → (0,255,255), 0.5 → (0,255,0), 0.75 → (255,255,0), 1 → (255,0,0).
/// Values outside [0, 1] are clamped. Channels are returned in [0, 1].
Eigen::Vector3f colormap(double value);

/// Nearest-cell upsampling of a square attention grid to an image of side
/// image_size, using the same coordinate mapping as the attention centers.
RowMatrix<double> upsample_map(const RowMatrix<double>& grid, int image_size);

inline constexpr float kOverlayAlpha = 0.5f;

/// (1 − α)·image + α·colormap(map) per pixel.
Image overlay_attention(const Image& image, const RowMatrix<double>& grid,
                        float alpha = kOverlayAlpha);

/// Plain-text grid dump: first line "rows cols", then one row per line.
void write_map_text(const std::filesystem::path& path, const RowMatrix<double>& grid);
RowMatrix<double> read_map_text(const std::filesystem::path& path);

}  // namespace jaanet
