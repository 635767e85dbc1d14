#pragma once

#include "slidereg/imagery/raster.hpp"

#include <opencv2/core.hpp>

#include <filesystem>
#include <vector>

namespace slidereg {

// Loads PNG/TIFF (8- or 16-bit, 1 or 3 channels) or level 0 of a pyramid
// directory. 16-bit data is rescaled so its maximum maps to 255. Any other
// channel count or depth is rejected rather than converted.
Raster load_image(const std::filesystem::path &path);

void save_png(const Raster &raster, const std::filesystem::path &path);
std::vector<std::uint8_t> encode_png(const Raster &raster,
                                     int compression_level = 1);
Raster decode_png(std::span<const std::uint8_t> bytes);

// Converts an 8-bit cv::Mat (1 or 3 channels, BGR) into a Raster and back.
// 16-bit input is normalized by its max value.
Raster raster_from_mat(const cv::Mat &mat);
cv::Mat mat_from_raster(const Raster &raster);
// Non-owning single-channel view; valid while `raster` is alive.
cv::Mat mat_view(const Raster &raster);

} // namespace slidereg
