#pragma once

#include "slidereg/imagery/raster.hpp"

#include <Eigen/Core>

#include <string_view>

namespace slidereg {

enum class PreprocMode { Rgb, Greyscale, BlueRatio, HStain };

std::string_view to_string(PreprocMode mode);
PreprocMode parse_preproc_mode(std::string_view text);

// Rows are the optical-density signatures of (haematoxylin, eosin, residual);
// they are normalized to unit length before use.
struct StainMatrix {
  Eigen::Matrix3d rows;
  static StainMatrix haematoxylin_eosin_dab();
};

// round(0.299 R + 0.587 G + 0.114 B); single-channel input passes through.
Raster to_greyscale(const Raster &raster);

// 100 B / (1 + R + G) * 256 / (1 + R + G + B), clipped to [0, 255].
Raster blue_ratio(const Raster &raster);

// Haematoxylin concentration from optical-density unmixing, scaled so that
// a black pixel maps to 255; white maps to 0.
Raster h_stain(const Raster &raster,
               const StainMatrix &stains = StainMatrix::haematoxylin_eosin_dab());

// Dispatch on mode. RGB returns the input unchanged.
Raster apply_preproc_mode(const Raster &raster, PreprocMode mode,
                          const StainMatrix &stains = StainMatrix::haematoxylin_eosin_dab());

} // namespace slidereg
