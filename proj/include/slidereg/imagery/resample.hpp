#pragma once

#include "slidereg/imagery/raster.hpp"
#include "slidereg/transform/planar_transform.hpp"

namespace slidereg {

enum class Interpolation { Nearest, Bilinear };

// Output pixel p (in the frame `transform` maps into) takes the source value
// at transform^-1(p). Source samples outside `source` read as `fill`.
//
// `source_origin` is the position of source pixel (0, 0) in the full source
// image and `output_origin` the position of output pixel (0, 0) in the full
// output frame. Sampling only depends on absolute coordinates, so warping a
// sub-region of a larger image reproduces the full warp bit-exactly whenever
// the sub-region covers every sample it needs.
Raster resample(const Raster &source, const PlanarTransform &transform,
                int out_width, int out_height, Interpolation mode,
                std::uint8_t fill = kBackgroundFill, Point2 source_origin = {0, 0},
                Point2 output_origin = {0, 0});

// Bounding rect (in source coordinates) of every source pixel touched when
// resampling `output_rect` through `transform`.
Rect source_footprint(const PlanarTransform &transform, const Rect &output_rect);

// Resize by area averaging (downscale) or bilinear (upscale) to exact size.
Raster resize(const Raster &src, int width, int height);

} // namespace slidereg
