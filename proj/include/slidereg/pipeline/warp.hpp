#pragma once

#include "slidereg/imagery/resample.hpp"
#include "slidereg/transform/transform_file.hpp"

namespace slidereg {

// Dimensions of pyramid level `level` for a level-0 size (ceil halving).
std::pair<int, int> level_dimensions(int width, int height, int level);

// Level-0 transform expressed on the pixel grid of pyramid `level`, where
// pixel i is the box average centred at 2^level i + (2^level - 1) / 2.
PlanarTransform level_pixel_transform(const PlanarTransform &t0, int level);

// Warps a level-0 moving image into the reference frame at pyramid `level`:
// the moving image is box-halved `level` times and resampled through level_pixel_transform.
Raster warp_image(const Raster &mov_level0, const PlanarTransform &t0, int level,
                  int out_width, int out_height, Interpolation mode);

// Output size from the transform file's reference frame, else the input size.
Raster warp_with_file(const Raster &mov_level0, const TransformFile &file, int level,
                      Interpolation mode);

} // namespace slidereg
