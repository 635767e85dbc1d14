#include "slidereg/pipeline/warp.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/pyramid.hpp"
#include "slidereg/pipeline/pipeline.hpp"

#include <cmath>

namespace slidereg {

std::pair<int, int> level_dimensions(int width, int height, int level) {
  if (level < 0)
    throw Error("pyramid level must be non-negative");
  for (int i = 0; i < level; ++i) {
    width = (width + 1) / 2;
    height = (height + 1) / 2;
  }
  return {width, height};
}

PlanarTransform level_pixel_transform(const PlanarTransform &t0, int level) {
  if (t0.level != 0)
    throw Error("level_pixel_transform expects a level-0 transform");
  PlanarTransform t = level0_to_working(t0, std::ldexp(1.0, level));
  t.level = level;
  return t;
}

Raster warp_image(const Raster &mov_level0, const PlanarTransform &t0, int level,
                  int out_width, int out_height, Interpolation mode) {
  Raster src = mov_level0;
  for (int i = 0; i < level; ++i)
    src = halve(src);
  return resample(src, level_pixel_transform(t0, level), out_width, out_height, mode,
                  kBackgroundFill);
}

Raster warp_with_file(const Raster &mov_level0, const TransformFile &file, int level,
                      Interpolation mode) {
  int w = mov_level0.width, h = mov_level0.height;
  if (file.frame.contains("reference")) {
    const auto &r = file.frame.at("reference");
    w = r.at("width").get<int>();
    h = r.at("height").get<int>();
  }
  const auto [lw, lh] = level_dimensions(w, h, level);
  return warp_image(mov_level0, file.transform, level, lw, lh, mode);
}

} // namespace slidereg
