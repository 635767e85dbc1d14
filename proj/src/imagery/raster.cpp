#include "slidereg/imagery/raster.hpp"

#include "slidereg/error.hpp"

#include <algorithm>
#include <cstring>

namespace slidereg {

Rect intersect(const Rect &a, const Rect &b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0)
    return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

Raster::Raster(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c) {
  if (w < 0 || h < 0)
    throw Error("negative raster dimensions");
  if (c != 1 && c != 3)
    throw Error("unsupported channel count " + std::to_string(c));
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                  static_cast<std::size_t>(c),
              fill);
}

Raster crop(const Raster &src, const Rect &rect, std::uint8_t fill) {
  if (rect.empty())
    throw Error("crop rect must be non-empty");
  Raster out(rect.w, rect.h, src.channels, fill);
  out.level = src.level;
  out.downsample = src.downsample;
  const Rect inside = intersect(rect, {0, 0, src.width, src.height});
  if (inside.empty())
    return out;
  const std::size_t run = static_cast<std::size_t>(inside.w) * src.channels;
  for (int y = inside.y; y < inside.bottom(); ++y) {
    std::memcpy(&out.data[out.index(inside.x - rect.x, y - rect.y)],
                &src.data[src.index(inside.x, y)], run);
  }
  return out;
}

Raster replicate_channels(const Raster &grey) {
  if (grey.channels != 1)
    throw Error("replicate_channels expects a single-channel raster");
  Raster out(grey.width, grey.height, 3);
  out.level = grey.level;
  out.downsample = grey.downsample;
  for (std::size_t i = 0; i < grey.pixel_count(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = grey.data[i];
  }
  return out;
}

} // namespace slidereg
