#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace slidereg {

inline constexpr std::uint8_t kBackgroundFill = 255;

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  int right() const { return x + w; }
  int bottom() const { return y + h; }
  bool operator==(const Rect &) const = default;
};

Rect intersect(const Rect &a, const Rect &b);

// Row-major 8-bit image with 1 or 3 interleaved channels (RGB order).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;
  int level = 0;
  double downsample = 1.0;

  Raster() = default;
  Raster(int w, int h, int c, std::uint8_t fill = 0);

  bool empty() const { return width == 0 || height == 0; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  std::uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::uint8_t &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::span<const std::uint8_t> row(int y) const {
    return {data.data() + index(0, y), static_cast<std::size_t>(width * channels)};
  }

  bool operator==(const Raster &o) const {
    return width == o.width && height == o.height && channels == o.channels &&
           data == o.data;
  }
};

// Copies `rect` out of `src`; area outside `src` is filled with `fill`.
Raster crop(const Raster &src, const Rect &rect,
            std::uint8_t fill = kBackgroundFill);

// Replicates a single-channel raster into three identical channels.
Raster replicate_channels(const Raster &grey);

} // namespace slidereg
