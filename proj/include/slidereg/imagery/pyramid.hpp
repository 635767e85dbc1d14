#pragma once

#include "slidereg/imagery/raster.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace slidereg {

inline constexpr int kDefaultTileSize = 256;

struct LevelInfo {
  int width = 0;
  int height = 0;
  double downsample = 1.0;

  int tiles_x(int tile_size) const { return (width + tile_size - 1) / tile_size; }
  int tiles_y(int tile_size) const { return (height + tile_size - 1) / tile_size; }
};

class TileStore;

// Multi-resolution image. Level k has ceil(dims(k-1) / 2) and downsample 2^k.
// Immutable after construction; all reads are safe from concurrent threads.
class Pyramid {
public:
  // In-memory pyramid built by 2x2 box filtering until min(w, h) <= tile_size.
  static Pyramid build(const Raster &level0, int tile_size = kDefaultTileSize);
  // Directory pyramid: manifest.json + L{level}/{x}_{y}.png.
  static Pyramid open(const std::filesystem::path &dir);

  int level_count() const { return static_cast<int>(levels_.size()); }
  const LevelInfo &level(int index) const;
  const std::vector<LevelInfo> &levels() const { return levels_; }
  int tile_size() const { return tile_size_; }
  int channels() const { return channels_; }
  const std::filesystem::path &source_path() const { return source_path_; }

  // Tile (x, y) of `level`; edge tiles are clipped to the level bounds.
  Raster tile(int level, int x, int y) const;
  Rect tile_rect(int level, int x, int y) const;
  // Full level raster (assembled from tiles for directory pyramids).
  Raster level_raster(int level) const;

  void write(const std::filesystem::path &dir) const;

private:
  Pyramid() = default;
  friend Raster read_region(const Pyramid &, int, const Rect &, std::uint8_t);

  std::vector<LevelInfo> levels_;
  int tile_size_ = kDefaultTileSize;
  int channels_ = 1;
  std::filesystem::path source_path_;
  std::shared_ptr<const TileStore> store_;
};

// One 2x2 box-filter reduction; odd edges average the available pixels.
// Rounds half up.
Raster halve(const Raster &src);

// Reads `rect` (level pixel coordinates) from `pyramid`; pixels outside the
// level are `fill`, pixels inside are bit-exact with the stored level.
Raster read_region(const Pyramid &pyramid, int level, const Rect &rect,
                   std::uint8_t fill = kBackgroundFill);

} // namespace slidereg
