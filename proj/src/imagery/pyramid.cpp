#include "slidereg/imagery/pyramid.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <list>
#include <mutex>
#include <unordered_map>

namespace slidereg {

namespace fs = std::filesystem;
using json = nlohmann::json;

class TileStore {
public:
  virtual ~TileStore() = default;
  virtual std::shared_ptr<const Raster> tile(int level, int x, int y) const = 0;
  // Non-null when the whole level is resident in memory.
  virtual const Raster *resident_level(int) const { return nullptr; }
};

namespace {

class MemoryTileStore final : public TileStore {
public:
  MemoryTileStore(std::vector<Raster> levels, int tile_size)
      : levels_(std::move(levels)), tile_size_(tile_size) {}

  std::shared_ptr<const Raster> tile(int level, int x, int y) const override {
    const Raster &src = levels_.at(static_cast<std::size_t>(level));
    const Rect r = intersect({x * tile_size_, y * tile_size_, tile_size_, tile_size_},
                             {0, 0, src.width, src.height});
    auto out = std::make_shared<Raster>(crop(src, r));
    out->level = level;
    out->downsample = src.downsample;
    return out;
  }

  const Raster *resident_level(int level) const override {
    return &levels_.at(static_cast<std::size_t>(level));
  }

private:
  std::vector<Raster> levels_;
  int tile_size_;
};

// Decoded-tile LRU over a pyramid directory.
class DirectoryTileStore final : public TileStore {
public:
  DirectoryTileStore(fs::path dir, std::size_t capacity)
      : dir_(std::move(dir)), capacity_(capacity) {}

  std::shared_ptr<const Raster> tile(int level, int x, int y) const override {
    const Key key{level, x, y};
    {
      std::lock_guard lock(mutex_);
      if (auto it = index_.find(key); it != index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->second;
      }
    }
    const fs::path path = dir_ / ("L" + std::to_string(level)) /
                          (std::to_string(x) + "_" + std::to_string(y) + ".png");
    auto decoded = std::make_shared<Raster>(load_image(path));
    decoded->level = level;
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(key); it != index_.end())
      return it->second->second;
    lru_.emplace_front(key, decoded);
    index_[key] = lru_.begin();
    while (lru_.size() > capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    return decoded;
  }

private:
  struct Key {
    int level, x, y;
    bool operator==(const Key &) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key &k) const {
      return (static_cast<std::size_t>(k.level) * 1000003u +
              static_cast<std::size_t>(k.x)) * 1000003u +
             static_cast<std::size_t>(k.y);
    }
  };
  using Entry = std::pair<Key, std::shared_ptr<const Raster>>;

  fs::path dir_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  mutable std::list<Entry> lru_;
  mutable std::unordered_map<Key, std::list<Entry>::iterator, KeyHash> index_;
};

std::vector<LevelInfo> level_geometry(int width, int height, int count) {
  std::vector<LevelInfo> levels;
  for (int k = 0; k < count; ++k) {
    levels.push_back({width, height, std::ldexp(1.0, k)});
    width = (width + 1) / 2;
    height = (height + 1) / 2;
  }
  return levels;
}

} // namespace

Raster halve(const Raster &src) {
  if (src.empty())
    throw Error("cannot halve an empty raster");
  const int w = (src.width + 1) / 2;
  const int h = (src.height + 1) / 2;
  Raster out(w, h, src.channels);
  out.level = src.level + 1;
  out.downsample = src.downsample * 2.0;
  for (int y = 0; y < h; ++y) {
    const int y0 = 2 * y;
    const int ny = std::min(2, src.height - y0);
    for (int x = 0; x < w; ++x) {
      const int x0 = 2 * x;
      const int nx = std::min(2, src.width - x0);
      const int n = nx * ny;
      for (int c = 0; c < src.channels; ++c) {
        int sum = 0;
        for (int dy = 0; dy < ny; ++dy)
          for (int dx = 0; dx < nx; ++dx)
            sum += src.at(x0 + dx, y0 + dy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

Pyramid Pyramid::build(const Raster &level0, int tile_size) {
  if (level0.empty())
    throw Error("cannot build a pyramid from an empty raster");
  if (tile_size < 1)
    throw Error("tile size must be positive");
  std::vector<Raster> rasters;
  rasters.push_back(level0);
  rasters.back().level = 0;
  rasters.back().downsample = 1.0;
  while (std::min(rasters.back().width, rasters.back().height) > tile_size)
    rasters.push_back(halve(rasters.back()));

  Pyramid p;
  p.tile_size_ = tile_size;
  p.channels_ = level0.channels;
  for (const auto &r : rasters)
    p.levels_.push_back({r.width, r.height, r.downsample});
  p.store_ = std::make_shared<MemoryTileStore>(std::move(rasters), tile_size);
  return p;
}

Pyramid Pyramid::open(const fs::path &dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw Error("pyramid manifest not found: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception &e) {
    throw Error("malformed pyramid manifest " + manifest_path.string() + ": " +
                e.what());
  }
  Pyramid p;
  try {
    const int width = manifest.at("width").get<int>();
    const int height = manifest.at("height").get<int>();
    const int count = manifest.at("levels").get<int>();
    p.tile_size_ = manifest.at("tile_size").get<int>();
    p.channels_ = manifest.value("channels", 3);
    if (width < 1 || height < 1 || count < 1 || p.tile_size_ < 1)
      throw Error("non-positive pyramid geometry");
    p.levels_ = level_geometry(width, height, count);
  } catch (const json::exception &e) {
    throw Error("malformed pyramid manifest " + manifest_path.string() + ": " +
                e.what());
  }
  p.source_path_ = dir;
  p.store_ = std::make_shared<DirectoryTileStore>(dir, 1024);
  return p;
}

const LevelInfo &Pyramid::level(int index) const {
  if (index < 0 || index >= level_count())
    throw Error("invalid pyramid level " + std::to_string(index));
  return levels_[static_cast<std::size_t>(index)];
}

Rect Pyramid::tile_rect(int lvl, int x, int y) const {
  const LevelInfo &info = level(lvl);
  if (x < 0 || y < 0 || x >= info.tiles_x(tile_size_) ||
      y >= info.tiles_y(tile_size_))
    throw Error("invalid tile index " + std::to_string(x) + "," +
                std::to_string(y) + " at level " + std::to_string(lvl));
  return intersect({x * tile_size_, y * tile_size_, tile_size_, tile_size_},
                   {0, 0, info.width, info.height});
}

Raster Pyramid::tile(int lvl, int x, int y) const {
  const Rect r = tile_rect(lvl, x, y);
  Raster out = *store_->tile(lvl, x, y);
  if (out.width != r.w || out.height != r.h)
    throw Error("tile " + std::to_string(x) + "_" + std::to_string(y) +
                " at level " + std::to_string(lvl) + " has unexpected size");
  return out;
}

Raster Pyramid::level_raster(int lvl) const {
  const LevelInfo &info = level(lvl);
  return read_region(*this, lvl, {0, 0, info.width, info.height});
}

void Pyramid::write(const fs::path &dir) const {
  fs::create_directories(dir);
  for (int lvl = 0; lvl < level_count(); ++lvl) {
    const LevelInfo &info = levels_[static_cast<std::size_t>(lvl)];
    const fs::path level_dir = dir / ("L" + std::to_string(lvl));
    fs::create_directories(level_dir);
    for (int ty = 0; ty < info.tiles_y(tile_size_); ++ty)
      for (int tx = 0; tx < info.tiles_x(tile_size_); ++tx)
        save_png(tile(lvl, tx, ty),
                 level_dir / (std::to_string(tx) + "_" + std::to_string(ty) + ".png"));
  }
  json manifest = {{"width", levels_.front().width},
                   {"height", levels_.front().height},
                   {"tile_size", tile_size_},
                   {"levels", level_count()},
                   {"channels", channels_},
                   {"format", "png"}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out)
    throw Error("cannot write pyramid manifest in " + dir.string());
}

Raster read_region(const Pyramid &pyramid, int level, const Rect &rect,
                   std::uint8_t fill) {
  const LevelInfo &info = pyramid.level(level);
  if (rect.empty())
    throw Error("read_region rect must be non-empty");
  if (const Raster *resident = pyramid.store_->resident_level(level)) {
    Raster out = crop(*resident, rect, fill);
    out.level = level;
    out.downsample = info.downsample;
    return out;
  }
  Raster out(rect.w, rect.h, pyramid.channels(), fill);
  out.level = level;
  out.downsample = info.downsample;
  const Rect inside = intersect(rect, {0, 0, info.width, info.height});
  if (inside.empty())
    return out;
  const int ts = pyramid.tile_size();
  for (int ty = inside.y / ts; ty <= (inside.bottom() - 1) / ts; ++ty) {
    for (int tx = inside.x / ts; tx <= (inside.right() - 1) / ts; ++tx) {
      const auto tile = pyramid.store_->tile(level, tx, ty);
      if (tile->channels != out.channels)
        throw Error("tile channel count disagrees with the pyramid manifest");
      const Rect tile_area = intersect(
          {tx * ts, ty * ts, tile->width, tile->height}, inside);
      const std::size_t run =
          static_cast<std::size_t>(tile_area.w) * out.channels;
      for (int y = tile_area.y; y < tile_area.bottom(); ++y)
        std::memcpy(&out.data[out.index(tile_area.x - rect.x, y - rect.y)],
                    &tile->data[tile->index(tile_area.x - tx * ts, y - ty * ts)],
                    run);
    }
  }
  return out;
}

} // namespace slidereg
