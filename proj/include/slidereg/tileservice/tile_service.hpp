#pragma once

#include "slidereg/imagery/pyramid.hpp"
#include "slidereg/imagery/resample.hpp"
#include "slidereg/localalign/phase_correlation.hpp"
#include "slidereg/transform/transform_file.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace slidereg {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct TileServiceOptions {
  // Each subdirectory <id> holds transform.json plus ref/ and mov/ pyramids.
  std::filesystem::path pairs_dir;
  // Expected pyramid tile size; pairs stored with another size are invalid.
  // 0 accepts any.
  int tile_size = 0;
  Interpolation default_interpolation = Interpolation::Bilinear;
  // Default fix-offset level: finest level whose larger side is <= this.
  int fix_offset_max_dimension = 1024;
};

// Viewer-facing tile server. Reference tiles are served as stored; moving
// tiles are resampled on request through the pair's transform composed with
// the session offset. Handlers are usable without HTTP.
class TileService {
public:
  explicit TileService(TileServiceOptions options);
  ~TileService();

  HttpResponse list_pairs();
  HttpResponse describe_pair(const std::string &id);
  HttpResponse tile(const std::string &id, const std::string &side, int level, int x, int y,
                    std::optional<Interpolation> interpolation = std::nullopt);
  // Body: {"level"?: int, "viewport"?: {x, y, w, h} at that level,
  //        "source"?: "mask"|"grey", "subpixel"?: bool}
  HttpResponse fix_offset(const std::string &id, const std::string &body);
  HttpResponse save_offset(const std::string &id);
  HttpResponse reset_offset(const std::string &id);

  // Level-0 transform currently applied to moving tiles.
  std::optional<PlanarTransform> effective_transform(const std::string &id);
  // Drops cached pairs so the next request reloads from disk.
  void reload();

  void mount(httplib::Server &server);

private:
  struct PairSession;
  std::shared_ptr<PairSession> session(const std::string &id);

  TileServiceOptions options_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<PairSession>> sessions_;
};

// Blocks serving on host:port until the process is stopped.
int serve_tiles(const TileServiceOptions &options, const std::string &host, int port);

} // namespace slidereg
