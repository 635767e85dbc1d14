#include "slidereg/tileservice/tile_service.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/pipeline/warp.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>

namespace slidereg {

namespace {

using json = nlohmann::ordered_json;

HttpResponse json_response(int status, const json &body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string &message) {
  return json_response(status, json{{"error", message}});
}

bool valid_id(const std::string &id) {
  return !id.empty() && id != "." && id != ".." &&
         id.find_first_of("/\\") == std::string::npos;
}

json pyramid_json(const Pyramid &p) {
  auto levels = json::array();
  for (const auto &l : p.levels())
    levels.push_back({{"width", l.width}, {"height", l.height}, {"downsample", l.downsample}});
  return {{"width", p.level(0).width},
          {"height", p.level(0).height},
          {"tile_size", p.tile_size()},
          {"channels", p.channels()},
          {"levels", levels}};
}

} // namespace

struct TileService::PairSession {
  std::string id;
  std::filesystem::path dir;
  std::optional<Pyramid> ref;
  std::optional<Pyramid> mov;
  std::optional<TransformFile> file;
  std::string error;
  // Session translation in level-0 reference pixels.
  std::optional<Point2> offset;
  std::mutex mutex;
  // Moving levels beyond the stored pyramid, built on demand.
  std::map<int, std::shared_ptr<const Raster>> extra_levels;

  PlanarTransform effective() {
    std::lock_guard lock(mutex);
    PlanarTransform t = file->transform;
    if (offset) {
      PlanarTransform s = PlanarTransform::translation(offset->x(), offset->y());
      t = compose(s, t);
      t.kind = file->transform.kind;
    }
    return t;
  }
};

TileService::TileService(TileServiceOptions options) : options_(std::move(options)) {}
TileService::~TileService() = default;

void TileService::reload() {
  std::lock_guard lock(sessions_mutex_);
  sessions_.clear();
}

std::shared_ptr<TileService::PairSession> TileService::session(const std::string &id) {
  if (!valid_id(id))
    return nullptr;
  std::lock_guard lock(sessions_mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end())
    return it->second;
  const std::filesystem::path dir = options_.pairs_dir / id;
  if (!std::filesystem::is_directory(dir))
    return nullptr;
  auto s = std::make_shared<PairSession>();
  s->id = id;
  s->dir = dir;
  try {
    s->ref = Pyramid::open(dir / "ref");
    s->mov = Pyramid::open(dir / "mov");
    s->file = load_transform_file(dir / "transform.json");
    if (options_.tile_size > 0 && s->ref->tile_size() != options_.tile_size)
      throw Error("reference pyramid tile size " + std::to_string(s->ref->tile_size()) +
                  " != " + std::to_string(options_.tile_size));
  } catch (const Error &e) {
    s->error = e.what();
  }
  sessions_[id] = s;
  return s;
}

HttpResponse TileService::list_pairs() {
  auto out = json::array();
  if (!std::filesystem::is_directory(options_.pairs_dir))
    return json_response(200, out);
  std::vector<std::string> ids;
  for (const auto &entry : std::filesystem::directory_iterator(options_.pairs_dir))
    if (entry.is_directory())
      ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());
  for (const auto &id : ids) {
    auto s = session(id);
    if (!s)
      continue;
    json item{{"pair_id", id}, {"status", s->error.empty() ? "ok" : "invalid"}};
    if (!s->error.empty())
      item["error"] = s->error;
    if (s->ref)
      item["reference"] = pyramid_json(*s->ref);
    if (s->mov)
      item["moving"] = pyramid_json(*s->mov);
    out.push_back(item);
  }
  return json_response(200, out);
}

HttpResponse TileService::describe_pair(const std::string &id) {
  auto s = session(id);
  if (!s)
    return error_response(404, "unknown pair '" + id + "'");
  if (!s->error.empty())
    return error_response(422, s->error);
  json j{{"pair_id", id}, {"reference", pyramid_json(*s->ref)}, {"moving", pyramid_json(*s->mov)}};
  const PlanarTransform t = s->effective();
  auto m = json::array();
  for (int i = 0; i < 9; ++i)
    m.push_back(t.m(i / 3, i % 3));
  j["matrix"] = m;
  std::lock_guard lock(s->mutex);
  if (s->offset)
    j["session_offset"] = {{"dx", s->offset->x()}, {"dy", s->offset->y()}};
  else
    j["session_offset"] = nullptr;
  return json_response(200, j);
}

std::optional<PlanarTransform> TileService::effective_transform(const std::string &id) {
  auto s = session(id);
  if (!s || !s->error.empty())
    return std::nullopt;
  return s->effective();
}

namespace {

// Moving raster region at `level`, reading beyond the stored pyramid from
// halvings of its coarsest level.
Raster moving_region(const Pyramid &mov, int level, const Rect &rect,
                     std::map<int, std::shared_ptr<const Raster>> &extra, std::mutex &mutex) {
  if (level < mov.level_count())
    return read_region(mov, level, rect);
  std::shared_ptr<const Raster> src;
  {
    std::lock_guard lock(mutex);
    auto it = extra.find(level);
    if (it == extra.end()) {
      Raster r = mov.level_raster(mov.level_count() - 1);
      for (int l = mov.level_count() - 1; l < level; ++l)
        r = halve(r);
      it = extra.emplace(level, std::make_shared<const Raster>(std::move(r))).first;
    }
    src = it->second;
  }
  return crop(*src, rect);
}

} // namespace

HttpResponse TileService::tile(const std::string &id, const std::string &side, int level, int x,
                               int y, std::optional<Interpolation> interpolation) {
  auto s = session(id);
  if (!s)
    return error_response(404, "unknown pair '" + id + "'");
  if (!s->error.empty())
    return error_response(422, s->error);
  if (side != "ref" && side != "mov")
    return error_response(404, "unknown side '" + side + "'");
  if (level < 0 || level >= s->ref->level_count())
    return error_response(404, "unknown level " + std::to_string(level));
  Rect rect;
  try {
    rect = s->ref->tile_rect(level, x, y);
  } catch (const Error &e) {
    return error_response(404, e.what());
  }
  try {
    Raster out;
    if (side == "ref") {
      out = s->ref->tile(level, x, y);
    } else {
      const PlanarTransform t = level_pixel_transform(s->effective(), level);
      const Rect need = source_footprint(t, rect);
      const Raster src = moving_region(*s->mov, level, need, s->extra_levels, s->mutex);
      out = resample(src, t, rect.w, rect.h,
                     interpolation.value_or(options_.default_interpolation), kBackgroundFill,
                     {static_cast<double>(need.x), static_cast<double>(need.y)},
                     {static_cast<double>(rect.x), static_cast<double>(rect.y)});
    }
    const auto png = encode_png(out);
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const Error &e) {
    return error_response(500, e.what());
  }
}

HttpResponse TileService::fix_offset(const std::string &id, const std::string &body) {
  auto s = session(id);
  if (!s)
    return error_response(404, "unknown pair '" + id + "'");
  if (!s->error.empty())
    return error_response(422, s->error);
  json req = json::object();
  if (!body.empty()) {
    try {
      req = json::parse(body);
    } catch (const nlohmann::json::exception &e) {
      return error_response(400, std::string("malformed request: ") + e.what());
    }
    if (!req.is_object())
      return error_response(400, "request body must be a JSON object");
  }

  int level = s->ref->level_count() - 1;
  for (int l = 0; l < s->ref->level_count(); ++l) {
    const auto &info = s->ref->level(l);
    if (std::max(info.width, info.height) <= options_.fix_offset_max_dimension) {
      level = l;
      break;
    }
  }
  Rect view;
  bool fov = false;
  std::string source = "mask";
  bool subpixel = false;
  try {
    if (req.contains("level") && !req.at("level").is_null())
      level = req.at("level").get<int>();
    if (level < 0 || level >= s->ref->level_count())
      return error_response(400, "invalid level " + std::to_string(level));
    const auto &info = s->ref->level(level);
    view = {0, 0, info.width, info.height};
    if (req.contains("viewport") && !req.at("viewport").is_null()) {
      const auto &v = req.at("viewport");
      view = {v.at("x").get<int>(), v.at("y").get<int>(), v.at("w").get<int>(),
              v.at("h").get<int>()};
      if (view.empty())
        return error_response(400, "viewport must have positive size");
      fov = true;
    }
    source = req.value("source", std::string("mask"));
    subpixel = req.value("subpixel", false);
  } catch (const nlohmann::json::exception &e) {
    return error_response(400, std::string("malformed request: ") + e.what());
  }
  if (source != "mask" && source != "grey")
    return error_response(400, "source must be 'mask' or 'grey'");

  // Serialize offset computations per pair; tiles keep using the snapshot.
  static std::mutex fix_mutex;
  std::lock_guard fix_lock(fix_mutex);
  try {
    const Raster ref = read_region(*s->ref, level, view);
    const PlanarTransform t = level_pixel_transform(s->effective(), level);
    const Rect need = source_footprint(t, view);
    const Raster src = moving_region(*s->mov, level, need, s->extra_levels, s->mutex);
    const Raster mov = resample(src, t, view.w, view.h, Interpolation::Bilinear,
                                kBackgroundFill,
                                {static_cast<double>(need.x), static_cast<double>(need.y)},
                                {static_cast<double>(view.x), static_cast<double>(view.y)});
    OffsetResult off;
    if (source == "mask")
      off = phase_correlation(segment_tissue(mov, MaskFlavor::TS),
                              segment_tissue(ref, MaskFlavor::TS));
    else
      off = phase_correlation(mov, ref);
    off.scope = fov ? OffsetScope::Fov : OffsetScope::Global;
    off.downsample = std::ldexp(1.0, level);

    const double dx = subpixel ? off.dx : off.shift_x;
    const double dy = subpixel ? off.dy : off.shift_y;
    json out{{"dx", dx},
             {"dy", dy},
             {"level", level},
             {"peak", off.peak},
             {"degenerate", off.degenerate},
             {"scope", fov ? "fov" : "global"}};
    std::lock_guard lock(s->mutex);
    if (!off.degenerate) {
      const Point2 add{dx * off.downsample, dy * off.downsample};
      s->offset = s->offset ? Point2(*s->offset + add) : add;
    }
    if (s->offset)
      out["session_offset"] = {{"dx", s->offset->x()}, {"dy", s->offset->y()}};
    else
      out["session_offset"] = nullptr;
    return json_response(200, out);
  } catch (const Error &e) {
    return error_response(500, e.what());
  }
}

HttpResponse TileService::save_offset(const std::string &id) {
  auto s = session(id);
  if (!s)
    return error_response(404, "unknown pair '" + id + "'");
  if (!s->error.empty())
    return error_response(422, s->error);
  std::lock_guard lock(s->mutex);
  if (!s->offset)
    return error_response(409, "no session offset to save");
  TransformFile updated = *s->file;
  PlanarTransform shift = PlanarTransform::translation(s->offset->x(), s->offset->y());
  const PlanarTransform *prior = updated.stage(kStageOffset);
  PlanarTransform folded = compose(shift, prior ? *prior : updated.transform);
  folded.kind = updated.transform.kind;
  PlanarTransform total = compose(shift, updated.transform);
  total.kind = updated.transform.kind;
  updated.set_stage(kStageOffset, folded);
  updated.transform = total;
  try {
    save_transform_file(updated, s->dir / "transform.json");
  } catch (const Error &e) {
    return error_response(500, e.what());
  }
  s->file = updated;
  s->offset.reset();
  return {200, "application/json", serialize_transform_file(updated)};
}

HttpResponse TileService::reset_offset(const std::string &id) {
  auto s = session(id);
  if (!s)
    return error_response(404, "unknown pair '" + id + "'");
  std::lock_guard lock(s->mutex);
  s->offset.reset();
  return json_response(200, json{{"session_offset", nullptr}});
}

void TileService::mount(httplib::Server &server) {
  auto send = [](httplib::Response &res, const HttpResponse &r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(.*)", [](const httplib::Request &, httplib::Response &res) {
    res.status = 204;
  });
  server.Get("/pairs", [this, send](const httplib::Request &, httplib::Response &res) {
    send(res, list_pairs());
  });
  server.Get(R"(/pairs/([^/]+))", [this, send](const httplib::Request &req,
                                               httplib::Response &res) {
    send(res, describe_pair(req.matches[1]));
  });
  server.Get(R"(/pairs/([^/]+)/([^/]+)/tile/(\d+)/(\d+)/(\d+)(?:\.png)?)",
             [this, send](const httplib::Request &req, httplib::Response &res) {
               std::optional<Interpolation> interp;
               if (req.has_param("interp")) {
                 const std::string v = req.get_param_value("interp");
                 if (v == "nearest")
                   interp = Interpolation::Nearest;
                 else if (v == "bilinear")
                   interp = Interpolation::Bilinear;
                 else
                   return send(res, error_response(400, "interp must be nearest or bilinear"));
               }
               try {
                 send(res, tile(req.matches[1], req.matches[2], std::stoi(req.matches[3]),
                                std::stoi(req.matches[4]), std::stoi(req.matches[5]), interp));
               } catch (const std::out_of_range &) {
                 send(res, error_response(404, "tile index out of range"));
               }
             });
  server.Post(R"(/pairs/([^/]+)/fix-offset)",
              [this, send](const httplib::Request &req, httplib::Response &res) {
                send(res, fix_offset(req.matches[1], req.body));
              });
  server.Post(R"(/pairs/([^/]+)/save-offset)",
              [this, send](const httplib::Request &req, httplib::Response &res) {
                send(res, save_offset(req.matches[1]));
              });
  server.Post(R"(/pairs/([^/]+)/reset-offset)",
              [this, send](const httplib::Request &req, httplib::Response &res) {
                send(res, reset_offset(req.matches[1]));
              });
}

int serve_tiles(const TileServiceOptions &options, const std::string &host, int port) {
  TileService service(options);
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port))
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

} // namespace slidereg
