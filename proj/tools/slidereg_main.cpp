#include "slidereg/error.hpp"
#include "slidereg/features/network.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/imagery/pyramid.hpp"
#include "slidereg/pipeline/batch.hpp"
#include "slidereg/pipeline/pipeline.hpp"
#include "slidereg/pipeline/warp.hpp"
#include "slidereg/tileservice/tile_service.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace slidereg;

namespace {

struct CommonArgs {
  std::string model;
  std::string mode = "greyscale";
  std::string mask = "tsef";
  std::string kind = "rigid";
  int matches = kDefaultMatchCount;
  double prealign_scale = 0, dfbr_scale = 0, export_scale = 0;
  bool no_offset = false;
  bool no_histogram = false;
  bool trimmed = false;
};

void add_common(CLI::App *cmd, CommonArgs &a) {
  cmd->add_option("--model", a.model, std::string("ONNX feature model (else $") + kModelEnvVar + ")");
  cmd->add_option("--mode", a.mode, "greyscale|rgb|blue-ratio|h-stain");
  cmd->add_option("--mask", a.mask, "ts|tsef|external:<ref_mask>,<mov_mask>");
  cmd->add_option("--kind", a.kind, "rigid|similarity|affine");
  cmd->add_option("--matches", a.matches, "matches kept per stage");
  cmd->add_option("--prealign-scale", a.prealign_scale, "fraction of level 0");
  cmd->add_option("--dfbr-scale", a.dfbr_scale, "fraction of level 0");
  cmd->add_option("--export-scale", a.export_scale, "fraction of level 0");
  cmd->add_flag("--no-offset", a.no_offset, "skip the phase-correlation stage");
  cmd->add_flag("--no-histogram-matching", a.no_histogram);
  cmd->add_flag("--trimmed", a.trimmed, "trim worst residuals and refit");
}

PipelineConfig make_config(const CommonArgs &a) {
  PipelineConfig c;
  c.mode = parse_preproc_mode(a.mode);
  if (a.mask == "ts") {
    c.mask_flavor = MaskFlavor::TS;
  } else if (a.mask == "tsef") {
    c.mask_flavor = MaskFlavor::TSEF;
  } else if (a.mask.rfind("external:", 0) == 0) {
    const std::string paths = a.mask.substr(9);
    const auto comma = paths.find(',');
    if (comma == std::string::npos)
      throw Error("--mask external needs <ref_mask>,<mov_mask>");
    c.mask_flavor = MaskFlavor::External;
    c.ref_mask_path = paths.substr(0, comma);
    c.mov_mask_path = paths.substr(comma + 1);
  } else {
    throw Error("unknown mask flavor '" + a.mask + "'");
  }
  c.estimate.kind = parse_transform_kind(a.kind);
  c.estimate.trimmed = a.trimmed;
  c.match_count = a.matches;
  if (a.prealign_scale > 0)
    c.prealign_scale = a.prealign_scale;
  if (a.dfbr_scale > 0)
    c.dfbr_scale = a.dfbr_scale;
  if (a.export_scale > 0)
    c.export_scale = a.export_scale;
  c.apply_offset = !a.no_offset;
  c.histogram_matching = !a.no_histogram;
  c.model_path = a.model;
  c.validate();
  return c;
}

Interpolation parse_interp(const std::string &s) {
  if (s == "nearest")
    return Interpolation::Nearest;
  if (s == "bilinear")
    return Interpolation::Bilinear;
  throw Error("interpolation must be nearest or bilinear");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Serial-section whole-slide image registration"};
  app.require_subcommand(1);

  CommonArgs reg_args;
  std::string ref_path, mov_path, out_dir;
  auto *reg = app.add_subcommand("register", "register a moving image onto a reference");
  reg->add_option("ref", ref_path)->required();
  reg->add_option("mov", mov_path)->required();
  reg->add_option("--out", out_dir, "output directory");
  add_common(reg, reg_args);

  CommonArgs eval_args;
  std::string manifest, eval_out;
  int workers = 1;
  auto *eval = app.add_subcommand("evaluate", "batch registration with landmark metrics");
  eval->add_option("--manifest", manifest, "CSV: ref,mov[,ref_landmarks,mov_landmarks]")
      ->required();
  eval->add_option("--out", eval_out, "report directory");
  eval->add_option("--workers", workers);
  add_common(eval, eval_args);

  std::string warp_in, warp_transform, warp_out, warp_interp = "bilinear";
  int warp_level = 0;
  auto *warp = app.add_subcommand("warp", "warp a moving image through a transform file");
  warp->add_option("image", warp_in)->required();
  warp->add_option("--transform", warp_transform)->required();
  warp->add_option("--out", warp_out)->required();
  warp->add_option("--level", warp_level, "pyramid level of the output");
  warp->add_option("--interp", warp_interp, "nearest|bilinear");

  std::string pairs_dir, host = "127.0.0.1", serve_interp = "bilinear";
  int port = 8080, tile_size = kDefaultTileSize;
  auto *serve = app.add_subcommand("serve", "tile service for the viewer");
  serve->add_option("--pairs-dir", pairs_dir)->required();
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--tile-size", tile_size, "expected pyramid tile size");
  serve->add_option("--interp", serve_interp, "nearest|bilinear");

  std::string pyr_in, pyr_out;
  int pyr_tile = kDefaultTileSize;
  auto *pyr = app.add_subcommand("pyramid", "build a tiled pyramid directory from an image");
  pyr->add_option("image", pyr_in)->required();
  pyr->add_option("--out", pyr_out)->required();
  pyr->add_option("--tile-size", pyr_tile);

  std::string fixture_out;
  auto *fixture = app.add_subcommand("make-fixture", "write the random-weight test network");
  fixture->add_option("--out", fixture_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*reg) {
      const PipelineConfig config = make_config(reg_args);
      auto extractor = load_extractor(resolve_model_path(config));
      const RegistrationResult r =
          run_pipeline(ref_path, mov_path, config, *extractor, out_dir);
      if (out_dir.empty())
        std::cout << serialize_transform_file(r.file);
      for (const auto &w : r.warnings)
        std::cerr << "warning: " << w << "\n";
      if (r.partial) {
        std::cerr << "partial: " << r.error << "\n";
        return 2;
      }
      return 0;
    }
    if (*eval) {
      PipelineConfig config = make_config(eval_args);
      config.workers = workers;
      const BatchReport report = run_batch(manifest, config, eval_out);
      if (!eval_out.empty())
        write_batch_report(report, eval_out);
      std::cout << batch_report_json(report);
      return report.exit_code();
    }
    if (*warp) {
      const Raster mov = load_image(warp_in);
      const TransformFile file = load_transform_file(warp_transform);
      save_png(warp_with_file(mov, file, warp_level, parse_interp(warp_interp)), warp_out);
      return 0;
    }
    if (*serve) {
      TileServiceOptions opts;
      opts.pairs_dir = pairs_dir;
      opts.default_interpolation = parse_interp(serve_interp);
      opts.tile_size = tile_size;
      std::cerr << "serving " << pairs_dir << " on http://" << host << ":" << port << "\n";
      return serve_tiles(opts, host, port);
    }
    if (*pyr) {
      Pyramid::build(load_image(pyr_in), pyr_tile).write(pyr_out);
      return 0;
    }
    if (*fixture) {
      write_fixture_model(FixtureSpec::vgg16(), fixture_out);
      return 0;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
