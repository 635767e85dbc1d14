#include "slidereg/pipeline/pipeline.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/imagery/pyramid.hpp"
#include "slidereg/imagery/resample.hpp"
#include "slidereg/preprocess/histogram.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>

namespace slidereg {

void PipelineConfig::validate() const {
  if (match_count < 4)
    throw Error("match count must be at least 4");
  for (const auto &s : {prealign_scale, dfbr_scale, export_scale})
    if (s && !(*s > 0.0 && *s <= 1.0))
      throw Error("working scales must lie in (0, 1]");
  if (prealign_scale && dfbr_scale && *prealign_scale > *dfbr_scale)
    throw Error("prealign scale must not exceed the dfbr scale");
  if (workers < 1)
    throw Error("worker count must be at least 1");
}

namespace {

Eigen::Matrix3d centre_map(double f) {
  const double c = 0.5 * (f - 1.0);
  Eigen::Matrix3d a;
  a << f, 0, c, 0, f, c, 0, 0, 1;
  return a;
}

bool is_power_of_two(double f, int &halvings) {
  halvings = 0;
  if (f < 1.0 || f != std::floor(f) || f > 1e9)
    return false;
  auto n = static_cast<long long>(f);
  if ((n & (n - 1)) != 0)
    return false;
  while (n > 1) {
    n >>= 1;
    ++halvings;
  }
  return true;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Prepared {
  Raster color;        // working-scale raster, original channels
  Raster grey;         // greyscale for prealign
  TissueMask ts;       // full tissue mask (prealign, offset, histograms)
  TissueMask features; // configured flavor (feature admissibility)
};

Prepared prepare(const Raster &level0, double factor, const TissueMask *external,
                 const PipelineConfig &config) {
  Prepared p;
  p.color = working_raster(level0, factor);
  p.grey = to_greyscale(p.color);
  if (external) {
    p.ts = resize_mask(*external, p.color.width, p.color.height);
    p.ts.flavor = MaskFlavor::External;
    p.features = p.ts;
  } else {
    p.ts = segment_tissue(p.color, MaskFlavor::TS, config.segmentation);
    p.features = config.mask_flavor == MaskFlavor::TSEF
                     ? segment_tissue(p.color, MaskFlavor::TSEF, config.segmentation)
                     : p.ts;
  }
  return p;
}

TissueMask warp_mask(const TissueMask &mask, const PlanarTransform &t, int w, int h) {
  const Raster r = resample(mask.to_raster(), t, w, h, Interpolation::Nearest, 0);
  return TissueMask::from_raster(r, mask.flavor);
}

nlohmann::ordered_json frame_json(const Raster &ref, const Raster &mov, const WorkingScales &s,
                                  const PipelineConfig &c) {
  nlohmann::ordered_json f;
  f["reference"] = {{"width", ref.width}, {"height", ref.height}};
  f["moving"] = {{"width", mov.width}, {"height", mov.height}};
  f["downsample"] = {{"prealign", s.prealign}, {"dfbr", s.dfbr}, {"export", s.export_}};
  f["mode"] = std::string(to_string(c.mode));
  f["mask"] = std::string(to_string(c.mask_flavor));
  f["match_count"] = c.match_count;
  f["estimation"] = std::string(to_string(c.estimate.kind));
  return f;
}

} // namespace

PlanarTransform working_to_level0(const PlanarTransform &t, double factor) {
  const Eigen::Matrix3d a = centre_map(factor);
  PlanarTransform out = t;
  out.m = a * t.m * a.inverse();
  out.m.row(2) << 0, 0, 1;
  out.level = 0;
  return out;
}

PlanarTransform level0_to_working(const PlanarTransform &t, double factor) {
  const Eigen::Matrix3d a = centre_map(factor);
  PlanarTransform out = t;
  out.m = a.inverse() * t.m * a;
  out.m.row(2) << 0, 0, 1;
  out.level = 0;
  return out;
}

WorkingScales choose_working_scales(int max_dimension, const PipelineConfig &config) {
  WorkingScales s;
  if (config.prealign_scale) {
    s.prealign = 1.0 / *config.prealign_scale;
  } else {
    double f = 1.0;
    while (max_dimension / f > kPrealignMaxDimension)
      f *= 2.0;
    s.prealign = f;
  }
  s.dfbr = config.dfbr_scale ? 1.0 / *config.dfbr_scale : std::max(1.0, s.prealign / 2.0);
  s.export_ = config.export_scale ? 1.0 / *config.export_scale : std::max(1.0, s.prealign / 4.0);
  return s;
}

Raster working_raster(const Raster &level0, double factor) {
  if (factor < 1.0)
    throw Error("working downsample factor must be >= 1");
  int halvings = 0;
  Raster out;
  if (is_power_of_two(factor, halvings)) {
    out = level0;
    for (int i = 0; i < halvings; ++i)
      out = halve(out);
  } else {
    const int w = std::max(1, static_cast<int>(std::lround(level0.width / factor)));
    const int h = std::max(1, static_cast<int>(std::lround(level0.height / factor)));
    out = resize(level0, w, h);
  }
  out.level = 0;
  out.downsample = factor;
  return out;
}

std::filesystem::path resolve_model_path(const PipelineConfig &config) {
  if (!config.model_path.empty())
    return config.model_path;
  if (const char *env = std::getenv(kModelEnvVar); env && *env)
    return env;
  throw Error(std::string("no model given: pass --model or set ") + kModelEnvVar);
}

RegistrationResult register_images(const Raster &ref, const Raster &mov,
                                   const Extractor &extractor, const PipelineConfig &config,
                                   const TissueMask *ref_mask, const TissueMask *mov_mask) {
  config.validate();
  RegistrationResult result;
  result.scales = choose_working_scales(
      std::max({ref.width, ref.height, mov.width, mov.height}), config);
  const WorkingScales &sc = result.scales;
  result.file.frame = frame_json(ref, mov, sc, config);
  result.file.transform = PlanarTransform::identity();

  std::string stage = kStagePrealign;
  auto fail = [&](const std::string &message, StageDiagnostics diag, Clock::time_point t0) {
    diag.ok = false;
    diag.message = message;
    diag.seconds = seconds_since(t0);
    result.stages.push_back(diag);
    result.partial = true;
    result.error = message;
    result.file.partial = true;
    result.file.failed_stage = stage;
    result.file.error = message;
  };

  // Pre-alignment.
  auto t0 = Clock::now();
  StageDiagnostics diag = StageDiagnostics::named(kStagePrealign);
  PlanarTransform current0;
  try {
    const Prepared r = prepare(ref, sc.prealign, ref_mask, config);
    const Prepared m = prepare(mov, sc.prealign, mov_mask, config);
    const PrealignResult pre = prealign(r.grey, r.ts, m.grey, m.ts, config.prealign);
    current0 = working_to_level0(pre.transform, sc.prealign);
    current0.kind = TransformKind::Rigid;
    diag.ok = true;
    diag.score = pre.overlap_score;
    diag.seconds = seconds_since(t0);
    result.stages.push_back(diag);
    result.file.set_stage(kStagePrealign, current0);
    result.file.transform = current0;
  } catch (const Error &e) {
    fail(e.what(), diag, t0);
    return result;
  }

  // Feature stages and offset at the dfbr scale.
  Prepared r, m;
  Raster ref_feat, mov_feat;
  try {
    r = prepare(ref, sc.dfbr, ref_mask, config);
    m = prepare(mov, sc.dfbr, mov_mask, config);
    ref_feat = apply_preproc_mode(r.color, config.mode);
    mov_feat = apply_preproc_mode(m.color, config.mode);
    if (config.histogram_matching && config.mode != PreprocMode::Rgb) {
      const TissueMask *rm = r.ts.empty() ? nullptr : &r.ts;
      const TissueMask *mm = m.ts.empty() ? nullptr : &m.ts;
      MatchedPair matched = histogram_match(ref_feat, mov_feat, rm, mm);
      ref_feat = std::move(matched.first);
      mov_feat = std::move(matched.second);
    }
  } catch (const Error &e) {
    stage = kStageTissue;
    fail(e.what(), StageDiagnostics::named(kStageTissue), Clock::now());
    return result;
  }
  const StageInputs inputs{ref_feat, mov_feat, r.features, m.features};
  StageOptions so;
  so.match_count = config.match_count;
  so.estimate = config.estimate;
  so.mask_admissibility = config.mask_admissibility;

  auto feature_stage = [&](const char *name, auto &&run) -> bool {
    stage = name;
    auto ts = Clock::now();
    StageDiagnostics d = StageDiagnostics::named(name);
    try {
      const StageResult sr = run(level0_to_working(current0, sc.dfbr));
      current0 = working_to_level0(sr.transform, sc.dfbr);
      d.ok = true;
      d.matches = sr.matches.size();
      d.score = sr.rms_after;
      d.message = sr.message;
      if (sr.warning)
        result.warnings.push_back(std::string(name) + ": " + sr.message);
      d.seconds = seconds_since(ts);
      result.stages.push_back(d);
      result.file.set_stage(name, current0);
      result.file.transform = current0;
      return true;
    } catch (const Error &e) {
      fail(e.what(), d, ts);
      return false;
    }
  };

  if (!feature_stage(kStageTissue, [&](const PlanarTransform &t) {
        return tissue_transform(inputs, t, extractor, so);
      }))
    return result;
  if (!feature_stage(kStageBlockwise, [&](const PlanarTransform &t) {
        return blockwise_transform(inputs, t, extractor, so);
      }))
    return result;

  stage = kStageOffset;
  t0 = Clock::now();
  diag = StageDiagnostics::named(kStageOffset);
  try {
    const PlanarTransform work = level0_to_working(current0, sc.dfbr);
    if (config.apply_offset) {
      const TissueMask warped = warp_mask(m.ts, work, r.ts.width, r.ts.height);
      const double before = dice(r.ts, warped);
      OffsetResult off = phase_correlation(warped, r.ts);
      off.downsample = 1.0;
      diag.score = before;
      if (off.degenerate) {
        diag.message = "degenerate correlation; offset not applied";
        result.warnings.push_back("offset: " + diag.message);
      } else {
        const PlanarTransform candidate = apply_offset(work, off);
        const double after =
            dice(r.ts, warp_mask(m.ts, candidate, r.ts.width, r.ts.height));
        if (after >= before) {
          current0 = working_to_level0(candidate, sc.dfbr);
          current0.kind = work.kind;
          diag.score = after;
          diag.message = "applied (" + std::to_string(off.dx) + ", " + std::to_string(off.dy) + ")";
        } else {
          diag.message = "rejected: mask overlap would decrease";
        }
      }
    } else {
      diag.message = "disabled";
    }
    diag.ok = true;
    diag.seconds = seconds_since(t0);
    result.stages.push_back(diag);
    result.file.set_stage(kStageOffset, current0);
    result.file.transform = current0;
    result.warped_dfbr =
        resample(m.color, level0_to_working(current0, sc.dfbr), r.color.width, r.color.height,
                 Interpolation::Bilinear, kBackgroundFill);
  } catch (const Error &e) {
    fail(e.what(), diag, t0);
  }
  return result;
}

std::string diagnostics_json(const RegistrationResult &result) {
  nlohmann::ordered_json j;
  j["partial"] = result.partial;
  if (result.partial)
    j["error"] = result.error;
  j["downsample"] = {{"prealign", result.scales.prealign},
                     {"dfbr", result.scales.dfbr},
                     {"export", result.scales.export_}};
  auto stages = nlohmann::ordered_json::array();
  for (const auto &s : result.stages)
    stages.push_back({{"stage", s.name},
                      {"ok", s.ok},
                      {"matches", s.matches},
                      {"score", s.score},
                      {"seconds", s.seconds},
                      {"message", s.message}});
  j["stages"] = stages;
  j["warnings"] = result.warnings;
  return j.dump(2) + "\n";
}

void write_outputs(const RegistrationResult &result, const Raster &ref, const Raster &mov,
                   const std::filesystem::path &out_dir) {
  std::filesystem::create_directories(out_dir);
  save_transform_file(result.file, out_dir / "transform.json");
  write_file_atomic(out_dir / "diagnostics.json", diagnostics_json(result));
  if (!result.warped_dfbr.empty())
    save_png(result.warped_dfbr, out_dir / "moving_warped_dfbr.png");

  // Export point for an external non-rigid stage: both images at the export
  // scale with the rigid result applied to the moving one.
  const double f = result.scales.export_;
  const Raster ref_e = working_raster(ref, f);
  const Raster mov_e = working_raster(mov, f);
  const PlanarTransform t = level0_to_working(result.file.transform, f);
  const std::filesystem::path export_dir = out_dir / "export";
  std::filesystem::create_directories(export_dir);
  save_png(ref_e, export_dir / "reference.png");
  save_png(resample(mov_e, t, ref_e.width, ref_e.height, Interpolation::Bilinear,
                    kBackgroundFill),
           export_dir / "moving_rigid.png");
  nlohmann::ordered_json meta;
  meta["downsample"] = f;
  auto mat = nlohmann::ordered_json::array();
  for (int i = 0; i < 9; ++i)
    mat.push_back(t.m(i / 3, i % 3));
  meta["matrix"] = mat;
  write_file_atomic(export_dir / "export.json", meta.dump(2) + "\n");
}

RegistrationResult run_pipeline(const std::filesystem::path &ref_path,
                                const std::filesystem::path &mov_path,
                                const PipelineConfig &config, const Extractor &extractor,
                                const std::filesystem::path &out_dir) {
  const Raster ref = load_image(ref_path);
  const Raster mov = load_image(mov_path);
  std::optional<TissueMask> ref_mask, mov_mask;
  if (config.mask_flavor == MaskFlavor::External) {
    if (config.ref_mask_path.empty() || config.mov_mask_path.empty())
      throw Error("external masks need both mask paths");
    ref_mask = load_external_mask(config.ref_mask_path);
    mov_mask = load_external_mask(config.mov_mask_path);
  }
  RegistrationResult result =
      register_images(ref, mov, extractor, config, ref_mask ? &*ref_mask : nullptr,
                      mov_mask ? &*mov_mask : nullptr);
  if (!out_dir.empty())
    write_outputs(result, ref, mov, out_dir);
  return result;
}

} // namespace slidereg
