#include "test_support.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/imagery/resample.hpp"
#include "slidereg/pipeline/batch.hpp"
#include "slidereg/pipeline/pipeline.hpp"
#include "slidereg/pipeline/warp.hpp"

#include <doctest.h>

#include <fstream>

using namespace slidereg;

namespace {

PipelineConfig fixture_config() {
  PipelineConfig c;
  c.model_path = testing::fixture_model_path();
  return c;
}

void write_pair(const testing::Phantom &p, const std::filesystem::path &dir, const std::string &stem) {
  save_png(p.reference, dir / (stem + "_ref.png"));
  save_png(p.moving, dir / (stem + "_mov.png"));
  save_landmarks(p.reference_landmarks, dir / (stem + "_ref.csv"));
  save_landmarks(p.moving_landmarks, dir / (stem + "_mov.csv"));
}

} // namespace

TEST_CASE("working scales") {
  PipelineConfig c;
  WorkingScales s = choose_working_scales(1024, c);
  CHECK(s.prealign == 2.0);
  CHECK(s.dfbr == 1.0);
  CHECK(s.export_ == 1.0);
  s = choose_working_scales(40000, c);
  CHECK(s.prealign == 128.0);
  CHECK(s.dfbr == 64.0);
  CHECK(s.export_ == 32.0);
  CHECK(choose_working_scales(300, c).prealign == 1.0);
  c.prealign_scale = 0.05;
  c.dfbr_scale = 0.1;
  s = choose_working_scales(4000, c);
  CHECK(s.prealign == doctest::Approx(20.0));
  CHECK(s.dfbr == doctest::Approx(10.0));

  PipelineConfig bad;
  bad.match_count = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = PipelineConfig{};
  bad.prealign_scale = 0.5;
  bad.dfbr_scale = 0.25;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("working frame conversion") {
  const PlanarTransform t = compose(PlanarTransform::translation(3, -1),
                                    PlanarTransform::rotation_about(25, {40, 60}));
  for (double f : {1.0, 2.0, 4.0, 12.5}) {
    const PlanarTransform back = level0_to_working(working_to_level0(t, f), f);
    CHECK(max_abs_difference(back, t) <= 1e-9);
    CHECK(max_abs_difference(working_to_level0(PlanarTransform::identity(), f),
                             PlanarTransform::identity()) <= 1e-12);
  }
  CHECK(working_to_level0(PlanarTransform::translation(1, 2), 4).offset() == Point2(4, 8));
  // a rotation about a working pixel centre is a rotation about the matching level-0 centre
  const PlanarTransform r0 = working_to_level0(PlanarTransform::rotation_about(90, {10, 10}), 4);
  const Point2 c0(4 * 10 + 1.5, 4 * 10 + 1.5);
  CHECK((r0.apply(c0) - c0).norm() <= 1e-9);
}

TEST_CASE("working_raster halves by powers of two") {
  Raster r(64, 48, 1, 10);
  const Raster h = working_raster(r, 4);
  CHECK(h.width == 16);
  CHECK(h.height == 12);
  CHECK(working_raster(r, 1) == r);
  CHECK(working_raster(r, 3).width == 21);
  CHECK_THROWS_AS(working_raster(r, 0.5), Error);
}

TEST_CASE("self registration") {
  testing::PhantomOptions o;
  o.size = 512;
  const testing::Phantom p = testing::make_phantom_with_motion(41, 0, {0, 0}, o);
  const RegistrationResult r =
      register_images(p.reference, p.reference, testing::fixture_extractor(), fixture_config());
  CHECK_FALSE(r.partial);
  REQUIRE(r.stages.size() == 4);
  for (const auto &s : r.stages)
    CHECK(s.ok);
  CHECK(r.file.stages.size() == 4);
  const PlanarTransform work = level0_to_working(r.file.transform, r.scales.dfbr);
  for (const Point2 &q : {Point2(0, 0), Point2(255, 0), Point2(0, 255), Point2(255, 255)})
    CHECK((work.apply(q) - q).norm() <= 1.0);
  CHECK(r.warped_dfbr.width == 512);
}

TEST_CASE("blank moving image stops at pre-alignment") {
  testing::PhantomOptions o;
  o.size = 256;
  const testing::Phantom p = testing::make_phantom_with_motion(42, 0, {0, 0}, o);
  const Raster blank(256, 256, 3, 255);
  const RegistrationResult r =
      register_images(p.reference, blank, testing::fixture_extractor(), fixture_config());
  CHECK(r.partial);
  CHECK(r.file.partial);
  CHECK(r.file.failed_stage == kStagePrealign);
  CHECK(r.error.find("empty tissue mask") != std::string::npos);
  CHECK(r.file.stages.empty());
  const TransformFile parsed = parse_transform_file(serialize_transform_file(r.file));
  CHECK(parsed.partial);
  CHECK(parsed.failed_stage == kStagePrealign);
}

TEST_CASE("known rigid motion") {
  const testing::Phantom p = testing::make_phantom_with_motion(43, 60, {120, -80});
  const RegistrationResult r =
      register_images(p.reference, p.moving, testing::fixture_extractor(), fixture_config());
  CHECK_FALSE(r.partial);
  CHECK(testing::median_rtre(p, r.file.transform) <= 0.005);
  CHECK(std::abs(r.file.transform.rotation_degrees() - p.truth.rotation_degrees()) <= 1.0);
  CHECK(is_rigid(r.file.transform, 1e-9));
}

TEST_CASE("registration is deterministic") {
  testing::PhantomOptions o;
  o.size = 512;
  const testing::Phantom p = testing::make_phantom_with_motion(44, -35, {20, 30}, o);
  const auto a = register_images(p.reference, p.moving, testing::fixture_extractor(), fixture_config());
  const auto b = register_images(p.reference, p.moving, testing::fixture_extractor(), fixture_config());
  CHECK(serialize_transform_file(a.file) == serialize_transform_file(b.file));
}

TEST_CASE("run_pipeline writes outputs") {
  testing::PhantomOptions o;
  o.size = 512;
  const testing::Phantom p = testing::make_phantom_with_motion(45, 15, {10, 5}, o);
  const auto dir = testing::scratch_dir("pipeline_outputs");
  write_pair(p, dir, "a");
  const auto out = dir / "out";
  const RegistrationResult r = run_pipeline(dir / "a_ref.png", dir / "a_mov.png", fixture_config(),
                                            testing::fixture_extractor(), out);
  CHECK_FALSE(r.partial);
  CHECK(std::filesystem::exists(out / "transform.json"));
  CHECK(std::filesystem::exists(out / "diagnostics.json"));
  const TransformFile f = load_transform_file(out / "transform.json");
  CHECK(max_abs_difference(f.transform, r.file.transform) <= 1e-12);
  const auto diag = nlohmann::json::parse(diagnostics_json(r));
  CHECK(diag["stages"].size() == 4);

  CHECK_THROWS_AS(run_pipeline(dir / "missing.png", dir / "a_mov.png", fixture_config(),
                               testing::fixture_extractor()),
                  Error);
}

TEST_CASE("batch evaluation") {
  testing::PhantomOptions o;
  o.size = 512;
  const auto dir = testing::scratch_dir("batch");
  write_pair(testing::make_phantom_with_motion(46, 20, {15, -10}, o), dir, "p0");
  write_pair(testing::make_phantom_with_motion(47, -70, {-25, 5}, o), dir, "p1");
  {
    std::ofstream m(dir / "good.csv");
    m << "ref,mov,ref_landmarks,mov_landmarks\n"
      << "p0_ref.png,p0_mov.png,p0_ref.csv,p0_mov.csv\n"
      << "p1_ref.png,p1_mov.png,p1_ref.csv,p1_mov.csv\n";
    std::ofstream bad(dir / "bad.csv");
    bad << "p0_ref.png,p0_mov.png,p0_ref.csv,p0_mov.csv\n"
        << "p0_ref.png,nowhere.png\n";
  }
  const auto entries = load_manifest(dir / "good.csv");
  REQUIRE(entries.size() == 2);
  CHECK(entries[1].mov == dir / "p1_mov.png");
  CHECK(entries[0].has_landmarks());

  PipelineConfig c = fixture_config();
  c.workers = 2;
  const BatchReport good = run_batch(dir / "good.csv", c, dir / "out");
  CHECK(good.exit_code() == 0);
  REQUIRE(good.pairs.size() == 2);
  for (std::size_t s = 0; s < kEvaluationStages.size(); ++s)
    REQUIRE(good.stages[s].has_value());
  CHECK(good.stages[3]->mm_rtre <= 0.005);
  CHECK(good.stages[0]->mm_rtre > good.stages[3]->mm_rtre);
  write_batch_report(good, dir / "out");
  CHECK(std::filesystem::exists(dir / "out" / "pair_000" / "transform.json"));
  const auto j = nlohmann::json::parse(batch_report_json(good));
  CHECK(j["exit_code"] == 0);
  CHECK(batch_report_csv(good).rfind("pair,stage,median_rtre,max_rtre,robustness", 0) == 0);
  CHECK(boxplot_csv(good).rfind("stage,pair,median_rtre", 0) == 0);

  const BatchReport mixed = run_batch(dir / "bad.csv", fixture_config());
  REQUIRE(mixed.pairs.size() == 2);
  CHECK(mixed.pairs[0].ok);
  CHECK_FALSE(mixed.pairs[1].ok);
  CHECK_FALSE(mixed.pairs[1].error.empty());
  CHECK(mixed.exit_code() == 2);

  CHECK_THROWS_AS(load_manifest(dir / "none.csv"), Error);
}

TEST_CASE("warp through a transform file") {
  testing::PhantomOptions o;
  o.size = 256;
  const testing::Phantom p = testing::make_phantom_with_motion(48, 30, {12, -7}, o);
  TransformFile f;
  f.transform = p.truth;
  f.frame["reference"] = {{"width", 200}, {"height", 180}};
  const Raster w0 = warp_with_file(p.moving, f, 0, Interpolation::Bilinear);
  CHECK(w0.width == 200);
  CHECK(w0.height == 180);
  CHECK(w0 == resample(p.moving, p.truth, 200, 180, Interpolation::Bilinear));
  const Raster w1 = warp_with_file(p.moving, f, 1, Interpolation::Nearest);
  CHECK(w1.width == 100);
  CHECK(w1.height == 90);
  CHECK(level_dimensions(201, 181, 1) == std::pair{101, 91});
}

TEST_CASE("level pixel transform follows box-filter pixel centres") {
  // level-2 pixel (10, 20) is centred at level-0 (41.5, 81.5)
  const PlanarTransform r0 = PlanarTransform::rotation_about(140, {41.5, 81.5});
  const PlanarTransform r2 = level_pixel_transform(r0, 2);
  CHECK(r2.level == 2);
  CHECK((r2.apply({10, 20}) - Point2(10, 20)).norm() <= 1e-9);
  CHECK(r2.rotation_degrees() == doctest::Approx(140.0));
  const PlanarTransform t2 = level_pixel_transform(PlanarTransform::translation(-16, 12), 2);
  CHECK(max_abs_difference(t2, PlanarTransform::translation(-4, 3, 2)) <= 1e-12);
  CHECK(max_abs_difference(level_pixel_transform(r0, 0), r0) <= 1e-12);
}
