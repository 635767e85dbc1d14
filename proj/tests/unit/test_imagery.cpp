#include "test_support.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/imagery/pyramid.hpp"
#include "slidereg/imagery/resample.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <fstream>
#include <random>

using namespace slidereg;

namespace {

Raster random_raster(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Raster r(w, h, c);
  for (auto &v : r.data)
    v = static_cast<std::uint8_t>(rng() & 0xff);
  return r;
}

} // namespace

TEST_CASE("raster data length is width * height * channels") {
  Raster r(7, 5, 3);
  CHECK(r.data.size() == 7u * 5u * 3u);
  CHECK_THROWS_AS(Raster(2, 2, 2), Error);
}

TEST_CASE("load_image: white png") {
  const auto dir = testing::scratch_dir("imagery_white");
  cv::Mat white(64, 64, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::imwrite((dir / "white.png").string(), white);
  const Raster r = load_image(dir / "white.png");
  CHECK(r.width == 64);
  CHECK(r.height == 64);
  CHECK(r.channels == 3);
  CHECK(std::all_of(r.data.begin(), r.data.end(), [](auto v) { return v == 255; }));
}

TEST_CASE("load_image: truncated file is a corrupt image") {
  const auto dir = testing::scratch_dir("imagery_truncated");
  const Raster src = random_raster(32, 32, 3, 1);
  const auto bytes = encode_png(src);
  std::ofstream(dir / "cut.png", std::ios::binary)
      .write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 3));
  try {
    load_image(dir / "cut.png");
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("corrupt image") != std::string::npos);
  }
}

TEST_CASE("load_image: 16-bit tiff normalized by its max") {
  const auto dir = testing::scratch_dir("imagery_tiff16");
  cv::Mat m(9, 11, CV_16UC1);
  std::mt19937 rng(3);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(rng() % 4096);
  m.at<std::uint16_t>(4, 5) = 4095;
  REQUIRE(cv::imwrite((dir / "deep.tif").string(), m));
  const Raster r = load_image(dir / "deep.tif");
  REQUIRE(r.channels == 1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      // exact rational rounding: floor((2 v 255 + 4095) / (2 4095))
      const std::uint64_t v = m.at<std::uint16_t>(y, x);
      const std::uint64_t expect = (2 * v * 255 + 4095) / (2 * 4095);
      CHECK(r.at(x, y) == expect);
    }
  CHECK(r.at(5, 4) == 255);
}

TEST_CASE("load_image: unsupported channel count is rejected") {
  const auto dir = testing::scratch_dir("imagery_rgba");
  cv::Mat rgba(8, 8, CV_8UC4, cv::Scalar(1, 2, 3, 4));
  cv::imwrite((dir / "rgba.png").string(), rgba);
  CHECK_THROWS_AS(load_image(dir / "rgba.png"), Error);
  CHECK_THROWS_AS(load_image(dir / "missing.png"), Error);
}

TEST_CASE("png encode/decode round trip") {
  for (int c : {1, 3}) {
    const Raster r = random_raster(37, 19, c, 10 + c);
    CHECK(decode_png(encode_png(r)) == r);
  }
}

TEST_CASE("pyramid levels halve until the tile size") {
  const Pyramid p = Pyramid::build(Raster(1024, 1024, 1, 200), 256);
  REQUIRE(p.level_count() == 3);
  CHECK(p.level(0).width == 1024);
  CHECK(p.level(1).width == 512);
  CHECK(p.level(2).width == 256);
  CHECK(p.level(2).downsample == 4.0);

  CHECK(Pyramid::build(Raster(1, 1, 3, 7)).level_count() == 1);

  const Pyramid odd = Pyramid::build(Raster(1001, 333, 1), 64);
  for (int l = 1; l < odd.level_count(); ++l) {
    CHECK(odd.level(l).width == (odd.level(l - 1).width + 1) / 2);
    CHECK(odd.level(l).height == (odd.level(l - 1).height + 1) / 2);
  }
  CHECK(std::min(odd.levels().back().width, odd.levels().back().height) <= 64);
}

TEST_CASE("pyramid halving rounds half up") {
  Raster checker(2, 2, 1);
  checker.data = {0, 255, 255, 0};
  const Pyramid p = Pyramid::build(checker, 1);
  REQUIRE(p.level_count() == 2);
  const Raster top = p.level_raster(1);
  CHECK(top.width == 1);
  CHECK(top.at(0, 0) == 128);
}

TEST_CASE("pyramid directory round trip") {
  const auto dir = testing::scratch_dir("imagery_pyramid");
  const Raster r = random_raster(300, 170, 3, 5);
  const Pyramid p = Pyramid::build(r, 64);
  p.write(dir / "pyr");
  std::ifstream in(dir / "pyr" / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  for (const char *key : {"width", "height", "tile_size", "levels"})
    CHECK(manifest.contains(key));
  CHECK(std::filesystem::exists(dir / "pyr" / "L0" / "0_0.png"));
  const Pyramid q = Pyramid::open(dir / "pyr");
  REQUIRE(q.level_count() == p.level_count());
  for (int l = 0; l < p.level_count(); ++l)
    CHECK(q.level_raster(l) == p.level_raster(l));
  CHECK(load_image(dir / "pyr") == r);
}

TEST_CASE("read_region") {
  const Raster r = random_raster(200, 150, 3, 7);
  const Pyramid p = Pyramid::build(r, 64);

  SUBCASE("full level") {
    for (int l = 0; l < p.level_count(); ++l)
      CHECK(read_region(p, l, {0, 0, p.level(l).width, p.level(l).height}) == p.level_raster(l));
  }
  SUBCASE("fully outside is white") {
    const Raster out = read_region(p, 0, {500, 500, 20, 10});
    CHECK(std::all_of(out.data.begin(), out.data.end(), [](auto v) { return v == 255; }));
  }
  SUBCASE("straddling the right edge") {
    const Rect rect{180, 20, 50, 30};
    CHECK(read_region(p, 0, rect) == crop(r, rect));
    const Raster out = read_region(p, 0, rect);
    CHECK(out.at(19, 0, 1) == r.at(199, 20, 1));
    CHECK(out.at(20, 0, 1) == 255);
  }
  SUBCASE("invalid level") { CHECK_THROWS_AS(read_region(p, 9, {0, 0, 4, 4}), Error); }
  SUBCASE("adjacent reads stitch to one larger read") {
    const Raster whole = read_region(p, 0, {30, 40, 120, 80});
    const Raster left = read_region(p, 0, {30, 40, 70, 80});
    const Raster right = read_region(p, 0, {100, 40, 50, 80});
    for (int y = 0; y < 80; ++y)
      for (int x = 0; x < 120; ++x)
        for (int c = 0; c < 3; ++c)
          CHECK(whole.at(x, y, c) == (x < 70 ? left.at(x, y, c) : right.at(x - 70, y, c)));
  }
  SUBCASE("directory pyramid matches in-memory pyramid") {
    const auto dir = testing::scratch_dir("imagery_region");
    p.write(dir / "p");
    const Pyramid q = Pyramid::open(dir / "p");
    for (const Rect &rect : {Rect{-10, -10, 90, 70}, Rect{60, 60, 100, 100}, Rect{0, 0, 200, 150}})
      CHECK(read_region(q, 0, rect) == read_region(p, 0, rect));
  }
}

TEST_CASE("resample: identity is a bit-exact copy") {
  const Raster r = random_raster(31, 23, 3, 11);
  CHECK(resample(r, PlanarTransform::identity(), 31, 23, Interpolation::Nearest) == r);
  CHECK(resample(r, PlanarTransform::identity(), 31, 23, Interpolation::Bilinear) == r);
}

TEST_CASE("resample: integer translation") {
  const Raster r = random_raster(20, 16, 1, 12);
  const Raster out =
      resample(r, PlanarTransform::translation(5, -3), 20, 16, Interpolation::Nearest);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x) {
      const int sx = x - 5, sy = y + 3;
      CHECK(out.at(x, y) == (r.contains(sx, sy) ? r.at(sx, sy) : 255));
    }
  const Raster back =
      resample(out, PlanarTransform::translation(-5, 3), 20, 16, Interpolation::Nearest);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x)
      if (r.contains(x + 5, y - 3) && x + 5 < 20 && y - 3 >= 0)
        CHECK(back.at(x, y) == r.at(x, y));
}

TEST_CASE("resample: 90 degree rotation of a 3x3 pattern") {
  Raster r(3, 3, 1);
  r.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  // (x, y) -> (2 - y, x): a quarter turn about the centre pixel
  const Raster out = resample(r, PlanarTransform::rotation_about(90, {1, 1}), 3, 3,
                              Interpolation::Nearest);
  const std::vector<std::uint8_t> expect{7, 4, 1, 8, 5, 2, 9, 6, 3};
  CHECK(out.data == expect);
}

TEST_CASE("resample: singular transform is rejected") {
  PlanarTransform t;
  t.m(0, 0) = 0;
  CHECK_THROWS_AS(resample(Raster(4, 4, 1), t, 4, 4, Interpolation::Nearest), Error);
}

TEST_CASE("resample: sub-region with origins equals the full warp") {
  const Raster r = random_raster(120, 90, 3, 13);
  PlanarTransform t = compose(PlanarTransform::translation(7.25, -3.5),
                              PlanarTransform::rotation_about(17, {60, 45}));
  for (auto mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
    const Raster full = resample(r, t, 120, 90, mode);
    const Rect out_rect{40, 30, 50, 40};
    const Rect need = source_footprint(t, out_rect);
    const Raster part =
        resample(crop(r, need), t, out_rect.w, out_rect.h, mode, kBackgroundFill,
                 {double(need.x), double(need.y)}, {double(out_rect.x), double(out_rect.y)});
    CHECK(part == crop(full, out_rect));
  }
}
