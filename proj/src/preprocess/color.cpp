#include "slidereg/preprocess/color.hpp"

#include "slidereg/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace slidereg {

std::string_view to_string(PreprocMode mode) {
  switch (mode) {
  case PreprocMode::Rgb:
    return "rgb";
  case PreprocMode::Greyscale:
    return "greyscale";
  case PreprocMode::BlueRatio:
    return "blue-ratio";
  case PreprocMode::HStain:
    return "h-stain";
  }
  return "greyscale";
}

PreprocMode parse_preproc_mode(std::string_view text) {
  if (text == "rgb")
    return PreprocMode::Rgb;
  if (text == "greyscale" || text == "grayscale")
    return PreprocMode::Greyscale;
  if (text == "blue-ratio")
    return PreprocMode::BlueRatio;
  if (text == "h-stain")
    return PreprocMode::HStain;
  throw Error("unknown preprocessing mode '" + std::string(text) + "'");
}

StainMatrix StainMatrix::haematoxylin_eosin_dab() {
  StainMatrix s;
  s.rows << 0.65, 0.70, 0.29, //
      0.07, 0.99, 0.11,       //
      0.27, 0.57, 0.78;
  return s;
}

namespace {

void require_rgb(const Raster &raster, const char *what) {
  if (raster.channels != 3)
    throw Error(std::string(what) + " expects a 3-channel raster");
}

Raster single_channel_like(const Raster &raster) {
  Raster out(raster.width, raster.height, 1);
  out.level = raster.level;
  out.downsample = raster.downsample;
  return out;
}

} // namespace

Raster to_greyscale(const Raster &raster) {
  if (raster.channels == 1)
    return raster;
  require_rgb(raster, "to_greyscale");
  Raster out = single_channel_like(raster);
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const int r = raster.data[3 * i];
    const int g = raster.data[3 * i + 1];
    const int b = raster.data[3 * i + 2];
    out.data[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

Raster blue_ratio(const Raster &raster) {
  require_rgb(raster, "blue_ratio");
  Raster out = single_channel_like(raster);
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const double r = raster.data[3 * i];
    const double g = raster.data[3 * i + 1];
    const double b = raster.data[3 * i + 2];
    const double br = 100.0 * b / (1.0 + r + g) * 256.0 / (1.0 + r + g + b);
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(br, 0.0, 255.0)));
  }
  return out;
}

Raster h_stain(const Raster &raster, const StainMatrix &stains) {
  require_rgb(raster, "h_stain");
  Eigen::Matrix3d m = stains.rows;
  for (int r = 0; r < 3; ++r) {
    const double n = m.row(r).norm();
    if (n <= 0.0)
      throw Error("stain vector must be non-zero");
    m.row(r) /= n;
  }
  if (std::abs(m.determinant()) < 1e-9)
    throw Error("stain matrix is singular");
  const Eigen::Vector3d unmix_h = m.inverse().col(0);

  std::array<double, 256> od{};
  for (int v = 0; v < 256; ++v)
    od[v] = -std::log10(std::max(v, 1) / 255.0);
  const double h_black = od[0] * unmix_h.sum();
  if (h_black <= 0.0)
    throw Error("stain matrix gives no haematoxylin response for black");

  Raster out = single_channel_like(raster);
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const double h = od[raster.data[3 * i]] * unmix_h[0] +
                     od[raster.data[3 * i + 1]] * unmix_h[1] +
                     od[raster.data[3 * i + 2]] * unmix_h[2];
    out.data[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(h / h_black, 0.0, 1.0) * 255.0));
  }
  return out;
}

Raster apply_preproc_mode(const Raster &raster, PreprocMode mode,
                          const StainMatrix &stains) {
  switch (mode) {
  case PreprocMode::Rgb:
    return raster;
  case PreprocMode::Greyscale:
    return to_greyscale(raster);
  case PreprocMode::BlueRatio:
    return raster.channels == 1 ? raster : blue_ratio(raster);
  case PreprocMode::HStain:
    return raster.channels == 1 ? raster : h_stain(raster, stains);
  }
  return raster;
}

} // namespace slidereg
