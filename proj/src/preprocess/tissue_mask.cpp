#include "slidereg/preprocess/tissue_mask.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"
#include "slidereg/preprocess/color.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slidereg {

std::string_view to_string(MaskFlavor flavor) {
  switch (flavor) {
  case MaskFlavor::TS:
    return "ts";
  case MaskFlavor::TSEF:
    return "tsef";
  case MaskFlavor::External:
    return "external";
  }
  return "ts";
}

TissueMask::TissueMask(int w, int h, MaskFlavor f)
    : width(w), height(h),
      bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0),
      flavor(f) {}

std::size_t TissueMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

Raster TissueMask::to_raster() const {
  Raster out(width, height, 1);
  for (std::size_t i = 0; i < bits.size(); ++i)
    out.data[i] = bits[i] ? 255 : 0;
  return out;
}

TissueMask TissueMask::from_raster(const Raster &raster, MaskFlavor flavor,
                                   std::uint8_t threshold) {
  if (raster.channels != 1)
    throw Error("mask rasters must be single-channel");
  TissueMask m(raster.width, raster.height, flavor);
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    m.bits[i] = raster.data[i] >= threshold ? 1 : 0;
  return m;
}

namespace {

cv::Mat to_mat(const TissueMask &m) {
  cv::Mat out(m.height, m.width, CV_8U);
  for (int y = 0; y < m.height; ++y) {
    auto *row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.width; ++x)
      row[x] = m.at(x, y) ? 255 : 0;
  }
  return out;
}

TissueMask from_mat(const cv::Mat &mat, MaskFlavor flavor) {
  TissueMask m(mat.cols, mat.rows, flavor);
  for (int y = 0; y < mat.rows; ++y) {
    const auto *row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x)
      m.set(x, y, row[x] != 0);
  }
  return m;
}

void open_close(cv::Mat &mask, int radius) {
  if (radius <= 0)
    return;
  const cv::Mat disk = cv::getStructuringElement(
      cv::MORPH_ELLIPSE, cv::Size(2 * radius + 1, 2 * radius + 1));
  cv::morphologyEx(mask, mask, cv::MORPH_OPEN, disk);
  cv::morphologyEx(mask, mask, cv::MORPH_CLOSE, disk);
}

void fill_holes(cv::Mat &mask) {
  cv::Mat padded;
  cv::copyMakeBorder(mask, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, 0);
  cv::floodFill(padded, cv::Point(0, 0), 128);
  const cv::Mat inner = padded(cv::Rect(1, 1, mask.cols, mask.rows));
  mask.setTo(255, inner == 0);
}

void remove_small_components(cv::Mat &mask, double min_fraction) {
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(mask, labels, stats, centroids, 8);
  const double min_area = min_fraction * static_cast<double>(mask.total());
  for (int label = 1; label < n; ++label) {
    if (stats.at<int>(label, cv::CC_STAT_AREA) < min_area)
      mask.setTo(0, labels == label);
  }
}

} // namespace

TissueMask segment_tissue(const Raster &raster, MaskFlavor flavor,
                          const SegmentationOptions &options) {
  if (flavor == MaskFlavor::External)
    throw Error("external masks are loaded from a file, not segmented");
  if (raster.empty())
    throw Error("cannot segment an empty raster");
  const Raster grey = to_greyscale(raster);
  cv::Mat inverted;
  cv::subtract(cv::Scalar(255), mat_view(grey), inverted);

  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(inverted, &lo, &hi);
  if (hi - lo < 1.0)
    return TissueMask(raster.width, raster.height, flavor);

  cv::Mat ts;
  cv::threshold(inverted, ts, 0, 255, cv::THRESH_BINARY | cv::THRESH_OTSU);
  open_close(ts, options.morphology_radius);
  fill_holes(ts);
  remove_small_components(ts, options.min_component_fraction);
  if (flavor == MaskFlavor::TS)
    return from_mat(ts, flavor);

  // Texture-sparse (fatty) pixels: local standard deviation below the
  // configured percentile of the tissue pixels.
  cv::Mat g;
  mat_view(grey).convertTo(g, CV_64F);
  cv::Mat mean, mean_sq;
  const cv::Size window(options.texture_window, options.texture_window);
  cv::boxFilter(g, mean, CV_64F, window, cv::Point(-1, -1), true, cv::BORDER_REFLECT);
  cv::boxFilter(g.mul(g), mean_sq, CV_64F, window, cv::Point(-1, -1), true,
                cv::BORDER_REFLECT);
  cv::Mat stddev(g.size(), CV_64F);
  std::vector<double> tissue_std;
  for (int y = 0; y < g.rows; ++y) {
    const auto *m = mean.ptr<double>(y);
    const auto *m2 = mean_sq.ptr<double>(y);
    const auto *t = ts.ptr<std::uint8_t>(y);
    auto *s = stddev.ptr<double>(y);
    for (int x = 0; x < g.cols; ++x) {
      s[x] = std::sqrt(std::max(0.0, m2[x] - m[x] * m[x]));
      if (t[x])
        tissue_std.push_back(s[x]);
    }
  }
  if (tissue_std.empty())
    return TissueMask(raster.width, raster.height, flavor);
  const auto k = static_cast<std::size_t>(
      std::floor(options.texture_percentile * static_cast<double>(tissue_std.size() - 1)));
  std::nth_element(tissue_std.begin(), tissue_std.begin() + static_cast<long>(k),
                   tissue_std.end());
  const double cutoff = tissue_std[k];

  cv::Mat tsef = ts.clone();
  for (int y = 0; y < g.rows; ++y) {
    const auto *s = stddev.ptr<double>(y);
    auto *t = tsef.ptr<std::uint8_t>(y);
    for (int x = 0; x < g.cols; ++x)
      if (s[x] < cutoff)
        t[x] = 0;
  }
  open_close(tsef, options.morphology_radius);
  remove_small_components(tsef, options.min_component_fraction);
  cv::bitwise_and(tsef, ts, tsef);
  return from_mat(tsef, flavor);
}

TissueMask load_external_mask(const std::filesystem::path &path) {
  const Raster r = load_image(path);
  if (r.channels != 1)
    throw Error("external mask must be single-channel: " + path.string());
  return TissueMask::from_raster(r, MaskFlavor::External);
}

TissueMask resize_mask(const TissueMask &mask, int width, int height) {
  if (mask.width == width && mask.height == height)
    return mask;
  cv::Mat out;
  cv::resize(to_mat(mask), out, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  return from_mat(out, mask.flavor);
}

Rect union_tissue_bbox(const TissueMask &a, const TissueMask &b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("union_tissue_bbox needs masks in the same frame");
  int x0 = a.width, y0 = a.height, x1 = -1, y1 = -1;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (a.at(x, y) || b.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0)
    throw Error("empty tissue mask");
  const int mx = static_cast<int>(std::ceil(0.02 * (x1 - x0 + 1)));
  const int my = static_cast<int>(std::ceil(0.02 * (y1 - y0 + 1)));
  x0 = std::max(0, x0 - mx);
  y0 = std::max(0, y0 - my);
  x1 = std::min(a.width - 1, x1 + mx);
  y1 = std::min(a.height - 1, y1 + my);
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double dice(const TissueMask &a, const TissueMask &b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("dice needs masks of equal size");
  std::size_t inter = 0, total = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    total += a.bits[i] + b.bits[i];
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

} // namespace slidereg
