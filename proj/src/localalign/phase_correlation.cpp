#include "slidereg/localalign/phase_correlation.hpp"

#include "slidereg/error.hpp"
#include "slidereg/preprocess/color.hpp"

#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>

namespace slidereg {

namespace {

int next_pow2(int n) {
  int p = 1;
  while (p < n)
    p <<= 1;
  return p;
}

// Parabolic vertex offset through (-1, l), (0, c), (+1, r).
double parabolic(double l, double c, double r) {
  const double denom = l - 2.0 * c + r;
  if (std::abs(denom) < 1e-15)
    return 0.0;
  return std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

OffsetResult correlate(const cv::Mat &a64, const cv::Mat &b64) {
  if (a64.size() != b64.size())
    throw Error("phase correlation needs inputs of equal size");
  OffsetResult out;
  cv::Scalar ma, sa, mb, sb;
  cv::meanStdDev(a64, ma, sa);
  cv::meanStdDev(b64, mb, sb);
  if (sa[0] <= 0.0 || sb[0] <= 0.0) {
    out.degenerate = true;
    return out;
  }
  const int h = next_pow2(a64.rows), w = next_pow2(a64.cols);
  cv::Mat pa = cv::Mat::zeros(h, w, CV_64F), pb = cv::Mat::zeros(h, w, CV_64F);
  cv::Mat(a64 - ma[0]).copyTo(pa(cv::Rect(0, 0, a64.cols, a64.rows)));
  cv::Mat(b64 - mb[0]).copyTo(pb(cv::Rect(0, 0, b64.cols, b64.rows)));

  cv::Mat fa, fb, cross;
  cv::dft(pa, fa, cv::DFT_COMPLEX_OUTPUT);
  cv::dft(pb, fb, cv::DFT_COMPLEX_OUTPUT);
  // conj(A) * B, normalized per bin.
  cv::mulSpectrums(fb, fa, cross, 0, true);
  for (int y = 0; y < h; ++y) {
    auto *row = cross.ptr<cv::Vec2d>(y);
    for (int x = 0; x < w; ++x) {
      const double mag = std::hypot(row[x][0], row[x][1]);
      row[x] /= (mag + 1e-12);
    }
  }
  cv::Mat corr;
  cv::dft(cross, corr, cv::DFT_INVERSE | cv::DFT_REAL_OUTPUT | cv::DFT_SCALE);

  cv::Point loc;
  double peak = 0.0;
  cv::minMaxLoc(corr, nullptr, &peak, nullptr, &loc);
  auto at = [&](int x, int y) { return corr.at<double>((y + h) % h, (x + w) % w); };
  const double fx = parabolic(at(loc.x - 1, loc.y), peak, at(loc.x + 1, loc.y));
  const double fy = parabolic(at(loc.x, loc.y - 1), peak, at(loc.x, loc.y + 1));

  out.shift_x = loc.x > w / 2 ? loc.x - w : loc.x;
  out.shift_y = loc.y > h / 2 ? loc.y - h : loc.y;
  out.dx = out.shift_x + fx;
  out.dy = out.shift_y + fy;
  out.peak = std::clamp(peak, 0.0, 1.0);
  return out;
}

cv::Mat to_double(const Raster &r) {
  const Raster g = to_greyscale(r);
  cv::Mat m(g.height, g.width, CV_64F);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      m.at<double>(y, x) = g.at(x, y);
  return m;
}

cv::Mat to_double(const TissueMask &mask) {
  cv::Mat m(mask.height, mask.width, CV_64F);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      m.at<double>(y, x) = mask.at(x, y) ? 1.0 : 0.0;
  return m;
}

} // namespace

OffsetResult phase_correlation(const Raster &a, const Raster &b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("phase correlation needs inputs of equal size");
  if (a.empty())
    throw Error("phase correlation needs nonempty inputs");
  OffsetResult r = correlate(to_double(a), to_double(b));
  r.downsample = a.downsample;
  return r;
}

OffsetResult phase_correlation(const TissueMask &a, const TissueMask &b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("phase correlation needs inputs of equal size");
  if (a.width == 0 || a.height == 0)
    throw Error("phase correlation needs nonempty inputs");
  return correlate(to_double(a), to_double(b));
}

PlanarTransform apply_offset(const PlanarTransform &t, const OffsetResult &offset,
                             bool integer_only) {
  const double k = offset.downsample / std::ldexp(1.0, t.level);
  const double dx = integer_only ? offset.shift_x : offset.dx;
  const double dy = integer_only ? offset.shift_y : offset.dy;
  PlanarTransform shift = PlanarTransform::translation(dx * k, dy * k, t.level);
  shift.kind = TransformKind::Rigid;
  PlanarTransform out = compose(shift, t);
  out.kind = t.kind;
  return out;
}

} // namespace slidereg
