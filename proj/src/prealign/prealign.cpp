#include "slidereg/prealign/prealign.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/resample.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace slidereg {

namespace {

struct Bounds {
  double x0, y0, x1, y1;
};

// Bounding box of the mask foreground, or nullopt-like empty flag.
bool foreground_bounds(const TissueMask &m, Bounds &out) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0)
    return false;
  out = {double(x0), double(y0), double(x1), double(y1)};
  return true;
}

// Normalizes an angle into (-180, 180].
double wrap_angle(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a <= -180.0)
    a += 360.0;
  if (a > 180.0)
    a -= 360.0;
  return a;
}

bool better(double dice, double angle, double best_dice, double best_angle) {
  constexpr double tie = 1e-12;
  if (dice > best_dice + tie)
    return true;
  if (dice < best_dice - tie)
    return false;
  const double a = std::abs(angle), b = std::abs(best_angle);
  if (a != b)
    return a < b;
  return angle > best_angle;
}

} // namespace

Point2 center_of_mass(const Raster &grey, const TissueMask &mask) {
  if (grey.channels != 1)
    throw Error("center_of_mass expects a greyscale raster");
  if (mask.width != grey.width || mask.height != grey.height)
    throw Error("mask dimensions differ from the raster");
  if (mask.empty())
    throw Error("empty tissue mask");
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (int y = 0; y < grey.height; ++y) {
    for (int x = 0; x < grey.width; ++x) {
      if (!mask.at(x, y))
        continue;
      const double w = 255.0 - grey.at(x, y);
      sw += w;
      sx += w * x;
      sy += w * y;
    }
  }
  if (sw <= 0.0)
    throw Error("centre of mass undefined: tissue region has zero weight");
  return {sx / sw, sy / sw};
}

double rotated_overlap(const TissueMask &ref, const TissueMask &moving,
                       const PlanarTransform &base, const Point2 &center,
                       double angle_deg) {
  Bounds rb{}, mb{};
  const bool has_ref = foreground_bounds(ref, rb);
  if (!foreground_bounds(moving, mb))
    throw Error("empty tissue mask");
  const PlanarTransform t =
      compose(PlanarTransform::rotation_about(angle_deg, center, base.level), base);
  const Eigen::Matrix3d inv = t.inverse().m;

  // Evaluation window: reference foreground plus the mapped moving foreground.
  double x0 = has_ref ? rb.x0 : std::numeric_limits<double>::infinity();
  double y0 = has_ref ? rb.y0 : x0;
  double x1 = has_ref ? rb.x1 : -std::numeric_limits<double>::infinity();
  double y1 = has_ref ? rb.y1 : x1;
  for (double cx : {mb.x0, mb.x1})
    for (double cy : {mb.y0, mb.y1}) {
      const Point2 p = t.apply({cx, cy});
      x0 = std::min(x0, p.x());
      y0 = std::min(y0, p.y());
      x1 = std::max(x1, p.x());
      y1 = std::max(y1, p.y());
    }
  const int ix0 = static_cast<int>(std::floor(x0)) - 1;
  const int iy0 = static_cast<int>(std::floor(y0)) - 1;
  const int ix1 = static_cast<int>(std::ceil(x1)) + 1;
  const int iy1 = static_cast<int>(std::ceil(y1)) + 1;

  std::size_t inter = 0, mapped = 0, ref_count = ref.count();
  for (int y = iy0; y <= iy1; ++y) {
    const double qx_row = inv(0, 1) * y + inv(0, 2);
    const double qy_row = inv(1, 1) * y + inv(1, 2);
    const bool ref_row = y >= 0 && y < ref.height;
    for (int x = ix0; x <= ix1; ++x) {
      const auto qx = static_cast<int>(std::floor(inv(0, 0) * x + qx_row + 0.5));
      const auto qy = static_cast<int>(std::floor(inv(1, 0) * x + qy_row + 0.5));
      if (qx < 0 || qy < 0 || qx >= moving.width || qy >= moving.height ||
          !moving.at(qx, qy))
        continue;
      ++mapped;
      if (ref_row && x >= 0 && x < ref.width && ref.at(x, y))
        ++inter;
    }
  }
  const std::size_t denom = ref_count + mapped;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(denom);
}

RotationSearchResult exhaustive_rotation(const TissueMask &ref,
                                         const TissueMask &moving,
                                         const PlanarTransform &base,
                                         const Point2 &center,
                                         const PrealignOptions &options) {
  if (ref.empty() || moving.empty())
    throw Error("empty tissue mask");
  if (options.coarse_step_deg <= 0.0)
    throw Error("rotation step must be positive");

  std::vector<double> coarse;
  const int n = static_cast<int>(std::ceil(360.0 / options.coarse_step_deg - 1e-9));
  for (int k = 0; k < n; ++k)
    coarse.push_back(wrap_angle(k * options.coarse_step_deg));

  RotationSearchResult best{0.0, -1.0};
  auto consider = [&](double angle) {
    const double d = rotated_overlap(ref, moving, base, center, angle);
    if (better(d, angle, best.dice, best.angle_deg))
      best = {angle, d};
  };
  for (double a : coarse)
    consider(a);

  if (options.fine_step_deg > 0.0) {
    const double centre = best.angle_deg;
    const int m = static_cast<int>(std::floor(options.fine_span_deg / options.fine_step_deg + 1e-9));
    for (int k = -m; k <= m; ++k) {
      if (k == 0)
        continue;
      consider(wrap_angle(centre + k * options.fine_step_deg));
    }
  }
  return best;
}

RotationSearchResult exhaustive_rotation(const TissueMask &ref,
                                         const TissueMask &moving_translated,
                                         const PrealignOptions &options) {
  if (ref.empty())
    throw Error("empty tissue mask");
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < ref.height; ++y)
    for (int x = 0; x < ref.width; ++x)
      if (ref.at(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
  const Point2 center{sx / n, sy / n};
  return exhaustive_rotation(ref, moving_translated, PlanarTransform::identity(),
                             center, options);
}

PrealignResult prealign(const Raster &grey_ref, const TissueMask &mask_ref,
                        const Raster &grey_mov, const TissueMask &mask_mov,
                        const PrealignOptions &options) {
  PrealignResult r;
  r.com_ref = center_of_mass(grey_ref, mask_ref);
  r.com_mov = center_of_mass(grey_mov, mask_mov);
  const Point2 shift = r.com_ref - r.com_mov;
  const PlanarTransform translate =
      PlanarTransform::translation(shift.x(), shift.y(), grey_ref.level);

  const RotationSearchResult rot =
      exhaustive_rotation(mask_ref, mask_mov, translate, r.com_ref, options);
  r.rotation_deg = rot.angle_deg;
  r.overlap_score = rot.dice;
  r.transform = compose(
      PlanarTransform::rotation_about(rot.angle_deg, r.com_ref, grey_ref.level),
      translate);
  r.transform.kind = TransformKind::Rigid;

  const Raster warped = resample(mask_mov.to_raster(), r.transform, mask_ref.width,
                                 mask_ref.height, Interpolation::Nearest, 0);
  r.crop = union_tissue_bbox(mask_ref,
                             TissueMask::from_raster(warped, mask_mov.flavor));
  return r;
}

} // namespace slidereg
