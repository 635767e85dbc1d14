#include "slidereg/transform/planar_transform.hpp"

#include "slidereg/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace slidereg {

std::string_view to_string(TransformKind kind) {
  switch (kind) {
  case TransformKind::Rigid:
    return "rigid";
  case TransformKind::Similarity:
    return "similarity";
  case TransformKind::Affine:
    return "affine";
  }
  return "rigid";
}

TransformKind parse_transform_kind(std::string_view text) {
  if (text == "rigid")
    return TransformKind::Rigid;
  if (text == "similarity")
    return TransformKind::Similarity;
  if (text == "affine")
    return TransformKind::Affine;
  throw Error("unknown transform kind '" + std::string(text) + "'");
}

PlanarTransform PlanarTransform::identity(int level) {
  PlanarTransform t;
  t.level = level;
  return t;
}

PlanarTransform PlanarTransform::translation(double dx, double dy, int level) {
  PlanarTransform t = identity(level);
  t.m(0, 2) = dx;
  t.m(1, 2) = dy;
  return t;
}

PlanarTransform PlanarTransform::rotation_about(double degrees,
                                                const Point2 &center,
                                                int level) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  PlanarTransform t = identity(level);
  t.m(0, 0) = c;
  t.m(0, 1) = -s;
  t.m(1, 0) = s;
  t.m(1, 1) = c;
  // p' = R (p - center) + center
  t.m(0, 2) = center.x() - (c * center.x() - s * center.y());
  t.m(1, 2) = center.y() - (s * center.x() + c * center.y());
  return t;
}

Point2 PlanarTransform::apply(const Point2 &p) const {
  return {m(0, 0) * p.x() + m(0, 1) * p.y() + m(0, 2),
          m(1, 0) * p.x() + m(1, 1) * p.y() + m(1, 2)};
}

PlanarTransform PlanarTransform::inverse() const {
  if (linear_determinant() <= 1e-12)
    throw Error("singular transform");
  PlanarTransform inv = *this;
  const Eigen::Matrix2d a_inv = linear().inverse();
  inv.m.setIdentity();
  inv.m.topLeftCorner<2, 2>() = a_inv;
  inv.m.topRightCorner<2, 1>() = -a_inv * offset();
  return inv;
}

double PlanarTransform::rotation_degrees() const {
  return std::atan2(m(1, 0) - m(0, 1), m(0, 0) + m(1, 1)) * 180.0 /
         std::numbers::pi;
}

double PlanarTransform::linear_determinant() const {
  return std::abs(linear().determinant());
}

PlanarTransform compose(const PlanarTransform &outer,
                        const PlanarTransform &inner) {
  if (outer.level != inner.level)
    throw Error("cannot compose transforms at levels " +
                std::to_string(outer.level) + " and " +
                std::to_string(inner.level));
  PlanarTransform out;
  out.level = outer.level;
  out.m = outer.m * inner.m;
  out.m.row(2) << 0.0, 0.0, 1.0;
  out.kind = std::max(outer.kind, inner.kind);
  return out;
}

PlanarTransform rescale_by_factor(const PlanarTransform &t, double factor) {
  // S m S^-1 with S = diag(k, k, 1): the linear block is unchanged.
  PlanarTransform out = t;
  out.m(0, 2) = t.m(0, 2) * factor;
  out.m(1, 2) = t.m(1, 2) * factor;
  return out;
}

PlanarTransform rescale_to_level(const PlanarTransform &t, int from_level,
                                 int to_level) {
  if (from_level < 0 || to_level < 0)
    throw Error("pyramid levels must be non-negative");
  const double k = std::ldexp(1.0, from_level - to_level);
  PlanarTransform out = rescale_by_factor(t, k);
  out.level = to_level;
  return out;
}

double max_abs_difference(const PlanarTransform &a, const PlanarTransform &b) {
  return (a.m - b.m).cwiseAbs().maxCoeff();
}

bool is_rigid(const PlanarTransform &t, double tol) {
  const Eigen::Matrix2d a = t.linear();
  const Eigen::Matrix2d gram = a.transpose() * a;
  return std::abs(a.determinant() - 1.0) <= tol &&
         (gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

} // namespace slidereg
