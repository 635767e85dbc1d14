#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace slidereg {

using Point2 = Eigen::Vector2d;

enum class TransformKind { Rigid, Similarity, Affine };

std::string_view to_string(TransformKind kind);
TransformKind parse_transform_kind(std::string_view text);

// Homogeneous 3x3 map from moving-image pixel coordinates to reference-image
// pixel coordinates, both expressed at pyramid `level`.
struct PlanarTransform {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  TransformKind kind = TransformKind::Rigid;
  int level = 0;

  static PlanarTransform identity(int level = 0);
  static PlanarTransform translation(double dx, double dy, int level = 0);
  // [c -s; s c] acting on (x, y) pixel coordinates about `center`.
  static PlanarTransform rotation_about(double degrees, const Point2 &center,
                                        int level = 0);

  Point2 apply(const Point2 &p) const;
  PlanarTransform inverse() const;

  Eigen::Matrix2d linear() const { return m.topLeftCorner<2, 2>(); }
  Point2 offset() const { return m.topRightCorner<2, 1>(); }
  double rotation_degrees() const;
  // |det| of the upper 2x2 block.
  double linear_determinant() const;
};

// outer ∘ inner: applies `inner` first. Levels must agree.
PlanarTransform compose(const PlanarTransform &outer,
                        const PlanarTransform &inner);

// Conjugates by S = diag(k, k, 1), k = 2^(from_level - to_level).
PlanarTransform rescale_to_level(const PlanarTransform &t, int from_level,
                                 int to_level);

// Same conjugation for an arbitrary coordinate scale factor; the level tag is
// left untouched and must be set by the caller when it is meaningful.
PlanarTransform rescale_by_factor(const PlanarTransform &t, double factor);

// Max absolute difference between two matrices.
double max_abs_difference(const PlanarTransform &a, const PlanarTransform &b);

bool is_rigid(const PlanarTransform &t, double tol = 1e-9);

} // namespace slidereg
