#pragma once

#include "slidereg/matching/matching.hpp"
#include "slidereg/transform/planar_transform.hpp"

#include <span>

namespace slidereg {

struct EstimateOptions {
  TransformKind kind = TransformKind::Rigid;
  // Drop the worst `trim_fraction` residuals and refit once.
  bool trimmed = false;
  double trim_fraction = 0.1;
};

// Least-squares T minimizing sum |T(mov_i) - ref_i|^2. Rigid and similarity
// use the closed-form Procrustes solution with det forced to +1; affine uses
// the normal equations. Throws on too few or degenerate points.
PlanarTransform estimate(std::span<const Point2> mov, std::span<const Point2> ref,
                         TransformKind kind, int level = 0);
PlanarTransform estimate(const MatchSet &matches, const EstimateOptions &options = {},
                         int level = 0);

double rms_residual(const PlanarTransform &t, std::span<const Point2> mov,
                    std::span<const Point2> ref);
double rms_residual(const PlanarTransform &t, const MatchSet &matches);

} // namespace slidereg
