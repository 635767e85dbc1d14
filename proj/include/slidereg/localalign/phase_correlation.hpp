#pragma once

#include "slidereg/imagery/raster.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"
#include "slidereg/transform/planar_transform.hpp"

namespace slidereg {

enum class OffsetScope { Global, Fov };

// Translation (dx, dy) such that b(x) ~ a(x - (dx, dy)); adding it to a
// transform that produced `a` moves that content onto `b`.
struct OffsetResult {
  double dx = 0.0; // sub-pixel refined
  double dy = 0.0;
  int shift_x = 0; // integer peak
  int shift_y = 0;
  double peak = 0.0; // in [0, 1]
  bool degenerate = false;
  OffsetScope scope = OffsetScope::Global;
  // Pixel scale of the correlated images relative to level 0.
  double downsample = 1.0;
};

// Cross-power-spectrum correlation of zero-padded (next power of two per
// axis), mean-removed inputs with magnitude regularization 1e-12. A
// constant input yields (0, 0) with peak 0 and `degenerate` set.
OffsetResult phase_correlation(const Raster &a, const Raster &b);
OffsetResult phase_correlation(const TissueMask &a, const TissueMask &b);

// Prepends the translation, scaled from the offset's pixel scale to the
// transform's level (downsample 2^level). `integer_only` uses the integer
// peak instead of the refined shift.
PlanarTransform apply_offset(const PlanarTransform &t, const OffsetResult &offset,
                             bool integer_only = false);

} // namespace slidereg
