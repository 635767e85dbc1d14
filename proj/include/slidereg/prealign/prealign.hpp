#pragma once

#include "slidereg/imagery/raster.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"
#include "slidereg/transform/planar_transform.hpp"

namespace slidereg {

struct PrealignOptions {
  double coarse_step_deg = 1.0;
  // Second pass at fine_step_deg within +-fine_span_deg of the coarse optimum;
  // disabled when fine_step_deg <= 0.
  double fine_step_deg = 0.1;
  double fine_span_deg = 2.0;
};

struct RotationSearchResult {
  double angle_deg = 0.0; // in (-180, 180]
  double dice = 0.0;
};

struct PrealignResult {
  PlanarTransform transform; // moving -> reference, working level
  double rotation_deg = 0.0;
  Point2 com_ref{0, 0};
  Point2 com_mov{0, 0};
  double overlap_score = 0.0;
  Rect crop;
};

// Intensity-weighted centre of mass of the mask foreground with weights
// 255 - grey. Throws when every weight is zero.
Point2 center_of_mass(const Raster &grey, const TissueMask &mask);

// Dice between `ref` and `moving` mapped by rotation_about(angle, center) ∘
// base, sampled with nearest neighbour on the reference grid.
double rotated_overlap(const TissueMask &ref, const TissueMask &moving,
                       const PlanarTransform &base, const Point2 &center,
                       double angle_deg);

// Angle maximizing Dice(ref, rotate(moving ∘ base)). Ties favour the smaller
// |angle|, then the positive one, independent of evaluation order.
RotationSearchResult exhaustive_rotation(const TissueMask &ref,
                                         const TissueMask &moving,
                                         const PlanarTransform &base,
                                         const Point2 &center,
                                         const PrealignOptions &options = {});

// Variant taking a moving mask that is already translated into the reference
// frame; rotation is about the reference mask's centroid.
RotationSearchResult exhaustive_rotation(const TissueMask &ref,
                                         const TissueMask &moving_translated,
                                         const PrealignOptions &options = {});

// COM translation, rotation search, and the joint tissue crop of the
// reference and pre-aligned moving masks.
PrealignResult prealign(const Raster &grey_ref, const TissueMask &mask_ref,
                        const Raster &grey_mov, const TissueMask &mask_mov,
                        const PrealignOptions &options = {});

} // namespace slidereg
