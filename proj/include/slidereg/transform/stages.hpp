#pragma once

#include "slidereg/features/extractor.hpp"
#include "slidereg/matching/matching.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"
#include "slidereg/transform/estimate.hpp"

#include <string>

namespace slidereg {

// Reference and (unwarped) moving inputs at one common working scale.
struct StageInputs {
  const Raster &ref_grey;
  const Raster &mov_grey;
  const TissueMask &ref_mask;
  const TissueMask &mov_mask;
};

struct StageOptions {
  int match_count = kDefaultMatchCount;
  EstimateOptions estimate;
  // Restrict feature points to cells that are mostly tissue.
  bool mask_admissibility = true;
};

struct StageResult {
  PlanarTransform transform; // full moving -> reference transform
  PlanarTransform residual;  // correction found by this stage
  MatchSet matches;          // pooled, working-scale coordinates
  Rect crop;
  double rms_before = 0.0; // residual of identity on `matches`
  double rms_after = 0.0;  // residual of `residual` on `matches`
  bool warning = false;
  std::string message;
};

// Square feature-frame view of a level region: the rect is padded at the
// bottom/right with background to a square and resized to `size`.
struct FeatureCrop {
  Raster image;
  TissueMask mask;
  MatchFrame frame;
};

FeatureCrop crop_to_feature_frame(const Raster &grey, const TissueMask &mask,
                                  const Rect &rect, int size = kFeatureInputSize);

// Extracts both crops and returns matched pairs with positive quality, in
// level coordinates.
MatchSet match_crops(const Extractor &extractor, const FeatureCrop &ref,
                     const FeatureCrop &mov, const StageOptions &options);

// Moving grey and mask warped into the reference frame through `t`.
struct WarpedMoving {
  Raster grey;
  TissueMask mask;
};
WarpedMoving warp_moving(const StageInputs &in, const PlanarTransform &t);

// Whole-tissue matching on the union crop; the rigid correction is composed
// onto `prealign`. Throws "insufficient matches" below two matches.
StageResult tissue_transform(const StageInputs &in, const PlanarTransform &prealign,
                             const Extractor &extractor, const StageOptions &options = {});

// Matches each block of a 2x2 partition of the union crop independently and
// fits one correction to the pooled matches. When every block yields fewer
// than two matches, returns `tissue` unchanged with a warning.
StageResult blockwise_transform(const StageInputs &in, const PlanarTransform &tissue,
                                const Extractor &extractor, const StageOptions &options = {});

} // namespace slidereg
