#include "slidereg/transform/stages.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/resample.hpp"

#include <algorithm>
#include <array>
#include <future>

namespace slidereg {

FeatureCrop crop_to_feature_frame(const Raster &grey, const TissueMask &mask,
                                  const Rect &rect, int size) {
  if (rect.empty())
    throw Error("empty crop region");
  const int side = std::max(rect.w, rect.h);
  const Rect square{rect.x, rect.y, side, side};

  // Content outside `rect` must read as background even when the square
  // extends over real pixels.
  Raster padded = crop(grey, square, kBackgroundFill);
  const Raster mask_raster = mask.to_raster();
  Raster padded_mask = crop(mask_raster, square, 0);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if (x >= rect.w || y >= rect.h) {
        for (int c = 0; c < padded.channels; ++c)
          padded.at(x, y, c) = kBackgroundFill;
        padded_mask.at(x, y) = 0;
      }

  FeatureCrop out;
  out.image = side == size ? padded : resize(padded, size, size);
  out.mask = resize_mask(TissueMask::from_raster(padded_mask, mask.flavor), size, size);
  const double s = static_cast<double>(side) / size;
  out.frame.origin = {static_cast<double>(rect.x), static_cast<double>(rect.y)};
  out.frame.scale = {s, s};
  return out;
}

namespace {

// A cell of constant intensity has nothing to localize; its descriptor only
// reflects distance to the crop border.
void drop_flat_cells(const Raster &image, const FeatureGridGeometry &g,
                     std::vector<std::uint8_t> &admissible) {
  if (admissible.empty())
    admissible.assign(static_cast<std::size_t>(g.points()), 1);
  const int s = g.spacing;
  for (int idx = 0; idx < g.points(); ++idx) {
    if (!admissible[idx])
      continue;
    const int r = idx / g.grid, c = idx % g.grid;
    const std::uint8_t first = image.at(c * s, r * s);
    bool flat = true;
    for (int y = r * s; y < (r + 1) * s && flat; ++y)
      for (int x = c * s; x < (c + 1) * s && flat; ++x)
        for (int ch = 0; ch < image.channels; ++ch)
          flat = flat && image.at(x, y, ch) == first;
    if (flat)
      admissible[idx] = 0;
  }
}

} // namespace

MatchSet match_crops(const Extractor &extractor, const FeatureCrop &ref,
                     const FeatureCrop &mov, const StageOptions &options) {
  const FeatureMaps fr = extractor.extract(ref.image);
  const FeatureMaps fm = extractor.extract(mov.image);
  const DistanceMatrix d = combine_distances(
      pairwise_distances(fr.f3, fm.f3), pairwise_distances(fr.f4, fm.f4),
      pairwise_distances(fr.f5, fm.f5), {fr.f3.height, fr.f3.width},
      {fr.f4.height, fr.f4.width}, {fr.f5.height, fr.f5.width});

  MatchOptions mo;
  mo.count = options.match_count;
  FeatureGridGeometry geometry;
  geometry.grid = fr.f3.width;
  geometry.spacing = ref.image.width / fr.f3.width;
  if (options.mask_admissibility) {
    mo.ref_admissible = admissible_points(ref.mask, geometry);
    mo.mov_admissible = admissible_points(mov.mask, geometry);
  }
  drop_flat_cells(ref.image, geometry, mo.ref_admissible);
  drop_flat_cells(mov.image, geometry, mo.mov_admissible);
  std::vector<GridMatch> grid;
  try {
    grid = match_points(d, mo);
  } catch (const Error &) {
    return MatchSet{{}, ref.frame};
  }
  std::erase_if(grid, [](const GridMatch &m) { return !(m.quality > 0.0); });
  return to_level_coords(grid, ref.frame, geometry);
}

WarpedMoving warp_moving(const StageInputs &in, const PlanarTransform &t) {
  WarpedMoving w;
  w.grey = resample(in.mov_grey, t, in.ref_grey.width, in.ref_grey.height,
                    Interpolation::Bilinear, kBackgroundFill);
  const Raster m = resample(in.mov_mask.to_raster(), t, in.ref_grey.width,
                            in.ref_grey.height, Interpolation::Nearest, 0);
  w.mask = TissueMask::from_raster(m, in.mov_mask.flavor);
  return w;
}

namespace {

StageResult finish(const MatchSet &pooled, const PlanarTransform &base,
                   const StageOptions &options, const Rect &crop) {
  StageResult r;
  r.crop = crop;
  r.matches = pooled;
  r.residual = estimate(pooled, options.estimate, base.level);
  r.transform = compose(r.residual, base);
  r.rms_before = rms_residual(PlanarTransform::identity(base.level), pooled);
  r.rms_after = rms_residual(r.residual, pooled);
  return r;
}

} // namespace

StageResult tissue_transform(const StageInputs &in, const PlanarTransform &prealign,
                             const Extractor &extractor, const StageOptions &options) {
  const WarpedMoving w = warp_moving(in, prealign);
  const Rect crop = union_tissue_bbox(in.ref_mask, w.mask);
  const MatchSet matches =
      match_crops(extractor, crop_to_feature_frame(in.ref_grey, in.ref_mask, crop),
                  crop_to_feature_frame(w.grey, w.mask, crop), options);
  if (matches.size() < 2)
    throw Error("insufficient matches: " + std::to_string(matches.size()));
  return finish(matches, prealign, options, crop);
}

StageResult blockwise_transform(const StageInputs &in, const PlanarTransform &tissue,
                                const Extractor &extractor, const StageOptions &options) {
  const WarpedMoving w = warp_moving(in, tissue);
  const Rect crop = union_tissue_bbox(in.ref_mask, w.mask);
  const int w0 = crop.w / 2, h0 = crop.h / 2;
  const std::array<Rect, 4> blocks{Rect{crop.x, crop.y, w0, h0},
                                   Rect{crop.x + w0, crop.y, crop.w - w0, h0},
                                   Rect{crop.x, crop.y + h0, w0, crop.h - h0},
                                   Rect{crop.x + w0, crop.y + h0, crop.w - w0, crop.h - h0}};

  std::array<std::future<MatchSet>, 4> jobs;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    jobs[b] = std::async(std::launch::async, [&, b] {
      if (blocks[b].empty())
        return MatchSet{};
      return match_crops(extractor, crop_to_feature_frame(in.ref_grey, in.ref_mask, blocks[b]),
                         crop_to_feature_frame(w.grey, w.mask, blocks[b]), options);
    });
  }
  MatchSet pooled;
  pooled.frame.origin = {static_cast<double>(crop.x), static_cast<double>(crop.y)};
  bool any_block = false;
  for (auto &job : jobs) {
    const MatchSet m = job.get();
    any_block = any_block || m.size() >= 2;
    pooled.pairs.insert(pooled.pairs.end(), m.pairs.begin(), m.pairs.end());
  }
  if (!any_block) {
    StageResult r;
    r.transform = tissue;
    r.residual = PlanarTransform::identity(tissue.level);
    r.matches = pooled;
    r.crop = crop;
    r.warning = true;
    r.message = "block-wise matching found fewer than 2 matches in every block";
    return r;
  }
  return finish(pooled, tissue, options, crop);
}

} // namespace slidereg
