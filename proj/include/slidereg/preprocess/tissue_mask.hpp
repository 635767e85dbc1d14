#pragma once

#include "slidereg/imagery/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace slidereg {

enum class MaskFlavor { TS, TSEF, External };

std::string_view to_string(MaskFlavor flavor);

struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits; // 0 or 1, row-major
  MaskFlavor flavor = MaskFlavor::TS;

  TissueMask() = default;
  TissueMask(int w, int h, MaskFlavor f = MaskFlavor::TS);

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  // 0/255 single-channel raster, for I/O and nearest-neighbour warping.
  Raster to_raster() const;
  static TissueMask from_raster(const Raster &raster, MaskFlavor flavor,
                                std::uint8_t threshold = 128);
};

struct SegmentationOptions {
  int morphology_radius = 2;
  double min_component_fraction = 0.0005;
  int texture_window = 7;
  double texture_percentile = 0.10;
};

// TS: Otsu on inverted greyscale, open/close, hole filling, small-component
// removal. TSEF: TS minus pixels whose local standard deviation is below the
// configured percentile of tissue pixels, cleaned the same way (without hole
// filling) and clipped to TS. A blank input yields an empty mask.
TissueMask segment_tissue(const Raster &raster, MaskFlavor flavor,
                          const SegmentationOptions &options = {});

// Reads an external single-channel PNG mask; values >= 128 are tissue.
TissueMask load_external_mask(const std::filesystem::path &path);

// Nearest-neighbour resize of a mask.
TissueMask resize_mask(const TissueMask &mask, int width, int height);

// Tight box around the union of both foregrounds, widened by 2% of its size
// on every side and clipped to the mask bounds.
Rect union_tissue_bbox(const TissueMask &a, const TissueMask &b);

double dice(const TissueMask &a, const TissueMask &b);

} // namespace slidereg
