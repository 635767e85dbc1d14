#pragma once

#include "slidereg/imagery/raster.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"

#include <array>
#include <cstdint>

namespace slidereg {

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const Raster &grey, const TissueMask *mask = nullptr);

// Shannon entropy in bits of the 256-bin histogram, restricted to the mask
// foreground when a mask is given.
double entropy(const Raster &grey, const TissueMask *mask = nullptr);

// Monotone lookup table that maps `source` intensities onto `target`'s
// distribution (mid-bin source CDF, smallest target level reaching it).
std::array<std::uint8_t, 256> matching_lut(const Histogram &source,
                                           const Histogram &target);

struct MatchedPair {
  Raster first;
  Raster second;
  // True when `first` was the higher-entropy (unchanged) image.
  bool first_is_reference = true;
};

// The lower-entropy image is remapped onto the higher-entropy one; ties keep
// the first image as reference. Masks restrict the histograms only.
MatchedPair histogram_match(const Raster &first, const Raster &second,
                            const TissueMask *first_mask = nullptr,
                            const TissueMask *second_mask = nullptr);

} // namespace slidereg
