#include "slidereg/preprocess/histogram.hpp"

#include "slidereg/error.hpp"

#include <cmath>

namespace slidereg {

Histogram histogram(const Raster &grey, const TissueMask *mask) {
  if (grey.channels != 1)
    throw Error("histogram expects a single-channel raster");
  if (mask && (mask->width != grey.width || mask->height != grey.height))
    throw Error("mask dimensions differ from the raster");
  Histogram h{};
  for (std::size_t i = 0; i < grey.pixel_count(); ++i) {
    if (!mask || mask->bits[i])
      ++h[grey.data[i]];
  }
  return h;
}

double entropy(const Raster &grey, const TissueMask *mask) {
  const Histogram h = histogram(grey, mask);
  std::uint64_t total = 0;
  for (auto c : h)
    total += c;
  if (total == 0)
    throw Error("entropy of an empty mask is undefined");
  double bits = 0.0;
  for (auto c : h) {
    if (c == 0)
      continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    bits -= p * std::log2(p);
  }
  return bits;
}

std::array<std::uint8_t, 256> matching_lut(const Histogram &source,
                                           const Histogram &target) {
  using wide = unsigned __int128;
  std::array<std::uint64_t, 257> src_cdf{}; // src_cdf[v + 1] = count(<= v)
  std::array<std::uint64_t, 256> tgt_cdf{};
  for (int v = 0; v < 256; ++v)
    src_cdf[v + 1] = src_cdf[v] + source[v];
  std::uint64_t acc = 0;
  for (int v = 0; v < 256; ++v)
    tgt_cdf[v] = acc += target[v];
  const std::uint64_t ns = src_cdf[256];
  const std::uint64_t nt = tgt_cdf[255];

  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v)
    lut[v] = static_cast<std::uint8_t>(v);
  if (ns == 0 || nt == 0)
    return lut;
  int u = 0;
  for (int v = 0; v < 256; ++v) {
    // Smallest u with tgt_cdf[u] / nt >= (src_cdf[v] + src_cdf[v+1]) / (2 ns).
    const wide rhs = static_cast<wide>(nt) * (src_cdf[v] + src_cdf[v + 1]);
    while (u < 255 && static_cast<wide>(2) * ns * tgt_cdf[u] < rhs)
      ++u;
    lut[v] = static_cast<std::uint8_t>(u);
  }
  return lut;
}

MatchedPair histogram_match(const Raster &first, const Raster &second,
                            const TissueMask *first_mask,
                            const TissueMask *second_mask) {
  if (first.channels != 1 || second.channels != 1)
    throw Error("histogram matching expects single-channel rasters");
  const double h_first = entropy(first, first_mask);
  const double h_second = entropy(second, second_mask);
  MatchedPair out{first, second, h_first >= h_second};
  const Raster &src = out.first_is_reference ? second : first;
  const TissueMask *src_mask = out.first_is_reference ? second_mask : first_mask;
  const Raster &ref = out.first_is_reference ? first : second;
  const TissueMask *ref_mask = out.first_is_reference ? first_mask : second_mask;
  const auto lut = matching_lut(histogram(src, src_mask), histogram(ref, ref_mask));
  Raster &dst = out.first_is_reference ? out.second : out.first;
  for (auto &v : dst.data)
    v = lut[v];
  return out;
}

} // namespace slidereg
