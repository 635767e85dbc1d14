#pragma once

#include "slidereg/features/network.hpp"
#include "slidereg/imagery/raster.hpp"
#include "slidereg/transform/planar_transform.hpp"

#include <array>
#include <filesystem>
#include <mutex>
#include <span>
#include <string>

namespace slidereg {

inline constexpr int kFeatureInputSize = 224;

// One pooled layer stored descriptor-major: data[(y * width + x) * channels + c].
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  int points() const { return height * width; }
  std::span<const float> descriptor(int index) const {
    return {data.data() + static_cast<std::size_t>(index) * channels,
            static_cast<std::size_t>(channels)};
  }
  std::array<int, 3> shape() const { return {height, width, channels}; }
};

struct FeatureMaps {
  FeatureMap f3; // pool3: input / 8
  FeatureMap f4; // pool4: input / 16
  FeatureMap f5; // pool5: input / 32
};

// Feature points are the centres of the 8x8 pool3 cells of the input frame.
struct FeatureGridGeometry {
  int grid = kFeatureInputSize / 8;
  int spacing = 8;

  int points() const { return grid * grid; }
  // Index = row * grid + col; centre = (4 + 8 col, 4 + 8 row).
  Point2 center(int index) const {
    return {spacing / 2.0 + spacing * (index % grid),
            spacing / 2.0 + spacing * (index / grid)};
  }
};

struct ExtractorOptions {
  std::array<std::string, 3> outputs{"pool3", "pool4", "pool5"};
  // Channel counts checked by the load-time probe; 0 skips the check.
  std::array<int, 3> expected_channels{256, 512, 512};
  // Per-channel normalization applied to intensities in [0, 1] (RGB order).
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
};

// Loaded network plus output bindings. extract() serializes calls through an
// internal mutex, so one handle may be shared; use one handle per worker for
// parallel inference.
class Extractor {
public:
  Extractor(ConvNet net, ExtractorOptions options);

  // Raw network outputs (N=1) for an already-normalized NCHW input.
  std::array<Tensor, 3> forward(const Tensor &input) const;
  // Output shapes (h, w, c) for a zero input of the given square size.
  std::array<std::array<int, 3>, 3> probe(int size) const;

  // `image` must have both sides a positive multiple of 32.
  FeatureMaps extract(const Raster &image) const;

  const ExtractorOptions &options() const { return options_; }

private:
  ConvNet net_;
  ExtractorOptions options_;
  mutable std::mutex mutex_;
};

// Reads the model and validates it with a 224x224x3 zero probe. Missing
// outputs or unexpected shapes are errors naming the tensor.
std::unique_ptr<Extractor> load_extractor(const std::filesystem::path &model_path,
                                          const ExtractorOptions &options = {});

// 8-bit raster (1 or 3 channels) to the normalized NCHW network input;
// single-channel input is replicated to three channels.
Tensor network_input(const Raster &image, const ExtractorOptions &options);

// Divides each descriptor by its standard deviation across channels; constant
// descriptors become zero.
FeatureMap normalize_descriptors(const Tensor &layer_output);

} // namespace slidereg
