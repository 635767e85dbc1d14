#include "slidereg/features/extractor.hpp"

#include "slidereg/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slidereg {

namespace {

std::string shape_text(const std::array<int, 3> &s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << ")";
  return os.str();
}

} // namespace

Extractor::Extractor(ConvNet net, ExtractorOptions options)
    : net_(std::move(net)), options_(std::move(options)) {
  for (const auto &name : options_.outputs)
    if (!net_.has_value(name))
      throw Error("model does not produce output tensor '" + name + "'");
}

std::array<Tensor, 3> Extractor::forward(const Tensor &input) const {
  const std::vector<std::string> names(options_.outputs.begin(), options_.outputs.end());
  std::unordered_map<std::string, Tensor> out;
  {
    std::lock_guard lock(mutex_);
    out = net_.run(input, names);
  }
  return {std::move(out.at(names[0])), std::move(out.at(names[1])),
          std::move(out.at(names[2]))};
}

std::array<std::array<int, 3>, 3> Extractor::probe(int size) const {
  const auto out = forward(Tensor(1, 3, size, size));
  std::array<std::array<int, 3>, 3> shapes{};
  for (int i = 0; i < 3; ++i)
    shapes[i] = {out[i].shape[2], out[i].shape[3], out[i].shape[1]};
  return shapes;
}

Tensor network_input(const Raster &image, const ExtractorOptions &options) {
  if (image.channels != 1 && image.channels != 3)
    throw Error("feature input must have 1 or 3 channels");
  Tensor t(1, 3, image.height, image.width);
  for (int c = 0; c < 3; ++c) {
    const int src_c = image.channels == 1 ? 0 : c;
    const float mean = options.mean[c];
    const float inv_sd = 1.0f / options.stddev[c];
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        t.at(0, c, y, x) = (image.at(x, y, src_c) / 255.0f - mean) * inv_sd;
  }
  return t;
}

FeatureMap normalize_descriptors(const Tensor &layer) {
  FeatureMap fm;
  fm.channels = layer.shape[1];
  fm.height = layer.shape[2];
  fm.width = layer.shape[3];
  fm.data.assign(static_cast<std::size_t>(fm.points()) * fm.channels, 0.0f);
  const std::size_t plane = static_cast<std::size_t>(fm.points());
  std::vector<double> v(static_cast<std::size_t>(fm.channels));
  for (std::size_t p = 0; p < plane; ++p) {
    double sum = 0.0;
    for (int c = 0; c < fm.channels; ++c) {
      v[c] = layer.data[static_cast<std::size_t>(c) * plane + p];
      sum += v[c];
    }
    const bool constant = std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    if (constant)
      continue;
    const double mean = sum / fm.channels;
    double ss = 0.0;
    for (double x : v)
      ss += (x - mean) * (x - mean);
    const double inv_sd = 1.0 / std::sqrt(ss / fm.channels);
    float *dst = fm.data.data() + p * fm.channels;
    for (int c = 0; c < fm.channels; ++c)
      dst[c] = static_cast<float>(v[c] * inv_sd);
  }
  return fm;
}

FeatureMaps Extractor::extract(const Raster &image) const {
  if (image.width <= 0 || image.height <= 0 || image.width % 32 != 0 ||
      image.height % 32 != 0)
    throw Error("wrong input size " + std::to_string(image.width) + "x" +
                std::to_string(image.height) + ": sides must be multiples of 32");
  const auto out = forward(network_input(image, options_));
  return {normalize_descriptors(out[0]), normalize_descriptors(out[1]),
          normalize_descriptors(out[2])};
}

std::unique_ptr<Extractor> load_extractor(const std::filesystem::path &model_path,
                                          const ExtractorOptions &options) {
  if (!std::filesystem::exists(model_path))
    throw Error("model file not found: " + model_path.string());
  auto ex = std::make_unique<Extractor>(ConvNet::load(model_path), options);
  const auto shapes = ex->probe(kFeatureInputSize);
  const int strides[3] = {8, 16, 32};
  for (int i = 0; i < 3; ++i) {
    std::array<int, 3> expected{kFeatureInputSize / strides[i], kFeatureInputSize / strides[i],
                                options.expected_channels[i]};
    if (expected[2] == 0)
      expected[2] = shapes[i][2];
    if (shapes[i] != expected)
      throw Error("output '" + options.outputs[i] + "' has shape " + shape_text(shapes[i]) +
                  ", expected " + shape_text(expected));
  }
  return ex;
}

} // namespace slidereg
