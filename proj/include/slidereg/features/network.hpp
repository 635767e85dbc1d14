#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace slidereg {

// Dense float tensor in NCHW order.
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n, int c, int h, int w, float fill = 0.0f);
  std::size_t size() const { return data.size(); }
  float &at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  float at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
};

// Feed-forward convolutional graph read from an ONNX file. Supported
// operators: Conv (group 1), Relu, MaxPool. Any other operator is rejected at
// load time.
class ConvNet {
public:
  static ConvNet load(const std::filesystem::path &path);
  static ConvNet parse(const std::string &bytes);

  ConvNet(ConvNet &&) noexcept;
  ConvNet &operator=(ConvNet &&) noexcept;
  ~ConvNet();

  const std::string &input_name() const;
  // True when some node produces `name` (or it is the graph input).
  bool has_value(const std::string &name) const;
  std::vector<std::string> declared_outputs() const;

  // Runs the graph up to the last node needed by `outputs`. All scratch
  // memory is per call.
  std::unordered_map<std::string, Tensor> run(const Tensor &input,
                                              const std::vector<std::string> &outputs) const;

private:
  struct Impl;
  explicit ConvNet(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Conv-ReLU stacks with 2x2 max pooling, written as ONNX with seeded He
// initialization. `plan` entries > 0 are 3x3 pad-1 conv layers with that many
// output channels followed by ReLU; 0 is a 2x2 stride-2 max pool. Pools are
// named pool1, pool2, ... in order.
struct FixtureSpec {
  std::vector<int> plan;
  std::vector<std::string> outputs{"pool3", "pool4", "pool5"};
  int in_channels = 3;
  std::uint64_t seed = 20240607;

  // VGG16 convolutional trunk up to pool5.
  static FixtureSpec vgg16();
};

std::string serialize_fixture_model(const FixtureSpec &spec);
void write_fixture_model(const FixtureSpec &spec, const std::filesystem::path &path);

} // namespace slidereg
