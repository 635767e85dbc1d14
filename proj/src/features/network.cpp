#include "slidereg/features/network.hpp"

#include "onnx_subset.pb.h"
#include "slidereg/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_set>

namespace slidereg {

Tensor::Tensor(int n, int c, int h, int w, float fill)
    : shape{n, c, h, w},
      data(static_cast<std::size_t>(n) * c * h * w, fill) {}

namespace {

enum class Op { Conv, Relu, MaxPool };

struct Layer {
  Op op = Op::Relu;
  std::string name;
  std::string input;
  std::string output;
  // Conv
  Tensor weight; // (Cout, Cin, kh, kw)
  std::vector<float> bias;
  // Conv / MaxPool geometry
  int kh = 1, kw = 1;
  int stride_y = 1, stride_x = 1;
  int pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  int dil_y = 1, dil_x = 1;
};

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor tensor_from_proto(const onnx::TensorProto &t) {
  if (t.data_type() != onnx::TensorProto::FLOAT)
    throw Error("initializer '" + t.name() + "' is not float32");
  std::array<int, 4> shape{1, 1, 1, 1};
  if (t.dims_size() > 4)
    throw Error("initializer '" + t.name() + "' has more than 4 dimensions");
  // Right-align dims so a 1-D bias becomes (1,1,1,n).
  const int offset = 4 - t.dims_size();
  std::size_t count = 1;
  for (int i = 0; i < t.dims_size(); ++i) {
    shape[offset + i] = static_cast<int>(t.dims(i));
    count *= static_cast<std::size_t>(t.dims(i));
  }
  Tensor out;
  out.shape = shape;
  out.data.resize(count);
  if (t.has_raw_data()) {
    if (t.raw_data().size() != count * sizeof(float))
      throw Error("initializer '" + t.name() + "' raw data has the wrong length");
    std::memcpy(out.data.data(), t.raw_data().data(), t.raw_data().size());
  } else {
    if (static_cast<std::size_t>(t.float_data_size()) != count)
      throw Error("initializer '" + t.name() + "' has the wrong element count");
    std::copy(t.float_data().begin(), t.float_data().end(), out.data.begin());
  }
  return out;
}

const onnx::AttributeProto *find_attr(const onnx::NodeProto &node, const char *name) {
  for (const auto &a : node.attribute())
    if (a.name() == name)
      return &a;
  return nullptr;
}

std::vector<int> int_list(const onnx::NodeProto &node, const char *name,
                          std::vector<int> fallback) {
  const auto *a = find_attr(node, name);
  if (!a)
    return fallback;
  std::vector<int> out;
  for (auto v : a->ints())
    out.push_back(static_cast<int>(v));
  return out;
}

void read_geometry(const onnx::NodeProto &node, Layer &l) {
  if (const auto *a = find_attr(node, "auto_pad"); a && !a->s().empty() && a->s() != "NOTSET")
    throw Error("node '" + node.name() + "': auto_pad is not supported");
  const auto strides = int_list(node, "strides", {1, 1});
  const auto pads = int_list(node, "pads", {0, 0, 0, 0});
  const auto dil = int_list(node, "dilations", {1, 1});
  if (strides.size() != 2 || pads.size() != 4 || dil.size() != 2)
    throw Error("node '" + node.name() + "': only 2-D spatial operators are supported");
  l.stride_y = strides[0];
  l.stride_x = strides[1];
  l.pad_top = pads[0];
  l.pad_left = pads[1];
  l.pad_bottom = pads[2];
  l.pad_right = pads[3];
  l.dil_y = dil[0];
  l.dil_x = dil[1];
}

int out_extent(int in, int k, int stride, int pad0, int pad1, int dil) {
  const int span = dil * (k - 1) + 1;
  const int n = in + pad0 + pad1 - span;
  if (n < 0)
    return 0;
  return n / stride + 1;
}

Tensor run_conv(const Layer &l, const Tensor &in) {
  const int cin = l.weight.shape[1];
  const int cout = l.weight.shape[0];
  if (in.shape[1] != cin)
    throw Error("Conv '" + l.name + "' expects " + std::to_string(cin) +
                " input channels, got " + std::to_string(in.shape[1]));
  const int h = in.shape[2], w = in.shape[3];
  const int oh = out_extent(h, l.kh, l.stride_y, l.pad_top, l.pad_bottom, l.dil_y);
  const int ow = out_extent(w, l.kw, l.stride_x, l.pad_left, l.pad_right, l.dil_x);
  const int n = in.shape[0];
  Tensor out(n, cout, oh, ow);
  if (oh == 0 || ow == 0)
    return out;

  const int k = cin * l.kh * l.kw;
  const Eigen::Map<const RowMatrix> wmat(l.weight.data.data(), cout, k);
  // Bound the im2col buffer to ~8 MB by processing output rows in chunks.
  const std::size_t budget = (std::size_t{8} << 20) / sizeof(float);
  const int chunk = std::max(1, static_cast<int>(budget / (static_cast<std::size_t>(k) * ow)));
  RowMatrix col;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;

  for (int b = 0; b < n; ++b) {
    const float *src = in.data.data() + static_cast<std::size_t>(b) * cin * h * w;
    float *dst = out.data.data() + static_cast<std::size_t>(b) * cout * plane;
    for (int r0 = 0; r0 < oh; r0 += chunk) {
      const int rows = std::min(chunk, oh - r0);
      const int cols = rows * ow;
      col.resize(k, cols);
      for (int c = 0; c < cin; ++c) {
        const float *chan = src + static_cast<std::size_t>(c) * h * w;
        for (int i = 0; i < l.kh; ++i) {
          for (int j = 0; j < l.kw; ++j) {
            float *crow = col.data() + static_cast<std::size_t>((c * l.kh + i) * l.kw + j) * cols;
            for (int r = 0; r < rows; ++r) {
              const int sy = (r0 + r) * l.stride_y - l.pad_top + i * l.dil_y;
              float *o = crow + static_cast<std::size_t>(r) * ow;
              if (sy < 0 || sy >= h) {
                std::fill(o, o + ow, 0.0f);
                continue;
              }
              const float *srow = chan + static_cast<std::size_t>(sy) * w;
              for (int x = 0; x < ow; ++x) {
                const int sx = x * l.stride_x - l.pad_left + j * l.dil_x;
                o[x] = (sx >= 0 && sx < w) ? srow[sx] : 0.0f;
              }
            }
          }
        }
      }
      Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>> block(
          dst + static_cast<std::size_t>(r0) * ow, cout, cols,
          Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      block.noalias() = wmat * col;
    }
    if (!l.bias.empty()) {
      for (int c = 0; c < cout; ++c) {
        float *p = dst + static_cast<std::size_t>(c) * plane;
        const float bv = l.bias[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i)
          p[i] += bv;
      }
    }
  }
  return out;
}

Tensor run_maxpool(const Layer &l, const Tensor &in) {
  const int n = in.shape[0], c = in.shape[1], h = in.shape[2], w = in.shape[3];
  const int oh = out_extent(h, l.kh, l.stride_y, l.pad_top, l.pad_bottom, l.dil_y);
  const int ow = out_extent(w, l.kw, l.stride_x, l.pad_left, l.pad_right, l.dil_x);
  Tensor out(n, c, oh, ow);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          float best = -std::numeric_limits<float>::infinity();
          for (int i = 0; i < l.kh; ++i) {
            const int sy = y * l.stride_y - l.pad_top + i * l.dil_y;
            if (sy < 0 || sy >= h)
              continue;
            for (int j = 0; j < l.kw; ++j) {
              const int sx = x * l.stride_x - l.pad_left + j * l.dil_x;
              if (sx < 0 || sx >= w)
                continue;
              best = std::max(best, in.at(b, ch, sy, sx));
            }
          }
          out.at(b, ch, y, x) = best;
        }
  return out;
}

} // namespace

struct ConvNet::Impl {
  std::string input;
  std::vector<std::string> outputs;
  std::vector<Layer> layers;
  std::unordered_map<std::string, std::size_t> producer;
};

ConvNet::ConvNet(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
ConvNet::ConvNet(ConvNet &&) noexcept = default;
ConvNet &ConvNet::operator=(ConvNet &&) noexcept = default;
ConvNet::~ConvNet() = default;

ConvNet ConvNet::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open model file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

ConvNet ConvNet::parse(const std::string &bytes) {
  onnx::ModelProto model;
  if (!model.ParseFromString(bytes) || !model.has_graph())
    throw Error("not a valid ONNX model");
  const auto &g = model.graph();

  std::unordered_map<std::string, const onnx::TensorProto *> inits;
  for (const auto &t : g.initializer())
    inits[t.name()] = &t;

  auto impl = std::make_unique<Impl>();
  for (const auto &vi : g.input())
    if (!inits.count(vi.name())) {
      impl->input = vi.name();
      break;
    }
  if (impl->input.empty())
    throw Error("model declares no graph input");
  for (const auto &vi : g.output())
    impl->outputs.push_back(vi.name());

  for (const auto &node : g.node()) {
    Layer l;
    l.name = node.name().empty() ? node.output(0) : node.name();
    if (node.input_size() < 1 || node.output_size() < 1)
      throw Error("node '" + l.name + "' has no input or output");
    l.input = node.input(0);
    l.output = node.output(0);
    const std::string &op = node.op_type();
    if (op == "Conv") {
      l.op = Op::Conv;
      if (node.input_size() < 2 || !inits.count(node.input(1)))
        throw Error("Conv '" + l.name + "' weight must be an initializer");
      if (const auto *a = find_attr(node, "group"); a && a->i() != 1)
        throw Error("Conv '" + l.name + "': grouped convolution is not supported");
      l.weight = tensor_from_proto(*inits.at(node.input(1)));
      l.kh = l.weight.shape[2];
      l.kw = l.weight.shape[3];
      if (node.input_size() > 2 && !node.input(2).empty()) {
        if (!inits.count(node.input(2)))
          throw Error("Conv '" + l.name + "' bias must be an initializer");
        l.bias = tensor_from_proto(*inits.at(node.input(2))).data;
        if (static_cast<int>(l.bias.size()) != l.weight.shape[0])
          throw Error("Conv '" + l.name + "' bias length differs from output channels");
      }
      read_geometry(node, l);
    } else if (op == "MaxPool") {
      l.op = Op::MaxPool;
      const auto k = int_list(node, "kernel_shape", {});
      if (k.size() != 2)
        throw Error("MaxPool '" + l.name + "' needs a 2-D kernel_shape");
      l.kh = k[0];
      l.kw = k[1];
      if (const auto *a = find_attr(node, "ceil_mode"); a && a->i() != 0)
        throw Error("MaxPool '" + l.name + "': ceil_mode is not supported");
      read_geometry(node, l);
    } else if (op == "Relu") {
      l.op = Op::Relu;
    } else {
      throw Error("unsupported operator '" + op + "' in node '" + l.name + "'");
    }
    impl->producer[l.output] = impl->layers.size();
    impl->layers.push_back(std::move(l));
  }
  return ConvNet(std::move(impl));
}

const std::string &ConvNet::input_name() const { return impl_->input; }

bool ConvNet::has_value(const std::string &name) const {
  return name == impl_->input || impl_->producer.count(name) > 0;
}

std::vector<std::string> ConvNet::declared_outputs() const { return impl_->outputs; }

std::unordered_map<std::string, Tensor>
ConvNet::run(const Tensor &input, const std::vector<std::string> &outputs) const {
  std::size_t last = 0;
  bool any_layer = false;
  for (const auto &name : outputs) {
    if (!has_value(name))
      throw Error("model does not produce tensor '" + name + "'");
    if (auto it = impl_->producer.find(name); it != impl_->producer.end()) {
      last = std::max(last, it->second);
      any_layer = true;
    }
  }
  const std::unordered_set<std::string> wanted(outputs.begin(), outputs.end());

  // Last consumer index of every value, so intermediates can be dropped.
  std::unordered_map<std::string, std::size_t> last_use;
  for (std::size_t i = 0; any_layer && i <= last; ++i)
    last_use[impl_->layers[i].input] = i;

  std::unordered_map<std::string, Tensor> values;
  values[impl_->input] = input;
  std::unordered_map<std::string, Tensor> result;
  if (wanted.count(impl_->input))
    result[impl_->input] = input;

  for (std::size_t i = 0; any_layer && i <= last; ++i) {
    const Layer &l = impl_->layers[i];
    auto it = values.find(l.input);
    if (it == values.end())
      throw Error("node '" + l.name + "' reads undefined tensor '" + l.input + "'");
    Tensor out;
    switch (l.op) {
    case Op::Conv:
      out = run_conv(l, it->second);
      break;
    case Op::MaxPool:
      out = run_maxpool(l, it->second);
      break;
    case Op::Relu:
      if (last_use[l.input] == i && !wanted.count(l.input))
        out = std::move(it->second);
      else
        out = it->second;
      for (float &v : out.data)
        v = std::max(v, 0.0f);
      break;
    }
    if (last_use[l.input] == i && !wanted.count(l.input))
      values.erase(l.input);
    if (wanted.count(l.output))
      result[l.output] = out;
    values[l.output] = std::move(out);
  }
  return result;
}

FixtureSpec FixtureSpec::vgg16() {
  FixtureSpec s;
  s.plan = {64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0};
  return s;
}

std::string serialize_fixture_model(const FixtureSpec &spec) {
  onnx::ModelProto model;
  model.set_ir_version(7);
  model.set_producer_name("slidereg-fixture");
  auto *opset = model.add_opset_import();
  opset->set_domain("");
  opset->set_version(11);
  auto *g = model.mutable_graph();
  g->set_name("fixture");

  auto set_shape = [](onnx::ValueInfoProto *vi, std::initializer_list<std::string> dims) {
    auto *tt = vi->mutable_type()->mutable_tensor_type();
    tt->set_elem_type(onnx::TensorProto::FLOAT);
    auto *shape = tt->mutable_shape();
    for (const auto &d : dims) {
      auto *dim = shape->add_dim();
      if (!d.empty() && std::isdigit(static_cast<unsigned char>(d[0])))
        dim->set_dim_value(std::stoll(d));
      else
        dim->set_dim_param(d);
    }
  };
  auto *in = g->add_input();
  in->set_name("input");
  set_shape(in, {"1", std::to_string(spec.in_channels), "height", "width"});

  std::mt19937_64 rng(spec.seed);
  std::string current = "input";
  int channels = spec.in_channels;
  int block = 1, conv_in_block = 0;
  for (int entry : spec.plan) {
    if (entry > 0) {
      ++conv_in_block;
      const std::string base = "conv" + std::to_string(block) + "_" + std::to_string(conv_in_block);
      auto *w = g->add_initializer();
      w->set_name(base + ".weight");
      w->set_data_type(onnx::TensorProto::FLOAT);
      for (int d : {entry, channels, 3, 3})
        w->add_dims(d);
      std::normal_distribution<float> he(0.0f, std::sqrt(2.0f / (9.0f * channels)));
      std::vector<float> wv(static_cast<std::size_t>(entry) * channels * 9);
      for (float &v : wv)
        v = he(rng);
      w->set_raw_data(wv.data(), wv.size() * sizeof(float));

      auto *b = g->add_initializer();
      b->set_name(base + ".bias");
      b->set_data_type(onnx::TensorProto::FLOAT);
      b->add_dims(entry);
      std::normal_distribution<float> small(0.0f, 0.01f);
      std::vector<float> bv(static_cast<std::size_t>(entry));
      for (float &v : bv)
        v = small(rng);
      b->set_raw_data(bv.data(), bv.size() * sizeof(float));

      auto *conv = g->add_node();
      conv->set_op_type("Conv");
      conv->set_name(base);
      conv->add_input(current);
      conv->add_input(base + ".weight");
      conv->add_input(base + ".bias");
      conv->add_output(base);
      auto add_ints = [&](const char *name, std::initializer_list<int> vals) {
        auto *a = conv->add_attribute();
        a->set_name(name);
        a->set_type(onnx::AttributeProto::INTS);
        for (int v : vals)
          a->add_ints(v);
      };
      add_ints("kernel_shape", {3, 3});
      add_ints("pads", {1, 1, 1, 1});
      add_ints("strides", {1, 1});

      auto *relu = g->add_node();
      relu->set_op_type("Relu");
      relu->set_name("relu" + base.substr(4));
      relu->add_input(base);
      relu->add_output(relu->name());
      current = relu->name();
      channels = entry;
    } else {
      const std::string name = "pool" + std::to_string(block);
      auto *pool = g->add_node();
      pool->set_op_type("MaxPool");
      pool->set_name(name);
      pool->add_input(current);
      pool->add_output(name);
      for (const char *attr : {"kernel_shape", "strides"}) {
        auto *a = pool->add_attribute();
        a->set_name(attr);
        a->set_type(onnx::AttributeProto::INTS);
        a->add_ints(2);
        a->add_ints(2);
      }
      current = name;
      ++block;
      conv_in_block = 0;
    }
  }
  for (const auto &name : spec.outputs) {
    auto *out = g->add_output();
    out->set_name(name);
    out->mutable_type()->mutable_tensor_type()->set_elem_type(onnx::TensorProto::FLOAT);
  }
  std::string bytes;
  if (!model.SerializeToString(&bytes))
    throw Error("cannot serialize fixture model");
  return bytes;
}

void write_fixture_model(const FixtureSpec &spec, const std::filesystem::path &path) {
  const std::string bytes = serialize_fixture_model(spec);
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write model file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error("cannot write model file: " + path.string());
}

} // namespace slidereg
