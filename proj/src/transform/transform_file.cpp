#include "slidereg/transform/transform_file.hpp"

#include "slidereg/error.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace slidereg {

namespace {

constexpr std::array<const char *, 4> kStageOrder{kStagePrealign, kStageTissue,
                                                  kStageBlockwise, kStageOffset};

int stage_rank(const std::string &name) {
  for (std::size_t i = 0; i < kStageOrder.size(); ++i)
    if (name == kStageOrder[i])
      return static_cast<int>(i);
  return static_cast<int>(kStageOrder.size());
}

nlohmann::ordered_json matrix_json(const PlanarTransform &t) {
  auto arr = nlohmann::ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      arr.push_back(t.m(r, c));
  return arr;
}

PlanarTransform matrix_from_json(const nlohmann::ordered_json &j, const std::string &what) {
  if (!j.is_array() || j.size() != 9)
    throw Error(what + " must be an array of 9 numbers");
  PlanarTransform t;
  for (int i = 0; i < 9; ++i) {
    if (!j[i].is_number())
      throw Error(what + " must be an array of 9 numbers");
    t.m(i / 3, i % 3) = j[i].get<double>();
  }
  if (t.m(2, 0) != 0.0 || t.m(2, 1) != 0.0 || t.m(2, 2) != 1.0)
    throw Error(what + " must have last row (0, 0, 1)");
  return t;
}

} // namespace

const PlanarTransform *TransformFile::stage(const std::string &name) const {
  for (const auto &[n, t] : stages)
    if (n == name)
      return &t;
  return nullptr;
}

void TransformFile::set_stage(const std::string &name, const PlanarTransform &t) {
  for (auto &[n, existing] : stages)
    if (n == name) {
      existing = t;
      return;
    }
  stages.emplace_back(name, t);
  std::stable_sort(stages.begin(), stages.end(), [](const auto &a, const auto &b) {
    return stage_rank(a.first) < stage_rank(b.first);
  });
}

std::string serialize_transform_file(const TransformFile &file) {
  nlohmann::ordered_json j;
  j["level"] = 0;
  j["kind"] = std::string(to_string(file.transform.kind));
  j["matrix"] = matrix_json(file.transform);
  auto stages = nlohmann::ordered_json::object();
  for (const auto &[name, t] : file.stages)
    stages[name] = matrix_json(t);
  j["stages"] = stages;
  j["frame"] = file.frame;
  j["partial"] = file.partial;
  if (file.partial) {
    j["failed_stage"] = file.failed_stage;
    j["error"] = file.error;
  }
  return j.dump(2) + "\n";
}

TransformFile parse_transform_file(const std::string &text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw Error(std::string("malformed transform file: ") + e.what());
  }
  if (!j.is_object())
    throw Error("malformed transform file: not an object");
  TransformFile f;
  try {
    if (j.value("level", 0) != 0)
      throw Error("transform file level must be 0");
    f.transform = matrix_from_json(j.at("matrix"), "matrix");
    f.transform.kind = parse_transform_kind(j.value("kind", std::string("rigid")));
    if (j.contains("stages")) {
      for (const auto &[name, m] : j.at("stages").items()) {
        PlanarTransform t = matrix_from_json(m, "stage '" + name + "'");
        t.kind = f.transform.kind;
        f.set_stage(name, t);
      }
    }
    if (j.contains("frame"))
      f.frame = j.at("frame");
    f.partial = j.value("partial", false);
    f.failed_stage = j.value("failed_stage", std::string());
    f.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception &e) {
    throw Error(std::string("malformed transform file: ") + e.what());
  }
  return f;
}

TransformFile load_transform_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot read transform file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_transform_file(buf.str());
}

void write_file_atomic(const std::filesystem::path &path, const std::string &contents) {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
         << counter.fetch_add(1);
  const std::filesystem::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
      throw Error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot replace " + path.string() + ": " + ec.message());
  }
}

void save_transform_file(const TransformFile &file, const std::filesystem::path &path) {
  write_file_atomic(path, serialize_transform_file(file));
}

} // namespace slidereg
