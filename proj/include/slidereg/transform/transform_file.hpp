#pragma once

#include "slidereg/transform/planar_transform.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slidereg {

inline constexpr const char *kStagePrealign = "prealign";
inline constexpr const char *kStageTissue = "tissue";
inline constexpr const char *kStageBlockwise = "blockwise";
inline constexpr const char *kStageOffset = "offset";

// On-disk registration result shared by the CLI and the tile service. Every
// matrix maps level-0 moving pixels to level-0 reference pixels; each stage
// entry is the cumulative transform after that stage.
struct TransformFile {
  PlanarTransform transform;
  std::vector<std::pair<std::string, PlanarTransform>> stages;
  nlohmann::ordered_json frame = nlohmann::ordered_json::object();
  bool partial = false;
  std::string failed_stage;
  std::string error;

  const PlanarTransform *stage(const std::string &name) const;
  // Replaces or appends (keeping prealign/tissue/blockwise/offset order).
  void set_stage(const std::string &name, const PlanarTransform &t);
};

std::string serialize_transform_file(const TransformFile &file);
TransformFile parse_transform_file(const std::string &text);
TransformFile load_transform_file(const std::filesystem::path &path);
// Writes to a temporary sibling and renames it over `path`.
void save_transform_file(const TransformFile &file, const std::filesystem::path &path);

// Atomic text write used for every result file.
void write_file_atomic(const std::filesystem::path &path, const std::string &contents);

} // namespace slidereg
