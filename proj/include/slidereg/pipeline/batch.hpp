#pragma once

#include "slidereg/metrics/metrics.hpp"
#include "slidereg/pipeline/pipeline.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace slidereg {

// Evaluation rows in cascade order; "Initial" is the unregistered input.
inline constexpr std::array<const char *, 5> kEvaluationStages{
    "Initial", "Pre-alignment", "Tissue", "Block-wise", "Offset"};

struct ManifestEntry {
  std::filesystem::path ref;
  std::filesystem::path mov;
  std::filesystem::path ref_landmarks; // optional
  std::filesystem::path mov_landmarks; // optional
  bool has_landmarks() const { return !ref_landmarks.empty() && !mov_landmarks.empty(); }
};

// CSV rows ref_image,mov_image[,ref_landmarks,mov_landmarks]; an optional
// header row starting with "ref" is skipped. Relative paths resolve against
// the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path &path);

struct StageMetrics {
  std::vector<double> rtre;
  PairMetrics summary;
};

struct PairEvaluation {
  ManifestEntry entry;
  bool ok = false;      // pipeline ran (possibly partial)
  bool partial = false; // a stage failed
  std::string error;
  std::optional<TransformFile> transform;
  std::array<std::optional<StageMetrics>, kEvaluationStages.size()> stages;
};

struct BatchReport {
  std::vector<PairEvaluation> pairs;
  std::array<std::optional<MetricsReport>, kEvaluationStages.size()> stages;

  // 0: every pair complete; 2: some pair failed or is partial; 1: none ran.
  int exit_code() const;
};

// Landmark metrics for one registered pair: rTRE of T(mov landmarks) against
// the reference landmarks, with robustness relative to the initial layout.
std::array<std::optional<StageMetrics>, kEvaluationStages.size()>
evaluate_stages(const TransformFile &file, const LandmarkSet &ref, const LandmarkSet &mov,
                int ref_width, int ref_height);

// Runs every manifest pair with `config.workers` threads, each holding its
// own extractor. Per-pair outputs go to out_dir/pair_NNN when out_dir is set.
BatchReport run_batch(const std::filesystem::path &manifest_path, const PipelineConfig &config,
                      const std::filesystem::path &out_dir = {});

std::string batch_report_json(const BatchReport &report);
// pair,stage,median_rtre,max_rtre,robustness
std::string batch_report_csv(const BatchReport &report);
// stage,pair,median_rtre (one row per available value, for box plots)
std::string boxplot_csv(const BatchReport &report);
void write_batch_report(const BatchReport &report, const std::filesystem::path &out_dir);

} // namespace slidereg
