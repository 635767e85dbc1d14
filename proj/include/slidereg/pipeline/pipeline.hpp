#pragma once

#include "slidereg/features/extractor.hpp"
#include "slidereg/localalign/phase_correlation.hpp"
#include "slidereg/prealign/prealign.hpp"
#include "slidereg/preprocess/color.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"
#include "slidereg/transform/stages.hpp"
#include "slidereg/transform/transform_file.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace slidereg {

inline constexpr const char *kModelEnvVar = "SLIDEREG_MODEL";
inline constexpr int kPrealignMaxDimension = 512;

struct PipelineConfig {
  PreprocMode mode = PreprocMode::Greyscale;
  MaskFlavor mask_flavor = MaskFlavor::TSEF;
  // Used when mask_flavor is External.
  std::filesystem::path ref_mask_path;
  std::filesystem::path mov_mask_path;

  // Working scales as fractions of level 0. Unset prealign: largest power of
  // two reduction with max dimension <= 512. Unset dfbr / export: twice and
  // four times the prealign scale, capped at 1.
  std::optional<double> prealign_scale;
  std::optional<double> dfbr_scale;
  std::optional<double> export_scale;

  int match_count = kDefaultMatchCount;
  EstimateOptions estimate;
  bool mask_admissibility = true;
  bool histogram_matching = true;
  bool apply_offset = true;
  OffsetScope offset_scope = OffsetScope::Global;
  PrealignOptions prealign;
  SegmentationOptions segmentation;
  std::filesystem::path model_path;
  int workers = 1; // batch only

  void validate() const;
};

// Level-0 / working-scale conversion for a downsample factor f with pixel
// centres p0 = f p + (f - 1) / 2.
PlanarTransform working_to_level0(const PlanarTransform &t, double factor);
PlanarTransform level0_to_working(const PlanarTransform &t, double factor);

struct WorkingScales {
  double prealign = 1.0; // downsample factors (>= 1)
  double dfbr = 1.0;
  double export_ = 1.0;
};
WorkingScales choose_working_scales(int max_dimension, const PipelineConfig &config);

// Power-of-two factors use repeated 2x2 box halving, others area resizing.
Raster working_raster(const Raster &level0, double factor);

struct StageDiagnostics {
  std::string name;
  bool ok = false;
  std::size_t matches = 0;
  double score = 0.0; // Dice for prealign/offset, residual RMS for feature stages
  double seconds = 0.0;
  std::string message;

  static StageDiagnostics named(std::string n) {
    StageDiagnostics d;
    d.name = std::move(n);
    return d;
  }
};

struct RegistrationResult {
  TransformFile file;
  std::vector<StageDiagnostics> stages;
  std::vector<std::string> warnings;
  WorkingScales scales;
  bool partial = false;
  std::string error;
  Raster warped_dfbr; // moving image warped at the dfbr scale (when available)
};

// Registers two in-memory level-0 images. Stage failures stop the cascade
// and flag the result partial; earlier stage matrices are kept. External
// masks (any size) replace segmentation when given.
RegistrationResult register_images(const Raster &ref, const Raster &mov,
                                   const Extractor &extractor, const PipelineConfig &config,
                                   const TissueMask *ref_mask = nullptr,
                                   const TissueMask *mov_mask = nullptr);

// Loads images (and external masks), registers, and writes transform.json,
// diagnostics.json, the dfbr-scale warp and the export-scale images into
// `out_dir` when it is not empty.
RegistrationResult run_pipeline(const std::filesystem::path &ref_path,
                                const std::filesystem::path &mov_path,
                                const PipelineConfig &config, const Extractor &extractor,
                                const std::filesystem::path &out_dir = {});

void write_outputs(const RegistrationResult &result, const Raster &ref, const Raster &mov,
                   const std::filesystem::path &out_dir);

std::string diagnostics_json(const RegistrationResult &result);

// Model path from config, falling back to the environment variable.
std::filesystem::path resolve_model_path(const PipelineConfig &config);

} // namespace slidereg
