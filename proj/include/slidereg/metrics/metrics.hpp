#pragma once

#include "slidereg/transform/planar_transform.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace slidereg {

struct LandmarkSet {
  std::vector<Point2> points;
  std::vector<std::string> names; // empty or one per point
  std::size_t size() const { return points.size(); }
};

std::vector<double> tre(const LandmarkSet &ref, const LandmarkSet &mov_transformed);
std::vector<double> rtre(const std::vector<double> &tre_values, double ref_width,
                         double ref_height);

// Mean of the two central values for even lengths. Throws on empty input.
double median(std::vector<double> values);

struct PairMetrics {
  double median_rtre = 0.0;
  double max_rtre = 0.0;
  std::optional<double> robustness;
};

struct MetricsReport {
  std::vector<PairMetrics> pairs;
  double mm_rtre = 0.0;   // median of per-pair medians
  double am_rtre = 0.0;   // mean of per-pair medians
  double amax_rtre = 0.0; // mean of per-pair maxima
  std::optional<double> mean_robustness;
};

MetricsReport aggregate(const std::vector<std::vector<double>> &per_pair_rtre);
// Same, with per-pair robustness values attached (sizes must agree).
MetricsReport aggregate(const std::vector<std::vector<double>> &per_pair_rtre,
                        const std::vector<double> &per_pair_robustness);

// Fraction of landmarks strictly closer to their reference after than before.
double robustness(const LandmarkSet &ref, const LandmarkSet &mov_before,
                  const LandmarkSet &mov_after);

// ANHIR CSV: header row, then index,x,y per row.
LandmarkSet load_landmarks(const std::filesystem::path &path);
LandmarkSet parse_landmarks(const std::string &text, const std::string &source = "<input>");
void save_landmarks(const LandmarkSet &set, const std::filesystem::path &path);

LandmarkSet transform_landmarks(const LandmarkSet &set, const PlanarTransform &t);

} // namespace slidereg
