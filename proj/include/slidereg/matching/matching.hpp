#pragma once

#include "slidereg/features/extractor.hpp"
#include "slidereg/preprocess/tissue_mask.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace slidereg {

inline constexpr int kDefaultMatchCount = 128;

// rows: reference feature points, cols: moving feature points.
using DistanceMatrix = Eigen::MatrixXd;

// Euclidean distance between every descriptor pair, in double precision.
DistanceMatrix pairwise_distances(const FeatureMap &ref, const FeatureMap &mov);

struct GridShape {
  int height = 0;
  int width = 0;
  int points() const { return height * width; }
};

// sqrt(2) D3 + D4[cell4(i), cell4(j)] + D5[cell5(i), cell5(j)], where point
// i = row * width + col of the pool3 grid owns pool4 cell (row/2, col/2) and
// pool5 cell (row/4, col/4), clamped to the coarser grids.
DistanceMatrix combine_distances(const DistanceMatrix &d3, const DistanceMatrix &d4,
                                 const DistanceMatrix &d5, GridShape g3,
                                 GridShape g4, GridShape g5);
// Square grids inferred from the matrix sizes.
DistanceMatrix combine_distances(const DistanceMatrix &d3, const DistanceMatrix &d4,
                                 const DistanceMatrix &d5);

struct GridMatch {
  int ref = 0; // row index
  int mov = 0; // column index
  double quality = 0.0;
  bool operator==(const GridMatch &) const = default;
};

struct MatchOptions {
  int count = kDefaultMatchCount;
  // Optional per-point admissibility (non-empty => size must match D).
  std::vector<std::uint8_t> ref_admissible;
  std::vector<std::uint8_t> mov_admissible;
};

// Column-wise best reference point for every admissible moving point;
// quality = second smallest - smallest distance in that column. Returns the
// top `count` by quality (descending; ties keep the lower column). Argmin
// ties resolve to the lowest row.
std::vector<GridMatch> match_points(const DistanceMatrix &d, const MatchOptions &options);
std::vector<GridMatch> match_points(const DistanceMatrix &d, int count = kDefaultMatchCount);

// Maps the 224 frame back to level pixels: p = origin + p_224 * scale.
struct MatchFrame {
  Point2 origin{0, 0};
  Point2 scale{1, 1};
  Point2 to_level(const Point2 &p) const {
    return {origin.x() + p.x() * scale.x(), origin.y() + p.y() * scale.y()};
  }
};

struct MatchPair {
  Point2 ref;
  Point2 mov;
  double quality = 0.0;
};

struct MatchSet {
  std::vector<MatchPair> pairs;
  MatchFrame frame;
  std::size_t size() const { return pairs.size(); }
};

MatchSet to_level_coords(const std::vector<GridMatch> &matches, const MatchFrame &frame,
                         const FeatureGridGeometry &geometry = {});

// Feature points whose 8x8 cell is at least `min_fraction` foreground.
std::vector<std::uint8_t> admissible_points(const TissueMask &mask224,
                                            const FeatureGridGeometry &geometry = {},
                                            double min_fraction = 0.5);

// x_ref,y_ref,x_mov,y_mov,quality
void write_matches_csv(const MatchSet &matches, const std::filesystem::path &path);

} // namespace slidereg
