#include "slidereg/matching/matching.hpp"

#include "slidereg/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace slidereg {

namespace {

Eigen::MatrixXd as_matrix(const FeatureMap &f) {
  Eigen::MatrixXd m(f.points(), f.channels);
  for (int i = 0; i < f.points(); ++i) {
    const auto d = f.descriptor(i);
    for (int c = 0; c < f.channels; ++c)
      m(i, c) = d[c];
  }
  return m;
}

GridShape square_grid(const DistanceMatrix &d, const char *name) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d.rows()))));
  if (side * side != d.rows() || d.rows() != d.cols())
    throw Error(std::string("distance matrix ") + name + " is not a square grid");
  return {side, side};
}

} // namespace

DistanceMatrix pairwise_distances(const FeatureMap &ref, const FeatureMap &mov) {
  if (ref.channels != mov.channels)
    throw Error("descriptor length mismatch: " + std::to_string(ref.channels) + " vs " +
                std::to_string(mov.channels));
  const Eigen::MatrixXd a = as_matrix(ref);
  const Eigen::MatrixXd b = as_matrix(mov);
  DistanceMatrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    d.row(i) = (b.rowwise() - a.row(i)).rowwise().norm().transpose();
  return d;
}

DistanceMatrix combine_distances(const DistanceMatrix &d3, const DistanceMatrix &d4,
                                 const DistanceMatrix &d5, GridShape g3, GridShape g4,
                                 GridShape g5) {
  if (d3.rows() != g3.points() || d3.cols() != g3.points() || d4.rows() != g4.points() ||
      d4.cols() != g4.points() || d5.rows() != g5.points() || d5.cols() != g5.points())
    throw Error("distance matrix sizes do not match the grid shapes");
  auto halves = [](int coarse, int fine) { return coarse == fine / 2 || coarse == (fine + 1) / 2; };
  if (!halves(g4.height, g3.height) || !halves(g4.width, g3.width) ||
      !halves(g5.height, g4.height) || !halves(g5.width, g4.width))
    throw Error("grid shapes are not successive halvings");
  const int n = g3.points();
  std::vector<int> cell4(n), cell5(n);
  for (int i = 0; i < n; ++i) {
    const int r = i / g3.width, c = i % g3.width;
    cell4[i] = std::min(r / 2, g4.height - 1) * g4.width + std::min(c / 2, g4.width - 1);
    cell5[i] = std::min(r / 4, g5.height - 1) * g5.width + std::min(c / 4, g5.width - 1);
  }
  DistanceMatrix d(n, n);
  const double w3 = std::sqrt(2.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      d(i, j) = w3 * d3(i, j) + d4(cell4[i], cell4[j]) + d5(cell5[i], cell5[j]);
  return d;
}

DistanceMatrix combine_distances(const DistanceMatrix &d3, const DistanceMatrix &d4,
                                 const DistanceMatrix &d5) {
  return combine_distances(d3, d4, d5, square_grid(d3, "D3"), square_grid(d4, "D4"),
                           square_grid(d5, "D5"));
}

std::vector<GridMatch> match_points(const DistanceMatrix &d, const MatchOptions &options) {
  if (options.count < 1)
    throw Error("match count must be at least 1");
  const auto rows = static_cast<int>(d.rows());
  const auto cols = static_cast<int>(d.cols());
  if (!options.ref_admissible.empty() && static_cast<int>(options.ref_admissible.size()) != rows)
    throw Error("reference admissibility size differs from the distance matrix");
  if (!options.mov_admissible.empty() && static_cast<int>(options.mov_admissible.size()) != cols)
    throw Error("moving admissibility size differs from the distance matrix");
  auto row_ok = [&](int i) { return options.ref_admissible.empty() || options.ref_admissible[i]; };
  auto col_ok = [&](int j) { return options.mov_admissible.empty() || options.mov_admissible[j]; };
  int usable_rows = 0;
  for (int i = 0; i < rows; ++i)
    usable_rows += row_ok(i) ? 1 : 0;
  if (usable_rows < 2)
    throw Error("matching needs at least 2 reference points");

  std::vector<GridMatch> candidates;
  candidates.reserve(static_cast<std::size_t>(cols));
  for (int j = 0; j < cols; ++j) {
    if (!col_ok(j))
      continue;
    int best = -1;
    double first = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows; ++i) {
      if (!row_ok(i))
        continue;
      const double v = d(i, j);
      if (v < first) {
        second = first;
        first = v;
        best = i;
      } else if (v < second) {
        second = v;
      }
    }
    candidates.push_back({best, j, second - first});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const GridMatch &a, const GridMatch &b) { return a.quality > b.quality; });
  if (static_cast<int>(candidates.size()) > options.count)
    candidates.resize(static_cast<std::size_t>(options.count));
  return candidates;
}

std::vector<GridMatch> match_points(const DistanceMatrix &d, int count) {
  MatchOptions options;
  options.count = count;
  return match_points(d, options);
}

MatchSet to_level_coords(const std::vector<GridMatch> &matches, const MatchFrame &frame,
                         const FeatureGridGeometry &geometry) {
  MatchSet out;
  out.frame = frame;
  out.pairs.reserve(matches.size());
  for (const auto &m : matches)
    out.pairs.push_back({frame.to_level(geometry.center(m.ref)),
                         frame.to_level(geometry.center(m.mov)), m.quality});
  return out;
}

std::vector<std::uint8_t> admissible_points(const TissueMask &mask224,
                                            const FeatureGridGeometry &geometry,
                                            double min_fraction) {
  const int side = geometry.grid * geometry.spacing;
  if (mask224.width != side || mask224.height != side)
    throw Error("admissibility mask must be " + std::to_string(side) + "x" +
                std::to_string(side));
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(geometry.points()), 0);
  const int s = geometry.spacing;
  for (int idx = 0; idx < geometry.points(); ++idx) {
    const int r = idx / geometry.grid, c = idx % geometry.grid;
    int fg = 0;
    for (int y = r * s; y < (r + 1) * s; ++y)
      for (int x = c * s; x < (c + 1) * s; ++x)
        fg += mask224.at(x, y) ? 1 : 0;
    ok[idx] = fg >= min_fraction * s * s ? 1 : 0;
  }
  return ok;
}

void write_matches_csv(const MatchSet &matches, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "x_ref,y_ref,x_mov,y_mov,quality\n" << std::setprecision(17);
  for (const auto &p : matches.pairs)
    out << p.ref.x() << ',' << p.ref.y() << ',' << p.mov.x() << ',' << p.mov.y() << ','
        << p.quality << '\n';
}

} // namespace slidereg
