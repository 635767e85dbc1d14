#include "slidereg/metrics/metrics.hpp"

#include "slidereg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace slidereg {

std::vector<double> tre(const LandmarkSet &ref, const LandmarkSet &mov) {
  if (ref.size() != mov.size())
    throw Error("landmark count mismatch: " + std::to_string(ref.size()) + " vs " +
                std::to_string(mov.size()));
  std::vector<double> out(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    out[i] = std::hypot(ref.points[i].x() - mov.points[i].x(),
                        ref.points[i].y() - mov.points[i].y());
  return out;
}

std::vector<double> rtre(const std::vector<double> &tre_values, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0))
    throw Error("image dimensions must be positive");
  const double diag = std::hypot(w, h);
  std::vector<double> out(tre_values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = tre_values[i] / diag;
  return out;
}

double median(std::vector<double> v) {
  if (v.empty())
    throw Error("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MetricsReport aggregate(const std::vector<std::vector<double>> &per_pair) {
  if (per_pair.empty())
    throw Error("aggregate needs at least one pair");
  MetricsReport r;
  std::vector<double> medians, maxes;
  for (const auto &list : per_pair) {
    if (list.empty())
      throw Error("aggregate: a pair has no landmarks");
    PairMetrics p;
    p.median_rtre = median(list);
    p.max_rtre = *std::max_element(list.begin(), list.end());
    medians.push_back(p.median_rtre);
    maxes.push_back(p.max_rtre);
    r.pairs.push_back(p);
  }
  const double n = static_cast<double>(per_pair.size());
  r.mm_rtre = median(medians);
  r.am_rtre = std::accumulate(medians.begin(), medians.end(), 0.0) / n;
  r.amax_rtre = std::accumulate(maxes.begin(), maxes.end(), 0.0) / n;
  return r;
}

MetricsReport aggregate(const std::vector<std::vector<double>> &per_pair,
                        const std::vector<double> &per_pair_robustness) {
  if (per_pair_robustness.size() != per_pair.size())
    throw Error("robustness list size differs from the pair count");
  MetricsReport r = aggregate(per_pair);
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    r.pairs[i].robustness = per_pair_robustness[i];
  r.mean_robustness = std::accumulate(per_pair_robustness.begin(), per_pair_robustness.end(), 0.0) /
                      static_cast<double>(per_pair_robustness.size());
  return r;
}

double robustness(const LandmarkSet &ref, const LandmarkSet &before, const LandmarkSet &after) {
  const auto b = tre(ref, before);
  const auto a = tre(ref, after);
  if (a.empty())
    throw Error("robustness needs at least one landmark");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    ok += a[i] < b[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

namespace {

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  const auto last = s.find_last_not_of(" \t\r\"");
  return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
}

bool parse_double(const std::string &text, double &out) {
  const std::string t = trim(text);
  if (t.empty())
    return false;
  const auto *end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

} // namespace

LandmarkSet parse_landmarks(const std::string &text, const std::string &source) {
  LandmarkSet set;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split_csv(line);
    double x = 0.0, y = 0.0;
    if (cells.size() < 3 || !parse_double(cells[1], x) || !parse_double(cells[2], y))
      throw Error(source + ":" + std::to_string(line_no) + ": malformed landmark row '" +
                  trim(line) + "'");
    set.points.emplace_back(x, y);
    set.names.push_back(trim(cells[0]));
  }
  return set;
}

LandmarkSet load_landmarks(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot read landmarks: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_landmarks(buf.str(), path.string());
}

void save_landmarks(const LandmarkSet &set, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw Error("cannot write landmarks: " + path.string());
  out << ",X,Y\n" << std::setprecision(17);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string name = i < set.names.size() ? set.names[i] : std::to_string(i);
    out << name << ',' << set.points[i].x() << ',' << set.points[i].y() << '\n';
  }
}

LandmarkSet transform_landmarks(const LandmarkSet &set, const PlanarTransform &t) {
  LandmarkSet out = set;
  for (auto &p : out.points)
    p = t.apply(p);
  return out;
}

} // namespace slidereg
