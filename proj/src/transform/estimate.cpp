#include "slidereg/transform/estimate.hpp"

#include "slidereg/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace slidereg {

namespace {

PlanarTransform procrustes(std::span<const Point2> mov, std::span<const Point2> ref,
                           bool with_scale, int level) {
  const auto n = static_cast<double>(mov.size());
  Point2 mu_m = Point2::Zero(), mu_r = Point2::Zero();
  for (std::size_t i = 0; i < mov.size(); ++i) {
    mu_m += mov[i];
    mu_r += ref[i];
  }
  mu_m /= n;
  mu_r /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double var_m = 0.0;
  for (std::size_t i = 0; i < mov.size(); ++i) {
    const Point2 x = mov[i] - mu_m;
    const Point2 y = ref[i] - mu_r;
    cov += y * x.transpose();
    var_m += x.squaredNorm();
  }
  if (var_m <= 1e-12 * n)
    throw Error("degenerate configuration: moving points are coincident");
  cov /= n;
  var_m /= n;

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0)
    d(1, 1) = -1.0;
  Eigen::Matrix2d r = svd.matrixU() * d * svd.matrixV().transpose();
  // Re-orthonormalize from the angle so the result is rigid to rounding.
  const double theta = std::atan2(r(1, 0), r(0, 0));
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  double s = 1.0;
  if (with_scale)
    s = (svd.singularValues().asDiagonal() * d).trace() / var_m;
  if (!(s > 0.0))
    throw Error("degenerate configuration: non-positive scale");

  PlanarTransform t = PlanarTransform::identity(level);
  t.m.topLeftCorner<2, 2>() = s * r;
  t.m.topRightCorner<2, 1>() = mu_r - s * r * mu_m;
  t.kind = with_scale ? TransformKind::Similarity : TransformKind::Rigid;
  return t;
}

PlanarTransform affine_fit(std::span<const Point2> mov, std::span<const Point2> ref,
                           int level) {
  // Collinearity check on the centred moving points.
  Point2 mu = Point2::Zero();
  for (const auto &p : mov)
    mu += p;
  mu /= static_cast<double>(mov.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto &p : mov)
    scatter += (p - mu) * (p - mu).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(1);
  if (hi <= 1e-12 || lo <= 1e-9 * hi)
    throw Error("degenerate configuration: moving points are collinear");

  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 2> atb = Eigen::Matrix<double, 3, 2>::Zero();
  for (std::size_t i = 0; i < mov.size(); ++i) {
    const Eigen::Vector3d a(mov[i].x() - mu.x(), mov[i].y() - mu.y(), 1.0);
    ata += a * a.transpose();
    atb += a * ref[i].transpose();
  }
  const Eigen::Matrix<double, 3, 2> p = ata.ldlt().solve(atb);
  PlanarTransform t = PlanarTransform::identity(level);
  t.m.topLeftCorner<2, 2>() = p.topRows<2>().transpose();
  t.m.topRightCorner<2, 1>() = p.row(2).transpose() - t.linear() * mu;
  t.kind = TransformKind::Affine;
  return t;
}

} // namespace

PlanarTransform estimate(std::span<const Point2> mov, std::span<const Point2> ref,
                         TransformKind kind, int level) {
  if (mov.size() != ref.size())
    throw Error("point set sizes differ");
  const std::size_t need = kind == TransformKind::Affine ? 3 : 2;
  if (mov.size() < need)
    throw Error("insufficient matches: " + std::to_string(mov.size()) + " (need " +
                std::to_string(need) + ")");
  if (kind == TransformKind::Affine)
    return affine_fit(mov, ref, level);
  return procrustes(mov, ref, kind == TransformKind::Similarity, level);
}

PlanarTransform estimate(const MatchSet &matches, const EstimateOptions &options, int level) {
  std::vector<Point2> mov, ref;
  for (const auto &p : matches.pairs) {
    mov.push_back(p.mov);
    ref.push_back(p.ref);
  }
  PlanarTransform t = estimate(mov, ref, options.kind, level);
  if (!options.trimmed || mov.size() < 3)
    return t;

  std::vector<std::size_t> order(mov.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> res(mov.size());
  for (std::size_t i = 0; i < mov.size(); ++i)
    res[i] = (t.apply(mov[i]) - ref[i]).squaredNorm();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res[a] < res[b]; });
  const auto drop = static_cast<std::size_t>(std::floor(options.trim_fraction * mov.size()));
  const std::size_t keep = std::max(order.size() - drop, std::size_t{2});
  std::vector<std::size_t> kept(order.begin(), order.begin() + static_cast<long>(keep));
  std::sort(kept.begin(), kept.end());
  std::vector<Point2> m2, r2;
  for (std::size_t i : kept) {
    m2.push_back(mov[i]);
    r2.push_back(ref[i]);
  }
  try {
    return estimate(m2, r2, options.kind, level);
  } catch (const Error &) {
    return t;
  }
}

double rms_residual(const PlanarTransform &t, std::span<const Point2> mov,
                    std::span<const Point2> ref) {
  if (mov.size() != ref.size())
    throw Error("point set sizes differ");
  if (mov.empty())
    return 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < mov.size(); ++i)
    ss += (t.apply(mov[i]) - ref[i]).squaredNorm();
  return std::sqrt(ss / static_cast<double>(mov.size()));
}

double rms_residual(const PlanarTransform &t, const MatchSet &matches) {
  std::vector<Point2> mov, ref;
  for (const auto &p : matches.pairs) {
    mov.push_back(p.mov);
    ref.push_back(p.ref);
  }
  return rms_residual(t, mov, ref);
}

} // namespace slidereg
