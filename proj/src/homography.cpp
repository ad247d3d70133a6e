#include "miff/homography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "miff/error.hpp"

namespace miff {

namespace {

// Similarity that moves the centroid to the origin and scales the mean
// distance to sqrt(2).
Eigen::Matrix3d conditioning(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) fail(ErrorKind::Degenerate, "DLT: all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

Point2 transform(const Eigen::Matrix3d& t, Point2 p) {
  const Eigen::Vector3d q = t * Eigen::Vector3d(p.x, p.y, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

bool has_collinear_triple(std::span<const Point2> pts) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        const double ax = pts[j].x - pts[i].x, ay = pts[j].y - pts[i].y;
        const double bx = pts[k].x - pts[i].x, by = pts[k].y - pts[i].y;
        const double scale = std::hypot(ax, ay) * std::hypot(bx, by);
        if (std::abs(ax * by - ay * bx) <= 1e-9 * std::max(scale, 1e-300)) return true;
      }
    }
  }
  return false;
}

}  // namespace

Homography estimate_homography_dlt(std::span<const PointPair> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) fail(ErrorKind::Degenerate, "DLT needs at least 4 point pairs");
  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  const Eigen::Matrix3d ts = conditioning(src);
  const Eigen::Matrix3d td = conditioning(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = transform(ts, src[i]);
    dst[i] = transform(td, dst[i]);
  }
  if (n == 4 && (has_collinear_triple(src) || has_collinear_triple(dst))) {
    fail(ErrorKind::Degenerate, "DLT: minimal set contains three collinear points");
  }

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || sv(7) <= 1e-10 * sv(0)) {
    fail(ErrorKind::Degenerate, "DLT system is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d m = td.inverse() * hn * ts;
  try {
    return Homography(m);
  } catch (const Error&) {
    fail(ErrorKind::Degenerate, "DLT produced a singular homography");
  }
}

double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                const PointPair& pair) {
  const Point2 fwd = h.apply(pair.src);
  const Point2 bwd = h_inv.apply(pair.dst);
  const double e1 = (fwd.x - pair.dst.x) * (fwd.x - pair.dst.x) +
                    (fwd.y - pair.dst.y) * (fwd.y - pair.dst.y);
  const double e2 = (bwd.x - pair.src.x) * (bwd.x - pair.src.x) +
                    (bwd.y - pair.src.y) * (bwd.y - pair.src.y);
  const double e = std::sqrt(e1 + e2);
  return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

namespace {

std::vector<std::size_t> consensus(const Homography& h,
                                   std::span<const PointPair> pairs,
                                   double threshold) {
  std::vector<std::size_t> inliers;
  Homography inv;
  try {
    inv = h.inverse();
  } catch (const Error&) {
    return inliers;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (symmetric_transfer_error(h, inv, pairs[i]) < threshold) inliers.push_back(i);
  }
  return inliers;
}

}  // namespace

RansacResult ransac_homography(std::span<const PointPair> pairs,
                               const RansacConfig& config) {
  const std::size_t n = pairs.size();
  if (n < 4) {
    fail(ErrorKind::NoModel, "RANSAC needs at least 4 correspondences, got " +
                                 std::to_string(n));
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::optional<Homography> best;
  std::vector<std::size_t> best_inliers;
  double needed = config.iterations;
  for (int it = 0; it < config.iterations && it < needed; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = pick(rng);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      }
    }
    const std::array<PointPair, 4> sample{pairs[idx[0]], pairs[idx[1]], pairs[idx[2]],
                                          pairs[idx[3]]};
    Homography model;
    try {
      model = estimate_homography_dlt(sample);
    } catch (const Error&) {
      continue;
    }
    auto inliers = consensus(model, pairs, config.inlier_threshold);
    if (inliers.size() > best_inliers.size()) {
      best = model;
      best_inliers = std::move(inliers);
      if (best_inliers.size() == n) break;
      if (config.confidence < 1.0) {
        const double ratio = static_cast<double>(best_inliers.size()) / static_cast<double>(n);
        const double all_inlier = std::pow(ratio, 4.0);
        needed = std::log(1.0 - config.confidence) / std::log1p(-all_inlier);
      }
    }
  }
  if (!best || best_inliers.size() < 4) {
    fail(ErrorKind::NoModel, "RANSAC found no model with 4 or more inliers");
  }

  std::vector<PointPair> support;
  support.reserve(best_inliers.size());
  for (auto i : best_inliers) support.push_back(pairs[i]);
  try {
    Homography refit = estimate_homography_dlt(support);
    auto refit_inliers = consensus(refit, pairs, config.inlier_threshold);
    if (refit_inliers.size() >= best_inliers.size()) {
      return {refit, std::move(refit_inliers)};
    }
  } catch (const Error&) {
  }
  return {*best, std::move(best_inliers)};
}

Homography fractional_power(const Homography& h, double w) {
  if (!(w >= 0.0 && w <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "fractional_power: w must lie in [0,1]");
  }
  if (w == 0.0) return Homography::identity();
  if (w == 1.0) return h;

  const Eigen::Matrix3d m = h.matrix() / std::cbrt(h.matrix().determinant());
  Eigen::EigenSolver<Eigen::Matrix3d> es(m);
  if (es.info() != Eigen::Success) {
    fail(ErrorKind::Degenerate, "fractional_power: eigendecomposition failed");
  }
  const Eigen::Vector3cd lambda = es.eigenvalues();
  for (int k = 0; k < 3; ++k) {
    const auto l = lambda(k);
    if (l.real() < 0.0 && std::abs(l.imag()) <= 1e-12 * std::abs(l)) {
      fail(ErrorKind::Degenerate,
           "fractional_power: eigenvalue on the negative real axis has no principal power");
    }
  }

  const Eigen::Matrix3cd v = es.eigenvectors();
  Eigen::FullPivLU<Eigen::Matrix3cd> lu(v);
  const double cond = v.norm() * (lu.isInvertible() ? lu.inverse().norm() : INFINITY);
  Eigen::Matrix3d result;
  if (std::isfinite(cond) && cond < 1e6) {
    Eigen::Vector3cd powered;
    for (int k = 0; k < 3; ++k) powered(k) = std::exp(w * std::log(lambda(k)));
    result = (v * powered.asDiagonal() * lu.inverse()).real();
  } else {
    // Defective or nearly defective (e.g. pure translation): Schur-Pade.
    Eigen::Matrix3d base = m;
    Eigen::MatrixPower<Eigen::Matrix3d> power(base);
    result = power(w);
  }
  return Homography(result);
}

Homography linear_interpolation(const Homography& h, double w) {
  return Homography((1.0 - w) * Eigen::Matrix3d::Identity() + w * h.matrix());
}

}  // namespace miff
