#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "miff/geometry.hpp"

namespace miff {

struct PointPair {
  Point2 src;
  Point2 dst;
};

// Normalized direct linear transform (Hartley conditioning) fitted by least
// squares over all pairs. Throws Error(Degenerate) on rank-deficient
// configurations, including minimal sets with three collinear points.
Homography estimate_homography_dlt(std::span<const PointPair> pairs);

// sqrt(|H src - dst|^2 + |H^-1 dst - src|^2)
double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                const PointPair& pair);

struct RansacConfig {
  int iterations = 500;  // upper bound on sampled models
  double inlier_threshold = 1.0;  // pixels
  std::uint64_t seed = 0;
  // Sampling stops once an all-inlier sample has been drawn with this
  // probability given the best inlier ratio so far; 1 disables early exit.
  double confidence = 0.999;
};

struct RansacResult {
  Homography model;
  std::vector<std::size_t> inliers;
};

// Four-point RANSAC followed by a refit on the consensus set. Throws
// Error(NoModel) when no model gathers at least four inliers.
RansacResult ransac_homography(std::span<const PointPair> pairs,
                               const RansacConfig& config);

// Principal power H^w for w in [0,1] via eigendecomposition of the
// determinant-normalized matrix. H^0 = I and H^1 = H exactly. Throws
// Error(Degenerate) when an eigenvalue lies on the negative real axis.
Homography fractional_power(const Homography& h, double w);

// (1-w) I + w H, used when no principal power exists.
Homography linear_interpolation(const Homography& h, double w);

}  // namespace miff
