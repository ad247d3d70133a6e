#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "miff/features.hpp"

namespace miff {

// Planar projective transform, stored with the bottom-right entry scaled to 1
// whenever it is nonzero. Construction rejects non-finite or singular input.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Point2 apply(Point2 p) const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;

  // Frobenius distance between the normalized matrices.
  double distance(const Homography& other) const { return (m_ - other.m_).norm(); }

 private:
  Eigen::Matrix3d m_;
};

using Polygon = std::vector<Point2>;

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  Polygon polygon() const { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }
};

// Axis-aligned rectangle centered in a width x height frame whose sides are
// `fraction` of the frame sides.
Rect centered_rect(double width, double height, double fraction);

double signed_area(std::span<const Point2> polygon);
double area(std::span<const Point2> polygon);

// Sutherland-Hodgman clipping of `subject` by the convex polygon `clip`
// (either orientation).
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

// Convex pieces of `pieces` minus the convex polygon `cutter`.
std::vector<Polygon> subtract_convex(const std::vector<Polygon>& pieces,
                                     const Polygon& cutter);

// The frame rectangle [0,W]x[0,H] mapped through `h`. Throws
// Error(InvalidArgument) if the mapped quadrilateral is not convex with the
// original orientation (a corner crossed the line at infinity or the
// transform folded the frame).
Polygon warp_frame(const Homography& h, double width, double height);

// Fraction of `crop` covered by the warped frame, in [0,1].
double coverage_fraction(const Homography& h, double width, double height,
                         const Rect& crop);

// Fraction of `crop` covered by the union of several warped frames.
double coverage_fraction(std::span<const Homography> hs, double width,
                         double height, const Rect& crop);

}  // namespace miff
