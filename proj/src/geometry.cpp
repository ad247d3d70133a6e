#include "miff/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "miff/error.hpp"

namespace miff {

Homography::Homography(const Eigen::Matrix3d& m) : m_(m) {
  if (!m_.allFinite()) fail(ErrorKind::InvalidArgument, "homography has non-finite entries");
  if (m_(2, 2) != 0.0) m_ /= m_(2, 2);
  if (std::abs(m_.determinant()) <= 1e-12) {
    fail(ErrorKind::InvalidArgument, "homography is singular");
  }
}

Point2 Homography::apply(Point2 p) const {
  const Eigen::Vector3d q = m_ * Eigen::Vector3d(p.x, p.y, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::operator*(const Homography& rhs) const {
  return Homography(m_ * rhs.m_);
}

Rect centered_rect(double width, double height, double fraction) {
  const double w = width * fraction;
  const double h = height * fraction;
  const double x0 = (width - w) / 2.0;
  const double y0 = (height - h) / 2.0;
  return {x0, y0, x0 + w, y0 + h};
}

double signed_area(std::span<const Point2> polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return twice / 2.0;
}

double area(std::span<const Point2> polygon) { return std::abs(signed_area(polygon)); }

namespace {

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Keeps the part of `subject` on the side of edge a->b where cross >= 0 (or
// <= 0 when `keep_left` is false).
Polygon clip_half_plane(const Polygon& subject, Point2 a, Point2 b, bool keep_left) {
  Polygon out;
  const std::size_t n = subject.size();
  if (n == 0) return out;
  auto side = [&](Point2 p) {
    const double c = cross(a, b, p);
    return keep_left ? c : -c;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& cur = subject[i];
    const Point2& prev = subject[(i + n - 1) % n];
    const double sc = side(cur);
    const double sp = side(prev);
    if (sc >= 0.0) {
      if (sp < 0.0) {
        const double t = sp / (sp - sc);
        out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      out.push_back(cur);
    } else if (sp >= 0.0) {
      const double t = sp / (sp - sc);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
  }
  return out;
}

}  // namespace

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  const bool ccw = signed_area(clip) > 0.0;
  Polygon out = subject;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    out = clip_half_plane(out, clip[i], clip[(i + 1) % clip.size()], ccw);
  }
  return out;
}

std::vector<Polygon> subtract_convex(const std::vector<Polygon>& pieces,
                                     const Polygon& cutter) {
  const bool ccw = signed_area(cutter) > 0.0;
  std::vector<Polygon> out;
  for (const auto& piece : pieces) {
    // piece \ cutter = union over edges k of
    //   piece ∩ outside(edge k) ∩ inside(edges < k), which are disjoint.
    Polygon inside = piece;
    for (std::size_t k = 0; k < cutter.size() && !inside.empty(); ++k) {
      const Point2 a = cutter[k];
      const Point2 b = cutter[(k + 1) % cutter.size()];
      Polygon outside = clip_half_plane(inside, a, b, !ccw);
      if (outside.size() >= 3 && area(outside) > 0.0) out.push_back(std::move(outside));
      inside = clip_half_plane(inside, a, b, ccw);
    }
  }
  return out;
}

Polygon warp_frame(const Homography& h, double width, double height) {
  const Polygon corners{{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}};
  Polygon warped;
  warped.reserve(4);
  for (const auto& c : corners) {
    const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(c.x, c.y, 1.0);
    if (!(q.z() > 0.0)) {
      fail(ErrorKind::InvalidArgument, "warped frame crosses the line at infinity");
    }
    warped.push_back({q.x() / q.z(), q.y() / q.z()});
  }
  const double orientation = signed_area(corners);
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = cross(warped[i], warped[(i + 1) % 4], warped[(i + 2) % 4]);
    if (c * orientation <= 0.0) {
      fail(ErrorKind::InvalidArgument, "warped frame is not convex with preserved orientation");
    }
  }
  return warped;
}

double coverage_fraction(const Homography& h, double width, double height,
                         const Rect& crop) {
  const Polygon clipped = clip_convex(warp_frame(h, width, height), crop.polygon());
  return std::clamp(area(clipped) / crop.area(), 0.0, 1.0);
}

double coverage_fraction(std::span<const Homography> hs, double width,
                         double height, const Rect& crop) {
  std::vector<Polygon> uncovered{crop.polygon()};
  for (const auto& h : hs) {
    uncovered = subtract_convex(uncovered, warp_frame(h, width, height));
    if (uncovered.empty()) break;
  }
  double remaining = 0.0;
  for (const auto& p : uncovered) remaining += area(p);
  return std::clamp(1.0 - remaining / crop.area(), 0.0, 1.0);
}

}  // namespace miff
