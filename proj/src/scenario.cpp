#include "miff/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Core>

#include "miff/error.hpp"

namespace miff {

void ScenarioSpec::validate() const {
  if (length < 2) fail(ErrorKind::Config, "scenario needs at least 2 frames");
  if (!(fps > 0.0)) fail(ErrorKind::Config, "scenario fps must be positive");
  if (width < 8 || height < 8) fail(ErrorKind::Config, "scenario frame is too small");
  if (histogram_bins < 2) fail(ErrorKind::Config, "scenario needs at least 2 histogram bins");
  if (!motion_script.empty() && motion_script.size() != length) {
    fail(ErrorKind::Config, "motion script must have one pose per frame");
  }
  auto blocks = semantic_blocks;
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.start >= b.end || b.end > length) {
      fail(ErrorKind::Config, "semantic block [" + std::to_string(b.start) + ", " +
                                  std::to_string(b.end) + ") outside [0, length)");
    }
    if (!(b.intensity > 0.0)) fail(ErrorKind::Config, "block intensity must be positive");
    if (i > 0 && b.start < blocks[i - 1].end) {
      fail(ErrorKind::Config, "semantic blocks overlap at frame " + std::to_string(b.start));
    }
  }
}

Homography GroundTruth::camera(std::size_t k, int width, int height) const {
  const auto& p = poses.at(k);
  const double cx = width / 2.0, cy = height / 2.0;
  const double c = std::cos(p.rotation), s = std::sin(p.rotation);
  Eigen::Matrix3d m;
  // T(c + t) R T(-c)
  m << c, -s, cx + p.tx - (c * cx - s * cy),
       s, c, cy + p.ty - (s * cx + c * cy),
       0, 0, 1;
  return Homography(m);
}

Homography GroundTruth::relative(std::size_t a, std::size_t b, int width, int height) const {
  return camera(b, width, height) * camera(a, width, height).inverse();
}

namespace {

struct WorldPoint {
  double x;
  double y;
  std::int64_t id;
};

std::vector<CameraPose> camera_path(const ScenarioSpec& spec, std::mt19937_64& rng) {
  if (!spec.motion_script.empty()) return spec.motion_script;
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kCorrelation = 0.8;
  const double innovation = std::sqrt(1.0 - kCorrelation * kCorrelation);
  std::vector<CameraPose> poses(spec.length);
  double sx = 0.0, sy = 0.0, sr = 0.0;
  for (std::size_t k = 0; k < spec.length; ++k) {
    sx = kCorrelation * sx + innovation * spec.motion.shake_px * gauss(rng);
    sy = kCorrelation * sy + innovation * spec.motion.shake_px * gauss(rng);
    sr = kCorrelation * sr + innovation * spec.motion.shake_rotation * gauss(rng);
    poses[k] = {-spec.motion.pan_speed * static_cast<double>(k) + sx, sy, sr};
  }
  return poses;
}

std::vector<WorldPoint> world_points(const ScenarioSpec& spec,
                                     const std::vector<CameraPose>& poses,
                                     std::mt19937_64& rng) {
  double min_tx = 0.0, max_tx = 0.0, max_ty = 0.0;
  for (const auto& p : poses) {
    min_tx = std::min(min_tx, p.tx);
    max_tx = std::max(max_tx, p.tx);
    max_ty = std::max(max_ty, std::abs(p.ty));
  }
  const double margin = 0.2 * std::max(spec.width, spec.height) + max_ty;
  const double x0 = -max_tx - margin;
  const double x1 = spec.width - min_tx + margin;
  const double y0 = -margin;
  const double y1 = spec.height + margin;
  const double density =
      spec.keypoints_per_frame / (static_cast<double>(spec.width) * spec.height);
  const auto count = static_cast<std::size_t>(std::ceil(density * (x1 - x0) * (y1 - y0)));
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::vector<WorldPoint> pts(count);
  for (std::size_t i = 0; i < count; ++i) pts[i] = {ux(rng), uy(rng), 0};
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  for (std::size_t i = 0; i < count; ++i) pts[i].id = static_cast<std::int64_t>(i);
  return pts;
}

std::vector<double> appearance_histogram(const ScenarioSpec& spec, const CameraPose& pose,
                                         double intensity, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto bins = static_cast<std::size_t>(spec.histogram_bins);
  const double b = static_cast<double>(bins);
  const double phase = 2.0 * std::numbers::pi * (-pose.tx) / 2000.0;
  const double mode = b / 2.0 + b / 4.0 * std::sin(phase) + 0.05 * b * intensity;
  const double width = b / 6.0;
  std::vector<double> h(bins);
  double sum = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double d = (static_cast<double>(i) + 0.5 - mode) / width;
    h[i] = std::max(0.0, (std::exp(-0.5 * d * d) + 0.02) * (1.0 + 0.02 * gauss(rng)));
    sum += h[i];
  }
  for (auto& v : h) v /= sum;
  return h;
}

}  // namespace

Scenario synthesize_scenario(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scenario out;
  out.spec = spec;
  out.truth.poses = camera_path(spec, rng);
  out.truth.intensity.assign(spec.length, 0.0);
  for (const auto& b : spec.semantic_blocks) {
    for (std::size_t k = b.start; k < b.end; ++k) out.truth.intensity[k] = b.intensity;
  }
  const auto points = world_points(spec, out.truth.poses, rng);

  out.stream.fps = spec.fps;
  out.stream.frames.resize(spec.length);
  const double w = spec.width, h = spec.height;
  const Point2 center{w / 2.0, h / 2.0};
  const double reach = std::hypot(w, h);
  Point2 roi_offset{0.0, 0.0};

  for (std::size_t k = 0; k < spec.length; ++k) {
    auto& f = out.stream.frames[k];
    f.frame_index = k;
    f.width = spec.width;
    f.height = spec.height;

    const Homography cam = out.truth.camera(k, spec.width, spec.height);
    const Homography cam_inv = cam.inverse();
    const Point2 world_center = cam_inv.apply(center);
    const auto lo = std::lower_bound(points.begin(), points.end(), world_center.x - reach,
                                     [](const WorldPoint& p, double x) { return p.x < x; });
    for (auto it = lo; it != points.end() && it->x <= world_center.x + reach; ++it) {
      const Point2 img = cam.apply({it->x, it->y});
      if (img.x < 0.0 || img.y < 0.0 || img.x >= w || img.y >= h) continue;
      f.keypoints.push_back({it->id, img.x + spec.noise.keypoint_px * gauss(rng),
                             img.y + spec.noise.keypoint_px * gauss(rng)});
    }
    std::sort(f.keypoints.begin(), f.keypoints.end(),
              [](const auto& a, const auto& b) { return a.track_id < b.track_id; });

    // Image-plane motion of the center to the next frame drives FOE and flow.
    Point2 step{0.0, 0.0};
    if (k + 1 < spec.length) {
      const Point2 next = out.truth.relative(k, k + 1, spec.width, spec.height).apply(center);
      step = {next.x - center.x, next.y - center.y};
    }
    const Point2 foe{center.x + 10.0 * step.x + spec.noise.foe_px * gauss(rng),
                     center.y + 10.0 * step.y + spec.noise.foe_px * gauss(rng)};
    f.flow_mean_magnitude = spec.motion.forward_speed + std::hypot(step.x, step.y);
    if (spec.foe_from_flow) {
      for (int gy = 1; gy <= 3; ++gy) {
        for (int gx = 1; gx <= 4; ++gx) {
          const Point2 p{w * gx / 5.0, h * gy / 4.0};
          const double scale = spec.motion.forward_speed / (reach / 2.0);
          f.flow.push_back({p, {(p.x - foe.x) * scale, (p.y - foe.y) * scale}});
        }
      }
    } else {
      f.foe = foe;
    }

    const double intensity = out.truth.intensity[k];
    f.histogram = appearance_histogram(spec, out.truth.poses[k], intensity, rng);

    roi_offset.x = std::clamp(0.95 * roi_offset.x + 2.0 * gauss(rng), -0.1 * w, 0.1 * w);
    roi_offset.y = std::clamp(0.95 * roi_offset.y + 2.0 * gauss(rng), -0.1 * h, 0.1 * h);
    if (intensity > 0.0) {
      const double side = std::sqrt(0.05 * w * h);
      const double conf = std::max(0.0, 50.0 + 50.0 * intensity + spec.noise.confidence * gauss(rng));
      f.detections.push_back({{center.x + roi_offset.x - side / 2.0,
                               center.y + roi_offset.y - side / 2.0, side, side},
                              conf,
                              spec.detection_class});
    } else if (unit(rng) < 0.05) {
      // Weak false positive, below the default floor.
      const double side = std::sqrt(0.02 * w * h);
      f.detections.push_back({{unit(rng) * (w - side), unit(rng) * (h - side), side, side},
                              30.0,
                              spec.detection_class});
    }
  }
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Square overlay of the texture; the smooth sin/cos part is added by the
// caller.
double squares(double x, double y) {
  const double cell = 32.0;
  const auto cx = static_cast<std::int64_t>(std::floor(x / cell));
  const auto cy = static_cast<std::int64_t>(std::floor(y / cell));
  const std::uint64_t hsh = mix(static_cast<std::uint64_t>(cx) * 73856093ULL ^
                                static_cast<std::uint64_t>(cy) * 19349663ULL);
  if (hsh % 3 != 0) return 0.0;
  const double fx = x - static_cast<double>(cx) * cell;
  const double fy = y - static_cast<double>(cy) * cell;
  if (fx > 6.0 && fx < 26.0 && fy > 6.0 && fy < 26.0) return (hsh & 8) ? 70.0 : -70.0;
  return 0.0;
}

constexpr std::size_t kNoiseTable = 1 << 16;

// Standard normal samples shared by all frames of a scenario; each pixel
// draws from it through a per-frame hash.
std::vector<float> noise_table(std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed ^ 0x6e6f697365ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> t(kNoiseTable);
  for (auto& v : t) v = static_cast<float>(gauss(rng));
  return t;
}

}  // namespace

GrayImage render_frame(const Scenario& scenario, std::size_t k) {
  const auto& spec = scenario.spec;
  const Eigen::Matrix3d inv =
      scenario.truth.camera(k, spec.width, spec.height).inverse().matrix();
  const bool affine = inv(2, 0) == 0.0 && inv(2, 1) == 0.0;
  const auto table = noise_table(spec.seed);
  const std::uint64_t frame_key = mix(spec.seed ^ mix(k));
  GrayImage img(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    const Eigen::Vector3d row = inv * Eigen::Vector3d(0.5, y + 0.5, 1.0);
    const double step_x = inv(0, 0) / inv(2, 2), step_y = inv(1, 0) / inv(2, 2);
    double wx = row.x() / row.z(), wy = row.y() / row.z();
    // sin(wx / 70) and cos(wy / 55) advanced by angle-addition along the row.
    std::complex<double> ex = std::polar(1.0, wx / 70.0), ey = std::polar(1.0, wy / 55.0);
    const std::complex<double> dx = std::polar(1.0, step_x / 70.0);
    const std::complex<double> dy = std::polar(1.0, step_y / 55.0);
    std::uint64_t h = mix(frame_key ^ static_cast<std::uint64_t>(y));
    for (int x = 0; x < spec.width; ++x) {
      if (!affine) {
        const Eigen::Vector3d p = inv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
        wx = p.x() / p.z();
        wy = p.y() / p.z();
        ex = std::polar(1.0, wx / 70.0);
        ey = std::polar(1.0, wy / 55.0);
      }
      h = h * 6364136223846793005ULL + 1442695040888963407ULL;
      const double noise = table[(h >> 40) & (kNoiseTable - 1)];
      const double v = 100.0 + 35.0 * ex.imag() + 35.0 * ey.real() + squares(wx, wy) +
                       spec.noise.raster_gray * noise;
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      if (affine) {
        wx += step_x;
        wy += step_y;
        ex *= dx;
        ey *= dy;
      }
    }
  }
  return img;
}

ScenarioSpec scenario_preset(const std::string& name, std::size_t length,
                             std::uint64_t seed) {
  ScenarioSpec spec;
  spec.length = length;
  spec.seed = seed;
  spec.motion = {1.0, 2.0, 0.002, 3.0};
  spec.noise = {0.3, 5.0, 2.0, 3.0};
  std::mt19937_64 rng(mix(seed));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double len = static_cast<double>(length);

  auto place = [&](double density) {
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(len * density / 900.0)));
    const double block = len * density / static_cast<double>(count);
    const double gap = len * (1.0 - density) / static_cast<double>(count + 1);
    for (std::size_t i = 0; i < count; ++i) {
      const double start = gap * static_cast<double>(i + 1) + block * static_cast<double>(i) +
                           0.1 * gap * jitter(rng);
      const auto s = static_cast<std::size_t>(std::max(0.0, start));
      const auto e = std::min(length, static_cast<std::size_t>(start + block));
      if (e > s) spec.semantic_blocks.push_back({s, e, 1.0});
    }
  };

  if (name == "0p") {
  } else if (name == "25p") {
    place(0.25);
  } else if (name == "50p") {
    place(0.50);
  } else if (name == "75p") {
    place(0.75);
  } else if (name == "two-level") {
    spec.semantic_blocks.push_back({length / 5, 2 * length / 5, 1.0});
    spec.semantic_blocks.push_back({3 * length / 5, 4 * length / 5, 2.0});
  } else if (name == "static") {
    spec.motion = {0.0, 0.0, 0.0, 3.0};
    spec.noise = {0.0, 0.0, 0.0, 0.0};
  } else {
    fail(ErrorKind::Config, "unknown scenario preset '" + name + "'");
  }
  return spec;
}

}  // namespace miff
