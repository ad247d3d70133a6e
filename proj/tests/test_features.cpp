#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "miff/error.hpp"
#include "miff/features.hpp"

using namespace miff;

namespace {

// Independent evaluation: unnormalized Gaussian with sigma = min(W,H)/2.
double gauss_oracle(double x, double y, double w, double h) {
  const double s = std::min(w, h) / 2.0;
  const double d2 = (x - w / 2) * (x - w / 2) + (y - h / 2) * (y - h / 2);
  return std::exp(-d2 / (2 * s * s));
}

FrameFeatures blank_frame(int w = 100, int h = 100) {
  FrameFeatures f;
  f.width = w;
  f.height = h;
  f.histogram = {1.0};
  return f;
}

Detection centered(double cx, double cy, double area, double conf,
                   const std::string& label = "face") {
  const double side = std::sqrt(area);
  return {{cx - side / 2, cy - side / 2, side, side}, conf, label};
}

const std::map<std::string, double> kFloor{{"face", 0.0}};
const std::map<std::string, double> kNorm{{"face", 1.0}};

}  // namespace

TEST_CASE("gaussian centrality") {
  CHECK(gaussian_centrality({50, 50}, 100, 100) == 1.0);
  CHECK(gaussian_centrality({320, 240}, 640, 480) == 1.0);
  CHECK(gaussian_centrality({100, 50}, 100, 100) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(gaussian_centrality({0, 0}, 100, 100) == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(gaussian_centrality({100, 50}, 100, 100) == doctest::Approx(gauss_oracle(100, 50, 100, 100)));
  CHECK_THROWS_AS(gaussian_centrality({NAN, 0}, 100, 100), Error);
  CHECK_THROWS_AS(gaussian_centrality({0, 0}, 0, 100), Error);
}

TEST_CASE("gaussian centrality is radially symmetric") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0, 2 * M_PI), radius(0, 300);
  for (int i = 0; i < 200; ++i) {
    const double r = radius(rng), a = angle(rng), b = angle(rng);
    const double wa = gaussian_centrality({320 + r * std::cos(a), 240 + r * std::sin(a)}, 640, 480);
    const double wb = gaussian_centrality({320 + r * std::cos(b), 240 + r * std::sin(b)}, 640, 480);
    CHECK(std::abs(wa - wb) < 1e-12);
  }
}

TEST_CASE("semantic score examples") {
  auto f = blank_frame();
  CHECK(semantic_score(f, kFloor, kNorm) == 0.0);

  f.detections = {{{0, 0, 100, 100}, 1.0, "face"}};
  CHECK(semantic_score(f, kFloor, kNorm) == doctest::Approx(1.0));

  f.detections = {centered(50, 50, 1000, 0.5), centered(100, 50, 2000, 1.0)};
  // Second box is clamped to the frame: its visible half has area 0.1 and
  // center (100 - w/4, 50).
  const double side = std::sqrt(2000.0);
  const double vis_area = (side / 2) * side / 1e4;
  const double expected = 0.5 * 0.1 + 1.0 * vis_area * gauss_oracle(100 - side / 4, 50, 100, 100);
  CHECK(semantic_score(f, kFloor, kNorm) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("semantic score of the two-detection reference frame") {
  // A box centered on the right edge with area 0.2 cannot lie inside the
  // frame, so the reference value is rebuilt from its per-detection terms.
  auto g = blank_frame();
  g.detections = {centered(50, 50, 1000, 0.5)};
  const double first = semantic_score(g, kFloor, kNorm);
  CHECK(first == doctest::Approx(0.05));
  CHECK(first + 1.0 * 0.2 * gaussian_centrality({100, 50}, 100, 100) ==
        doctest::Approx(0.17131).epsilon(1e-4));

  // A box fully inside the frame: [90,100]x[45,55] contributes its own term.
  g.detections.push_back({{90, 45, 10, 10}, 1.0, "face"});
  const double expected = 0.05 + 0.01 * gauss_oracle(95, 50, 100, 100);
  CHECK(semantic_score(g, kFloor, kNorm) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("semantic score floors, clamps and errors") {
  auto f = blank_frame();
  f.detections = {centered(50, 50, 100, 50.0)};
  const std::map<std::string, double> floor{{"face", 60.0}};
  const std::map<std::string, double> norm{{"face", 100.0}};
  CHECK(semantic_score(f, floor, norm) == 0.0);
  f.detections[0].confidence = 250.0;  // above norm: clamped to 1
  CHECK(semantic_score(f, floor, norm) == doctest::Approx(0.01));

  f.detections[0].class_label = "dog";
  CHECK_THROWS_AS(semantic_score(f, floor, norm), Error);
  try {
    semantic_score(f, floor, norm);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }

  f.detections.clear();
  f.score = 0.42;
  CHECK(semantic_score(f, floor, norm) == 0.42);
}

TEST_CASE("semantic score is additive, order invariant and linear in confidence") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 100), area(10, 900), conf(0.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = blank_frame();
    for (int k = 0; k < 5; ++k) f.detections.push_back(centered(pos(rng), pos(rng), area(rng), conf(rng)));
    const double total = semantic_score(f, kFloor, kNorm);

    double parts = 0.0;
    for (const auto& d : f.detections) {
      auto single = blank_frame();
      single.detections = {d};
      parts += semantic_score(single, kFloor, kNorm);
    }
    CHECK(total == doctest::Approx(parts).epsilon(1e-12));

    auto shuffled = f;
    std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), rng);
    CHECK(semantic_score(shuffled, kFloor, kNorm) == doctest::Approx(total).epsilon(1e-12));

    auto scaled = f;
    for (auto& d : scaled.detections) d.confidence *= 1.7;  // stays below the clamp
    CHECK(semantic_score(scaled, kFloor, kNorm) == doctest::Approx(1.7 * total).epsilon(1e-12));
  }
}

TEST_CASE("clamp_to_frame") {
  CHECK(clamp_to_frame({-10, -10, 20, 20}, 100, 100) == BBox{0, 0, 10, 10});
  CHECK_FALSE(clamp_to_frame({200, 0, 10, 10}, 100, 100).has_value());
}

TEST_CASE("resolve_norms uses the observed maximum") {
  FeatureStream s;
  for (double c : {70.0, 180.0, 95.0}) {
    auto f = blank_frame();
    f.detections = {centered(50, 50, 100, c)};
    s.frames.push_back(f);
  }
  const auto cfg = resolve_norms(s, ScoringConfig{});
  CHECK(cfg.confidence_norm.at("face") == 180.0);
  CHECK(cfg.confidence_norm.at("pedestrian") == 1.0);

  ScoringConfig explicit_norm;
  explicit_norm.confidence_norm["face"] = 50.0;
  CHECK(resolve_norms(s, explicit_norm).confidence_norm.at("face") == 50.0);
}

TEST_CASE("validate_frame and validate_stream") {
  auto f = blank_frame();
  CHECK_NOTHROW(validate_frame(f));
  auto bad = f;
  bad.histogram = {0.5, 0.4};
  CHECK_THROWS_AS(validate_frame(bad), Error);
  bad = f;
  bad.keypoints = {{1, 0, 0}, {1, 1, 1}};
  CHECK_THROWS_AS(validate_frame(bad), Error);
  bad = f;
  bad.foe = Point2{std::numeric_limits<double>::infinity(), 0};
  CHECK_THROWS_AS(validate_frame(bad), Error);
  bad = f;
  bad.width = 0;
  CHECK_THROWS_AS(validate_frame(bad), Error);

  FeatureStream s;
  s.frames = {f};
  CHECK_THROWS_AS(validate_stream(s), Error);
  auto g = f;
  g.frame_index = 2;
  s.frames.push_back(g);
  CHECK_THROWS_AS(validate_stream(s), Error);
  s.frames[1].frame_index = 1;
  CHECK_NOTHROW(validate_stream(s));
}
