#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "miff/features.hpp"
#include "miff/geometry.hpp"
#include "miff/image.hpp"

namespace miff {

struct SemanticBlock {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  double intensity = 1.0;
};

// Camera pose of one frame: the frame sees the world plane rotated by
// `rotation` about the image center and shifted by (tx, ty).
struct CameraPose {
  double tx = 0.0;
  double ty = 0.0;
  double rotation = 0.0;  // radians
};

struct MotionModel {
  double pan_speed = 0.0;       // world px per frame along x
  double shake_px = 0.0;        // stationary std of the translational jitter
  double shake_rotation = 0.0;  // stationary std of the rotational jitter
  double forward_speed = 3.0;   // radial flow magnitude, px per frame
};

struct NoiseLevels {
  double keypoint_px = 0.0;
  double confidence = 0.0;
  double foe_px = 0.0;
  double raster_gray = 0.0;
};

struct ScenarioSpec {
  std::size_t length = 3000;
  double fps = 30.0;
  int width = 640;
  int height = 480;
  std::vector<SemanticBlock> semantic_blocks;
  MotionModel motion;
  // Explicit per-frame poses; when non-empty it replaces `motion` for the
  // camera path and must have `length` entries.
  std::vector<CameraPose> motion_script;
  NoiseLevels noise;
  std::uint64_t seed = 0;
  int histogram_bins = 16;
  int keypoints_per_frame = 60;
  // Emit sparse radial flow vectors instead of an explicit FOE.
  bool foe_from_flow = false;
  std::string detection_class = "face";

  void validate() const;
};

struct GroundTruth {
  std::vector<CameraPose> poses;
  std::vector<double> intensity;  // 0 outside semantic blocks

  // World-plane to image transform of frame k.
  Homography camera(std::size_t k, int width, int height) const;
  // Maps frame a's pixels onto frame b's pixels.
  Homography relative(std::size_t a, std::size_t b, int width, int height) const;
};

struct Scenario {
  ScenarioSpec spec;
  FeatureStream stream;
  GroundTruth truth;
};

// Deterministic per seed. Throws Error(Config) on overlapping or
// out-of-range semantic blocks.
Scenario synthesize_scenario(const ScenarioSpec& spec);

// Grayscale rendering of frame k: a world-fixed gradient with textured
// squares seen through the frame's camera, plus Gaussian noise.
GrayImage render_frame(const Scenario& scenario, std::size_t k);

// Bundled scenarios: "0p", "25p", "50p", "75p" (semantic density),
// "two-level" (blocks at intensities 1 and 2) and "static" (no camera motion).
ScenarioSpec scenario_preset(const std::string& name, std::size_t length,
                             std::uint64_t seed);

}  // namespace miff
