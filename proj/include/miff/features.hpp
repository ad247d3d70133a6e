#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace miff {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  Point2 center() const { return {x + w / 2.0, y + h / 2.0}; }
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox bbox;
  double confidence = 0.0;  // raw classifier score
  std::string class_label;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Keypoint {
  std::int64_t track_id = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// A sparse optical-flow sample: the displacement observed at `position`
// between this frame and the next one.
struct FlowVector {
  Point2 position;
  Point2 displacement;

  friend bool operator==(const FlowVector&, const FlowVector&) = default;
};

struct FrameFeatures {
  std::size_t frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<Detection> detections;
  std::vector<Keypoint> keypoints;
  std::optional<Point2> foe;
  std::vector<FlowVector> flow;
  // Mean flow magnitude from this frame to the next one, pixels/frame.
  double flow_mean_magnitude = 0.0;
  std::vector<double> histogram;
  std::optional<std::string> raster;
  // Externally supplied semantic score (e.g. a CNN output); overrides the
  // detection-based score when present.
  std::optional<double> score;

  Point2 center() const { return {width / 2.0, height / 2.0}; }

  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;
};

struct FeatureStream {
  double fps = 30.0;
  std::vector<FrameFeatures> frames;

  std::size_t size() const { return frames.size(); }

  friend bool operator==(const FeatureStream&, const FeatureStream&) = default;
};

// Per-class confidence floors and normalizers used by semantic_score.
struct ScoringConfig {
  std::map<std::string, double> confidence_floor{{"face", 60.0},
                                                 {"pedestrian", 100.0}};
  // Classes without an entry here are normalized by the maximum raw
  // confidence observed in the stream (see resolve_norms).
  std::map<std::string, double> confidence_norm;
};

// exp(-d^2 / (2 sigma^2)) with sigma = min(W/2, H/2) and d the distance of
// `point` to the frame center. Peak value is exactly 1.
double gaussian_centrality(Point2 point, double width, double height);

// Clamps a detection box to the frame; returns nullopt if nothing remains.
std::optional<BBox> clamp_to_frame(const BBox& box, int width, int height);

double semantic_score(const FrameFeatures& frame,
                      const std::map<std::string, double>& confidence_floor,
                      const std::map<std::string, double>& confidence_norm);

// Fills confidence_norm for every floored class that lacks one with the
// maximum raw confidence seen for that class (1.0 if never seen).
ScoringConfig resolve_norms(const FeatureStream& stream, ScoringConfig config);

std::vector<double> score_stream(const FeatureStream& stream,
                                 const ScoringConfig& config);

// Throws Error(Format) describing the first violated invariant.
void validate_frame(const FrameFeatures& frame);
void validate_stream(const FeatureStream& stream);

}  // namespace miff
