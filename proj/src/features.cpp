#include "miff/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "miff/error.hpp"

namespace miff {

double gaussian_centrality(Point2 point, double width, double height) {
  if (!std::isfinite(point.x) || !std::isfinite(point.y) ||
      !std::isfinite(width) || !std::isfinite(height)) {
    fail(ErrorKind::InvalidArgument, "gaussian_centrality: non-finite input");
  }
  if (width <= 0.0 || height <= 0.0) {
    fail(ErrorKind::InvalidArgument,
         "gaussian_centrality: frame dimensions must be positive");
  }
  const double sigma = std::min(width / 2.0, height / 2.0);
  const double dx = point.x - width / 2.0;
  const double dy = point.y - height / 2.0;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

std::optional<BBox> clamp_to_frame(const BBox& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(height));
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

double semantic_score(const FrameFeatures& frame,
                      const std::map<std::string, double>& confidence_floor,
                      const std::map<std::string, double>& confidence_norm) {
  if (frame.score) return *frame.score;
  if (frame.width <= 0 || frame.height <= 0) {
    fail(ErrorKind::InvalidArgument, "semantic_score: frame " +
                                         std::to_string(frame.frame_index) +
                                         " has non-positive dimensions");
  }
  const double frame_area =
      static_cast<double>(frame.width) * static_cast<double>(frame.height);
  double total = 0.0;
  for (const auto& det : frame.detections) {
    const auto floor_it = confidence_floor.find(det.class_label);
    if (floor_it == confidence_floor.end()) {
      fail(ErrorKind::Config,
           "no confidence floor configured for class '" + det.class_label + "'");
    }
    if (det.confidence < floor_it->second) continue;
    const auto norm_it = confidence_norm.find(det.class_label);
    if (norm_it == confidence_norm.end() || !(norm_it->second > 0.0)) {
      fail(ErrorKind::Config,
           "no positive confidence normalizer for class '" + det.class_label + "'");
    }
    const auto box = clamp_to_frame(det.bbox, frame.width, frame.height);
    if (!box) continue;
    const double c = std::clamp(det.confidence / norm_it->second, 0.0, 1.0);
    const double a = box->area() / frame_area;
    total += c * a * gaussian_centrality(box->center(), frame.width, frame.height);
  }
  return total;
}

ScoringConfig resolve_norms(const FeatureStream& stream, ScoringConfig config) {
  std::map<std::string, double> observed;
  for (const auto& frame : stream.frames) {
    for (const auto& det : frame.detections) {
      auto& best = observed[det.class_label];
      best = std::max(best, det.confidence);
    }
  }
  for (const auto& [label, floor] : config.confidence_floor) {
    if (config.confidence_norm.count(label)) continue;
    const auto it = observed.find(label);
    config.confidence_norm[label] =
        (it != observed.end() && it->second > 0.0) ? it->second : 1.0;
  }
  return config;
}

std::vector<double> score_stream(const FeatureStream& stream,
                                 const ScoringConfig& config) {
  std::vector<double> scores;
  scores.reserve(stream.size());
  for (const auto& frame : stream.frames) {
    scores.push_back(
        semantic_score(frame, config.confidence_floor, config.confidence_norm));
  }
  return scores;
}

namespace {

[[noreturn]] void frame_error(const FrameFeatures& frame, const std::string& what) {
  fail(ErrorKind::Format,
       "frame " + std::to_string(frame.frame_index) + ": " + what);
}

}  // namespace

void validate_frame(const FrameFeatures& frame) {
  if (frame.width <= 0 || frame.height <= 0) {
    frame_error(frame, "width and height must be positive");
  }
  for (const auto& det : frame.detections) {
    if (!(det.bbox.w > 0.0) || !(det.bbox.h > 0.0)) {
      frame_error(frame, "detection box must have positive size");
    }
    if (!std::isfinite(det.confidence) || !std::isfinite(det.bbox.x) ||
        !std::isfinite(det.bbox.y)) {
      frame_error(frame, "detection values must be finite");
    }
  }
  std::set<std::int64_t> tracks;
  for (const auto& kp : frame.keypoints) {
    if (!tracks.insert(kp.track_id).second) {
      frame_error(frame, "duplicate keypoint track_id " + std::to_string(kp.track_id));
    }
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
      frame_error(frame, "keypoint coordinates must be finite");
    }
  }
  if (frame.foe && (!std::isfinite(frame.foe->x) || !std::isfinite(frame.foe->y))) {
    frame_error(frame, "foe must be finite");
  }
  if (!std::isfinite(frame.flow_mean_magnitude) || frame.flow_mean_magnitude < 0.0) {
    frame_error(frame, "flow_mean_magnitude must be finite and non-negative");
  }
  if (frame.histogram.empty()) frame_error(frame, "histogram is empty");
  double sum = 0.0;
  for (double h : frame.histogram) {
    if (!(h >= 0.0) || !std::isfinite(h)) {
      frame_error(frame, "histogram entries must be finite and non-negative");
    }
    sum += h;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    frame_error(frame, "histogram is not normalized (sums to " +
                           std::to_string(sum) + ")");
  }
  if (frame.score && !std::isfinite(*frame.score)) {
    frame_error(frame, "external score must be finite");
  }
}

void validate_stream(const FeatureStream& stream) {
  if (!(stream.fps > 0.0) || !std::isfinite(stream.fps)) {
    fail(ErrorKind::Format, "fps must be positive");
  }
  if (stream.frames.size() < 2) {
    fail(ErrorKind::Format, "a feature stream needs at least 2 frames");
  }
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    if (stream.frames[i].frame_index != i) {
      fail(ErrorKind::Format, "frame_index " +
                                  std::to_string(stream.frames[i].frame_index) +
                                  " at position " + std::to_string(i) +
                                  " breaks the gapless sequence");
    }
    validate_frame(stream.frames[i]);
  }
}

}  // namespace miff
