#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "miff/features.hpp"
#include "miff/geometry.hpp"
#include "miff/homography.hpp"
#include "miff/image.hpp"

namespace miff {

struct StabilizerConfig {
  int segment_size = 4;         // alpha
  double drop_fraction = 0.5;   // dp, side fraction of the centered drop area
  double crop_fraction = 0.9;   // cp, side fraction of the centered crop area
  double eta = 0.5;
  double sigma = 10.0;          // width of the coverage Gaussian in the replacement score
  RansacConfig ransac{200, 2.0, 0};

  void validate() const;
};

enum class FrameAction { Kept, Stitched, Replaced };

const char* to_string(FrameAction action);

struct PlannedFrame {
  std::size_t slot = 0;      // position in the selection
  std::size_t selected = 0;  // frame chosen by the sampler
  std::size_t source = 0;    // frame actually shown (differs when replaced)
  Homography transform;
  double coverage = 0.0;  // fraction of the crop area covered
  FrameAction action = FrameAction::Kept;
  std::vector<std::size_t> stitched;
  std::vector<Homography> stitch_transforms;
  std::optional<std::size_t> master_pre;
  std::optional<std::size_t> master_pos;
  double delta = 0.0;  // slots from the previous master
  double span = 0.0;   // slots between the two masters
  double weight = 0.0;  // w
  bool unstabilized = false;
  bool linear_fallback = false;
};

struct StabilizationPlan {
  std::vector<PlannedFrame> frames;
  std::vector<std::size_t> masters;  // frame index per alpha-segment (unstabilizable ones omitted)
  std::vector<std::size_t> dropped_slots;  // selection slots with no usable frame
  std::size_t segments = 0;
  std::size_t unstabilizable_segments = 0;
  Rect crop;
  Rect drop;
  int width = 0;
  int height = 0;

  bool fully_unstabilizable() const {
    return segments > 0 && unstabilizable_segments == segments;
  }
};

// Point pairs (position in a, position in b) of tracks seen in both frames.
// nullopt when fewer than four tracks are shared.
std::optional<std::vector<PointPair>> correspondences(const FeatureStream& stream,
                                                      std::size_t a, std::size_t b);

// Memoized frame-to-frame RANSAC fits; the seed of each pair is derived from
// the configured seed and the pair so results do not depend on query order.
class PairMatcher {
 public:
  PairMatcher(const FeatureStream& stream, RansacConfig config);

  // Homography taking frame a onto frame b, with inliers.
  const std::optional<RansacResult>& match(std::size_t a, std::size_t b);
  std::size_t inliers(std::size_t a, std::size_t b);

 private:
  const FeatureStream* stream_;
  RansacConfig config_;
  std::map<std::pair<std::size_t, std::size_t>, std::optional<RansacResult>> cache_;
};

// Frame of `segment` with the most summed RANSAC inliers towards the other
// frames; ties go to the frame nearest the segment center, then the lower
// index. nullopt when no pair in the segment can be matched.
std::optional<std::size_t> select_master(PairMatcher& matcher,
                                         std::span<const std::size_t> segment);

struct ReplacementCandidate {
  std::size_t frame = 0;
  double coverage = 0.0;           // p
  std::size_t inliers_prev = 0;    // R(f_d, f_{i-1})
  std::size_t inliers_next = 0;    // R(f_d, f_{i+1})
  double score = 0.0;              // S(f_d)
};

// G(p) (R_prev + R_next) (eta + S), G a Gaussian with mean 1 and width sigma.
double replacement_objective(const ReplacementCandidate& c, double eta, double sigma);

// Argmax of replacement_objective, ties to the lower frame index. nullopt
// for an empty candidate set.
std::optional<std::size_t> select_replacement_frame(
    std::span<const ReplacementCandidate> candidates, double eta, double sigma);

// Master-interpolated stabilization of a frame selection; frames not selected
// form the pool used for stitching and replacement.
StabilizationPlan stabilize(std::span<const std::size_t> selection,
                            const FeatureStream& stream, std::span<const double> scores,
                            const StabilizerConfig& config);

using RasterSource = std::function<GrayImage(std::size_t)>;

// One output frame: stitched frames are drawn first and the main frame last,
// then the canvas is cropped to the crop area.
GrayImage render_planned_frame(const StabilizationPlan& plan, const PlannedFrame& frame,
                               const RasterSource& rasters);
// The selected frame cropped to the crop area, without warping.
GrayImage render_unstabilized_frame(const StabilizationPlan& plan, const PlannedFrame& frame,
                                    const RasterSource& rasters);

// Warps each planned frame (stitched frames fill what the main frame leaves
// uncovered) and crops to the crop area.
std::vector<GrayImage> render_stabilized(const StabilizationPlan& plan,
                                         const RasterSource& rasters);

// The selected frames cropped to the same area, without any warping.
std::vector<GrayImage> render_unstabilized(const StabilizationPlan& plan,
                                           const RasterSource& rasters);

}  // namespace miff
