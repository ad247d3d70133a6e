#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "miff/speedup.hpp"

namespace miff {

// Unit-sum Gaussian kernel truncated at +/- ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Gaussian smoothing with sigma = (required / 2) * fps samples and
// half-sample reflective boundaries.
std::vector<double> smooth_profile(std::span<const double> raw, double fps,
                                   double required);

// Otsu split of a histogram: returns k in [1, B-1] such that bins [0, k) form
// the lower class, maximizing the between-class variance. The lowest k wins
// ties. nullopt when every split leaves an empty class.
std::optional<std::size_t> otsu_split(std::span<const double> histogram);

struct OtsuResult {
  // Frames with score > threshold are semantic; placed mid-way across any
  // empty bins that follow the split edge.
  double threshold = 0.0;
  std::size_t split = 0;   // bin edge index
  std::vector<double> histogram;
};

// Histogram over [min, max] with `bins` bins, then otsu_split. nullopt
// signals a degenerate profile (all scores identical).
std::optional<OtsuResult> otsu_threshold(std::span<const double> scores,
                                         std::size_t bins = 256);

enum class SegmentKind { NonSemantic, Semantic };

const char* to_string(SegmentKind kind);

struct Segment {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  SegmentKind kind = SegmentKind::NonSemantic;
  int level = 0;
  std::optional<double> speedup;

  std::size_t length() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Above-threshold runs, merged across gaps of at most 5 s, then demoted when
// shorter than one output second (required * fps frames). The result tiles
// [0, profile.size()).
std::vector<Segment> extract_segments(std::span<const double> profile,
                                      double threshold, double fps,
                                      double required);

struct RefineConfig {
  double stop_ratio = 0.9;  // t
  std::size_t bins = 256;
  int max_levels = 8;
  std::optional<int> max_speedup;  // top-level F_max
};

struct RefineIteration {
  double threshold = 0.0;
  double required = 1.0;
  std::size_t semantic_frames = 0;
  std::size_t nonsemantic_frames = 0;
  SpeedupSolution solution;
  std::vector<Segment> segments;  // original frame coordinates
};

struct SegmentTree {
  double stop_ratio = 0.9;
  std::vector<RefineIteration> iterations;
  // Maximal runs of frames sharing a final (level, speed-up) assignment.
  std::vector<Segment> leaves;
  std::string stop_reason;
  std::optional<double> rejected_threshold;
  bool degenerate = false;  // no semantic split at all

  std::vector<double> thresholds() const;
  int depth() const;
};

using SpeedupSolver = std::function<SpeedupSolution(const SpeedupProblem&)>;

// Iterative multi-importance segmentation. The first pass splits the whole
// profile and fixes the non-semantic rate; each further pass keeps only the
// current semantic frames, rebuilds and re-thresholds their profile, and
// re-solves with the previous semantic rate as the required one.
SegmentTree refine_multi_importance(std::span<const double> raw_scores, double fps,
                                    double required, const RefineConfig& config,
                                    const SpeedupSolver& solver);

}  // namespace miff
