#pragma once

#include <optional>
#include <span>
#include <vector>

#include "miff/features.hpp"
#include "miff/profile.hpp"

namespace miff {

struct GraphWeights {
  double instability = 1.0;  // lambda_I
  double velocity = 1.0;     // lambda_V
  double appearance = 1.0;   // lambda_A
  double semantic = 1.0;     // lambda_S
  double epsilon = 1.0;
  int max_skip = 100;  // tau_max
  int border = 30;     // tau_b
  // Limits the effective border of each segment graph to ceil(F) frames so a
  // path cannot skip more than one output frame at either segment end.
  bool cap_border = false;

  void validate() const;
};

struct FoeEstimate {
  Point2 point;
  double residual = 0.0;  // RMS point-to-line distance
};

// Least-squares intersection of the lines through each flow sample along its
// displacement. nullopt when the lines are (nearly) parallel.
std::optional<FoeEstimate> estimate_foe(std::span<const FlowVector> flow);

// FOE given in the stream, else estimated from flow, else (pure translation)
// the frame center offset by the mean displacement. Throws
// Error(FeatureMissing) when the frame has neither.
Point2 resolve_foe(const FrameFeatures& frame);

// Mean normalized FOE distance to the image center over frames [i, j).
double instability_cost(const FeatureStream& stream, std::size_t i, std::size_t j);

// |m F - sum_{k in [i,j)} flow_k| / (m F) with m the video mean magnitude.
double velocity_cost(const FeatureStream& stream, std::size_t i, std::size_t j,
                     double video_mean_magnitude, double speedup);

// 1-D Earth Mover's Distance divided by (bins - 1).
double appearance_cost(std::span<const double> hist_i, std::span<const double> hist_j);

double semantic_cost(double score_i, double score_j, double epsilon);

struct TransitionCosts {
  double instability = 0.0;
  double velocity = 0.0;
  double appearance = 0.0;
  double semantic = 0.0;
};

double edge_weight(const TransitionCosts& costs, const GraphWeights& weights,
                   std::size_t i, std::size_t j, double speedup);

// Per-frame quantities shared by every segment graph of one video, with
// prefix sums so each edge cost is O(bins).
class CostContext {
 public:
  CostContext(const FeatureStream& stream, std::span<const double> scores);

  TransitionCosts costs(std::size_t i, std::size_t j, double speedup,
                        double epsilon) const;
  double video_mean_magnitude() const { return mean_magnitude_; }
  std::size_t size() const { return scores_.size(); }

 private:
  std::vector<double> scores_;
  std::vector<double> instability_prefix_;
  std::vector<double> flow_prefix_;
  std::vector<std::vector<double>> cdfs_;
  double mean_magnitude_ = 0.0;
};

// Cost terms for every skip edge of one segment; independent of the lambdas.
struct SegmentCosts {
  std::size_t first_frame = 0;
  std::size_t frames = 0;
  int max_skip = 1;
  double speedup = 1.0;
  std::vector<TransitionCosts> edges;  // frames * max_skip, row = local tail

  const TransitionCosts& at(std::size_t local, int skip) const {
    return edges[local * static_cast<std::size_t>(max_skip) + static_cast<std::size_t>(skip - 1)];
  }
};

SegmentCosts compute_segment_costs(const CostContext& context, const Segment& segment,
                                   int max_skip, double epsilon);

// DAG over a segment's frames: edge (i, i+k) for k in [1, max_skip], plus a
// source linked to the first `border` frames and the last `border` frames
// linked to a sink, all at zero weight.
class TransitionGraph {
 public:
  TransitionGraph(std::size_t first_frame, std::size_t frames, int max_skip,
                  int border, double speedup);

  std::size_t first_frame() const { return first_frame_; }
  std::size_t frames() const { return frames_; }
  int max_skip() const { return max_skip_; }
  int border() const { return border_; }
  double speedup() const { return speedup_; }

  bool has_edge(std::size_t local, int skip) const {
    return skip >= 1 && skip <= max_skip_ && local + static_cast<std::size_t>(skip) < frames_;
  }
  double weight(std::size_t local, int skip) const {
    return weights_[local * static_cast<std::size_t>(max_skip_) + static_cast<std::size_t>(skip - 1)];
  }
  void set_weight(std::size_t local, int skip, double w);

  std::size_t edge_count() const;
  bool linked_to_source(std::size_t local) const {
    return local < static_cast<std::size_t>(border_);
  }
  bool linked_to_sink(std::size_t local) const {
    return local + static_cast<std::size_t>(border_) >= frames_;
  }

 private:
  std::size_t first_frame_;
  std::size_t frames_;
  int max_skip_;
  int border_;
  double speedup_;
  std::vector<double> weights_;
};

TransitionGraph weigh(const SegmentCosts& costs, const GraphWeights& weights);

TransitionGraph build_graph(const CostContext& context, const Segment& segment,
                            const GraphWeights& weights);

struct FramePath {
  std::vector<std::size_t> frames;  // global indices, source/sink excluded
  double cost = 0.0;
};

// Minimal source-to-sink path by Dijkstra over the reversed graph, then a
// forward walk choosing the smallest tied successor so the result is the
// lexicographically smallest optimal frame sequence.
FramePath shortest_path(const TransitionGraph& graph);

// Concatenates per-leaf paths in temporal order. Throws Error(Internal) if
// the result is not strictly increasing.
std::vector<std::size_t> compose_selection(std::span<const FramePath> paths);

}  // namespace miff
