#include "miff/transition_graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "miff/error.hpp"

namespace miff {

void GraphWeights::validate() const {
  if (!(instability >= 0.0) || !(velocity >= 0.0) || !(appearance >= 0.0) ||
      !(semantic >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "graph lambdas must be non-negative");
  }
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (max_skip < 1) fail(ErrorKind::InvalidArgument, "tau_max must be >= 1");
  if (border < 1 || border > max_skip) {
    fail(ErrorKind::InvalidArgument, "tau_b must lie in [1, tau_max]");
  }
}

std::optional<FoeEstimate> estimate_foe(std::span<const FlowVector> flow) {
  double a00 = 0.0, a01 = 0.0, a11 = 0.0, b0 = 0.0, b1 = 0.0;
  std::size_t used = 0;
  for (const auto& v : flow) {
    const double len = std::hypot(v.displacement.x, v.displacement.y);
    if (!(len > 0.0)) continue;
    const double nx = -v.displacement.y / len;
    const double ny = v.displacement.x / len;
    const double c = nx * v.position.x + ny * v.position.y;
    a00 += nx * nx;
    a01 += nx * ny;
    a11 += ny * ny;
    b0 += nx * c;
    b1 += ny * c;
    ++used;
  }
  if (used < 2) return std::nullopt;
  const double det = a00 * a11 - a01 * a01;
  const double trace = a00 + a11;
  if (!(det > 1e-10 * trace * trace)) return std::nullopt;
  const Point2 e{(a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det};

  double sq = 0.0;
  for (const auto& v : flow) {
    const double len = std::hypot(v.displacement.x, v.displacement.y);
    if (!(len > 0.0)) continue;
    const double r = (-v.displacement.y * (e.x - v.position.x) +
                      v.displacement.x * (e.y - v.position.y)) / len;
    sq += r * r;
  }
  return FoeEstimate{e, std::sqrt(sq / static_cast<double>(used))};
}

Point2 resolve_foe(const FrameFeatures& frame) {
  if (frame.foe) return *frame.foe;
  if (frame.flow.empty()) {
    fail(ErrorKind::FeatureMissing,
         "frame " + std::to_string(frame.frame_index) + " has neither FOE nor flow vectors");
  }
  if (auto est = estimate_foe(frame.flow)) return est->point;
  Point2 mean;
  for (const auto& v : frame.flow) {
    mean.x += v.displacement.x;
    mean.y += v.displacement.y;
  }
  const double n = static_cast<double>(frame.flow.size());
  const Point2 c = frame.center();
  return {c.x + mean.x / n, c.y + mean.y / n};
}

namespace {

double normalized_foe_distance(const FrameFeatures& frame) {
  const Point2 foe = resolve_foe(frame);
  const Point2 c = frame.center();
  const double half_diagonal = std::hypot(frame.width, frame.height) / 2.0;
  return std::hypot(foe.x - c.x, foe.y - c.y) / half_diagonal;
}

void check_range(const FeatureStream& stream, std::size_t i, std::size_t j) {
  if (!(i < j) || j >= stream.size()) {
    fail(ErrorKind::InvalidArgument, "transition (" + std::to_string(i) + ", " +
                                         std::to_string(j) + ") outside the stream");
  }
}

std::vector<double> cumulative(std::span<const double> hist) {
  std::vector<double> cdf(hist.size());
  double acc = 0.0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    acc += hist[b];
    cdf[b] = acc;
  }
  return cdf;
}

double cdf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::abs(a[k] - b[k]);
  return acc / static_cast<double>(a.size() - 1);
}

}  // namespace

double instability_cost(const FeatureStream& stream, std::size_t i, std::size_t j) {
  check_range(stream, i, j);
  double acc = 0.0;
  for (std::size_t k = i; k < j; ++k) acc += normalized_foe_distance(stream.frames[k]);
  return acc / static_cast<double>(j - i);
}

double velocity_cost(const FeatureStream& stream, std::size_t i, std::size_t j,
                     double video_mean_magnitude, double speedup) {
  check_range(stream, i, j);
  if (!(video_mean_magnitude > 0.0)) return 0.0;
  double acc = 0.0;
  for (std::size_t k = i; k < j; ++k) acc += stream.frames[k].flow_mean_magnitude;
  const double target = video_mean_magnitude * speedup;
  return std::abs(target - acc) / target;
}

double appearance_cost(std::span<const double> hist_i, std::span<const double> hist_j) {
  if (hist_i.size() != hist_j.size()) {
    fail(ErrorKind::InvalidArgument, "appearance_cost: histogram lengths differ");
  }
  return cdf_distance(cumulative(hist_i), cumulative(hist_j));
}

double semantic_cost(double score_i, double score_j, double epsilon) {
  if (score_i < 0.0 || score_j < 0.0) {
    fail(ErrorKind::InvalidArgument, "semantic_cost: scores must be non-negative");
  }
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "semantic_cost: epsilon must be positive");
  return 1.0 / (score_i + score_j + epsilon);
}

double edge_weight(const TransitionCosts& costs, const GraphWeights& weights,
                   std::size_t i, std::size_t j, double speedup) {
  const double combined = weights.instability * costs.instability +
                          weights.velocity * costs.velocity +
                          weights.appearance * costs.appearance +
                          weights.semantic * costs.semantic;
  return combined * std::ceil(static_cast<double>(j - i) / speedup);
}

CostContext::CostContext(const FeatureStream& stream, std::span<const double> scores)
    : scores_(scores.begin(), scores.end()) {
  const std::size_t n = stream.size();
  if (scores_.size() != n) {
    fail(ErrorKind::InvalidArgument, "CostContext: one score per frame required");
  }
  instability_prefix_.assign(n + 1, 0.0);
  flow_prefix_.assign(n + 1, 0.0);
  cdfs_.reserve(n);
  double mag = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& f = stream.frames[k];
    instability_prefix_[k + 1] = instability_prefix_[k] + normalized_foe_distance(f);
    flow_prefix_[k + 1] = flow_prefix_[k] + f.flow_mean_magnitude;
    cdfs_.push_back(cumulative(f.histogram));
    mag += f.flow_mean_magnitude;
  }
  mean_magnitude_ = n > 0 ? mag / static_cast<double>(n) : 0.0;
}

TransitionCosts CostContext::costs(std::size_t i, std::size_t j, double speedup,
                                   double epsilon) const {
  TransitionCosts c;
  const double span = static_cast<double>(j - i);
  c.instability = (instability_prefix_[j] - instability_prefix_[i]) / span;
  if (mean_magnitude_ > 0.0) {
    const double target = mean_magnitude_ * speedup;
    c.velocity = std::abs(target - (flow_prefix_[j] - flow_prefix_[i])) / target;
  }
  if (cdfs_[i].size() != cdfs_[j].size()) {
    fail(ErrorKind::InvalidArgument, "frames " + std::to_string(i) + " and " +
                                         std::to_string(j) + " have different histogram sizes");
  }
  c.appearance = cdf_distance(cdfs_[i], cdfs_[j]);
  c.semantic = semantic_cost(scores_[i], scores_[j], epsilon);
  return c;
}

SegmentCosts compute_segment_costs(const CostContext& context, const Segment& segment,
                                   int max_skip, double epsilon) {
  if (segment.end > context.size() || segment.start >= segment.end) {
    fail(ErrorKind::InvalidArgument, "segment outside the stream");
  }
  SegmentCosts out;
  out.first_frame = segment.start;
  out.frames = segment.length();
  out.max_skip = max_skip;
  out.speedup = segment.speedup.value_or(1.0);
  out.edges.resize(out.frames * static_cast<std::size_t>(max_skip));
  for (std::size_t i = 0; i < out.frames; ++i) {
    for (int k = 1; k <= max_skip && i + static_cast<std::size_t>(k) < out.frames; ++k) {
      const std::size_t gi = segment.start + i;
      out.edges[i * static_cast<std::size_t>(max_skip) + static_cast<std::size_t>(k - 1)] =
          context.costs(gi, gi + static_cast<std::size_t>(k), out.speedup, epsilon);
    }
  }
  return out;
}

TransitionGraph::TransitionGraph(std::size_t first_frame, std::size_t frames, int max_skip,
                                 int border, double speedup)
    : first_frame_(first_frame),
      frames_(frames),
      max_skip_(max_skip),
      border_(border),
      speedup_(speedup),
      weights_(frames * static_cast<std::size_t>(std::max(max_skip, 1)),
               std::numeric_limits<double>::infinity()) {
  if (max_skip < 1 || border < 1) {
    fail(ErrorKind::InvalidArgument, "graph needs tau_max >= 1 and tau_b >= 1");
  }
  if (!(speedup > 0.0)) fail(ErrorKind::InvalidArgument, "graph speed-up must be positive");
}

void TransitionGraph::set_weight(std::size_t local, int skip, double w) {
  if (!has_edge(local, skip)) fail(ErrorKind::InvalidArgument, "no such edge");
  if (!(w >= 0.0) || !std::isfinite(w)) {
    fail(ErrorKind::InvalidArgument, "edge weights must be finite and non-negative");
  }
  weights_[local * static_cast<std::size_t>(max_skip_) + static_cast<std::size_t>(skip - 1)] = w;
}

std::size_t TransitionGraph::edge_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < frames_; ++i) {
    count += std::min<std::size_t>(static_cast<std::size_t>(max_skip_), frames_ - 1 - i);
  }
  return count;
}

TransitionGraph weigh(const SegmentCosts& costs, const GraphWeights& weights) {
  int border = weights.border;
  if (weights.cap_border) {
    border = std::min(border, std::max(1, static_cast<int>(std::ceil(costs.speedup - 1e-9))));
  }
  TransitionGraph graph(costs.first_frame, costs.frames, costs.max_skip, border, costs.speedup);
  for (std::size_t i = 0; i < costs.frames; ++i) {
    for (int k = 1; graph.has_edge(i, k); ++k) {
      graph.set_weight(i, k, edge_weight(costs.at(i, k), weights, i, i + static_cast<std::size_t>(k),
                                         costs.speedup));
    }
  }
  return graph;
}

TransitionGraph build_graph(const CostContext& context, const Segment& segment,
                            const GraphWeights& weights) {
  weights.validate();
  return weigh(compute_segment_costs(context, segment, weights.max_skip, weights.epsilon),
               weights);
}

FramePath shortest_path(const TransitionGraph& graph) {
  const std::size_t n = graph.frames();
  FramePath path;
  if (n == 0) return path;
  if (n == 1) {
    path.frames.push_back(graph.first_frame());
    return path;
  }
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t sink = n;
  const auto skip_limit = static_cast<std::size_t>(graph.max_skip());
  std::vector<double> to_sink(n + 1, inf);
  std::vector<bool> settled(n + 1, false);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  to_sink[sink] = 0.0;
  heap.push({0.0, sink});
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (settled[v]) continue;
    settled[v] = true;
    auto relax = [&](std::size_t u, double w) {
      const double nd = w + d;
      if (nd < to_sink[u]) {
        to_sink[u] = nd;
        heap.push({nd, u});
      }
    };
    if (v == sink) {
      for (std::size_t u = 0; u < n; ++u) {
        if (graph.linked_to_sink(u)) relax(u, 0.0);
      }
    } else {
      const std::size_t lo = v > skip_limit ? v - skip_limit : 0;
      for (std::size_t u = lo; u < v; ++u) relax(u, graph.weight(u, static_cast<int>(v - u)));
    }
  }

  double best = inf;
  std::size_t start = n;
  for (std::size_t u = 0; u < n && graph.linked_to_source(u); ++u) {
    if (to_sink[u] < best) {
      best = to_sink[u];
      start = u;
    }
  }
  if (start == n) fail(ErrorKind::Internal, "sink unreachable from source");

  path.cost = best;
  std::size_t u = start;
  path.frames.push_back(graph.first_frame() + u);
  while (true) {
    // Ending here is a prefix of any continuation, hence lexicographically smaller.
    if (graph.linked_to_sink(u) && to_sink[u] == 0.0 + to_sink[sink]) break;
    std::size_t next = n;
    for (int k = 1; graph.has_edge(u, k); ++k) {
      const std::size_t v = u + static_cast<std::size_t>(k);
      if (graph.weight(u, k) + to_sink[v] == to_sink[u]) {
        next = v;
        break;
      }
    }
    if (next == n) fail(ErrorKind::Internal, "shortest path trace-back failed");
    u = next;
    path.frames.push_back(graph.first_frame() + u);
  }
  return path;
}

std::vector<std::size_t> compose_selection(std::span<const FramePath> paths) {
  std::vector<std::size_t> out;
  for (const auto& p : paths) {
    for (auto f : p.frames) {
      if (!out.empty() && f <= out.back()) {
        fail(ErrorKind::Internal, "composed selection is not strictly increasing at frame " +
                                      std::to_string(f));
      }
      out.push_back(f);
    }
  }
  return out;
}

}  // namespace miff
