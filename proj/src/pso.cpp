#include "miff/pso.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "miff/error.hpp"

namespace miff {

void PsoConfig::validate() const {
  if (swarm < 2) fail(ErrorKind::InvalidArgument, "PSO swarm needs at least 2 particles");
  if (iterations < 0) fail(ErrorKind::InvalidArgument, "PSO iterations must be >= 0");
  if (bounds.empty()) fail(ErrorKind::InvalidArgument, "PSO needs at least one dimension");
  for (const auto& b : bounds) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.hi < b.lo) {
      fail(ErrorKind::InvalidArgument, "PSO bounds must be finite with lo <= hi");
    }
  }
  for (const auto& p : initial_positions) {
    if (p.size() != bounds.size()) {
      fail(ErrorKind::InvalidArgument, "PSO initial position has the wrong dimension");
    }
  }
}

double PsoConfig::max_width() const {
  double w = 0.0;
  for (const auto& b : bounds) w = std::max(w, b.hi - b.lo);
  return w;
}

namespace {

std::string describe(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(x[i]);
  }
  return s + ")";
}

}  // namespace

PsoResult pso_optimize(const FitnessFunction& fitness, const PsoConfig& config) {
  config.validate();
  const std::size_t dims = config.bounds.size();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto evaluate = [&](const std::vector<double>& x) {
    const double f = fitness(x);
    if (!std::isfinite(f)) {
      fail(ErrorKind::InvalidArgument, "fitness is not finite at " + describe(x));
    }
    return f;
  };

  std::vector<std::vector<double>> pos(config.swarm, std::vector<double>(dims));
  std::vector<std::vector<double>> vel(config.swarm, std::vector<double>(dims));
  for (std::size_t p = 0; p < config.swarm; ++p) {
    for (std::size_t d = 0; d < dims; ++d) {
      const auto& b = config.bounds[d];
      const double width = b.hi - b.lo;
      pos[p][d] = p < config.initial_positions.size()
                      ? std::clamp(config.initial_positions[p][d], b.lo, b.hi)
                      : b.lo + unit(rng) * width;
      vel[p][d] = (2.0 * unit(rng) - 1.0) * width;
    }
  }

  std::vector<std::vector<double>> personal = pos;
  std::vector<double> personal_fit(config.swarm);
  PsoResult result;
  result.best_fitness = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < config.swarm; ++p) {
    personal_fit[p] = evaluate(pos[p]);
    if (personal_fit[p] < result.best_fitness) {
      result.best_fitness = personal_fit[p];
      result.best_position = pos[p];
    }
  }
  result.trace.push_back({result.best_position, result.best_fitness});

  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t p = 0; p < config.swarm; ++p) {
      for (std::size_t d = 0; d < dims; ++d) {
        const auto& b = config.bounds[d];
        const double width = b.hi - b.lo;
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        double v = config.inertia * vel[p][d] +
                   config.cognitive * r1 * (personal[p][d] - pos[p][d]) +
                   config.social * r2 * (result.best_position[d] - pos[p][d]);
        v = std::clamp(v, -width, width);
        vel[p][d] = v;
        pos[p][d] = std::clamp(pos[p][d] + v, b.lo, b.hi);
      }
    }
    // Evaluations only read the swarm; the global best is updated after all
    // particles moved.
    for (std::size_t p = 0; p < config.swarm; ++p) {
      const double f = evaluate(pos[p]);
      if (f < personal_fit[p]) {
        personal_fit[p] = f;
        personal[p] = pos[p];
      }
    }
    for (std::size_t p = 0; p < config.swarm; ++p) {
      if (personal_fit[p] < result.best_fitness) {
        result.best_fitness = personal_fit[p];
        result.best_position = personal[p];
      }
    }
    result.trace.push_back({result.best_position, result.best_fitness});
  }
  return result;
}

double lambda_fitness_value(const SpeedupProblem& problem, int semantic, int nonsemantic) {
  const double ps = problem.semantic_fraction();
  const double pns = 1.0 - ps;
  const double fd = problem.required;
  const double ls = static_cast<double>(problem.semantic_frames);
  const double lns = static_cast<double>(problem.nonsemantic_frames);
  const double achieved = (ls + lns) / (ls / semantic + lns / nonsemantic);
  return kLambdaFitnessWeight * std::abs(semantic - (fd + ps * fd) / 2.0) +
         std::abs(achieved - fd) + pns * std::abs(semantic - nonsemantic);
}

double fitness_lambda(std::span<const double> position, const SpeedupProblem& problem,
                      double penalty) {
  if (position.size() != 2) fail(ErrorKind::InvalidArgument, "fitness_lambda expects 2 dims");
  SpeedupProblem p = problem;
  p.lambda_spread = position[0];
  p.lambda_semantic = position[1];
  try {
    const auto s = solve_speedups(p);
    return lambda_fitness_value(p, s.semantic, s.nonsemantic);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infeasible) throw;
    return penalty;
  }
}

JitterMeasure compute_jitter(const FeatureStream& stream,
                             std::span<const std::size_t> selection) {
  JitterMeasure m;
  if (stream.frames.empty()) return m;
  m.max_jitter = std::hypot(stream.frames.front().width, stream.frames.front().height);
  if (selection.size() < 2) return m;

  auto foe_of = [&](std::size_t frame) {
    for (std::size_t k = frame + 1; k-- > 0;) {
      try {
        return resolve_foe(stream.frames.at(k));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::FeatureMissing) throw;
      }
    }
    return stream.frames.at(frame).center();
  };

  Point2 prev = foe_of(selection[0]);
  double acc = 0.0;
  for (std::size_t s = 1; s < selection.size(); ++s) {
    const Point2 cur = foe_of(selection[s]);
    acc += std::hypot(cur.x - prev.x, cur.y - prev.y);
    prev = cur;
  }
  m.jitter = acc / static_cast<double>(selection.size() - 1);
  return m;
}

double top_score_sum(std::span<const double> scores, double required) {
  const auto n = std::min<std::size_t>(
      scores.size(),
      static_cast<std::size_t>(std::ceil(static_cast<double>(scores.size()) / required - 1e-9)));
  std::vector<double> sorted(scores.begin(), scores.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n), sorted.end(),
                    std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += sorted[i];
  return acc;
}

GraphFitness::GraphFitness(const FeatureStream& stream, std::span<const double> scores,
                           std::span<const Segment> leaves, const GraphWeights& base,
                           double required, double penalty)
    : stream_(&stream),
      scores_(scores.begin(), scores.end()),
      base_(base),
      expected_length_(static_cast<double>(stream.size()) / required),
      max_semantic_(top_score_sum(scores, required)),
      penalty_(penalty) {
  base_.validate();
  const CostContext context(stream, scores);
  segments_.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    segments_.push_back(compute_segment_costs(context, leaf, base_.max_skip, base_.epsilon));
  }
}

GraphWeights GraphFitness::weights_at(std::span<const double> lambdas) const {
  if (lambdas.size() != 4) fail(ErrorKind::InvalidArgument, "graph fitness expects 4 dims");
  GraphWeights w = base_;
  w.instability = lambdas[0];
  w.velocity = lambdas[1];
  w.appearance = lambdas[2];
  w.semantic = lambdas[3];
  return w;
}

std::vector<std::size_t> GraphFitness::select(const GraphWeights& weights) const {
  std::vector<FramePath> paths;
  paths.reserve(segments_.size());
  for (const auto& seg : segments_) paths.push_back(shortest_path(weigh(seg, weights)));
  return compose_selection(paths);
}

GraphFitnessTerms GraphFitness::terms(std::span<const std::size_t> selection) const {
  GraphFitnessTerms t;
  const auto jitter = compute_jitter(*stream_, selection);
  t.jitter = jitter.max_jitter > 0.0 ? jitter.jitter / jitter.max_jitter : 0.0;
  t.length = std::abs((static_cast<double>(selection.size()) - expected_length_) / expected_length_);
  if (max_semantic_ > 0.0) {
    double semantics = 0.0;
    for (auto f : selection) semantics += scores_.at(f);
    t.semantic = std::max(0.0, (max_semantic_ - semantics) / max_semantic_);
  }
  return t;
}

double GraphFitness::operator()(std::span<const double> lambdas) const {
  const auto selection = select(weights_at(lambdas));
  if (selection.empty()) return penalty_;
  return terms(selection).total();
}

}  // namespace miff
