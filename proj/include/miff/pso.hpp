#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "miff/features.hpp"
#include "miff/profile.hpp"
#include "miff/speedup.hpp"
#include "miff/transition_graph.hpp"

namespace miff {

struct PsoBounds {
  double lo = 0.0;
  double hi = 10.0;
};

struct PsoConfig {
  std::size_t swarm = 30;
  int iterations = 100;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  std::vector<PsoBounds> bounds;
  std::uint64_t seed = 0;
  // Optional starting positions for the first particles; the rest are drawn
  // uniformly inside the bounds.
  std::vector<std::vector<double>> initial_positions;

  void validate() const;
  double max_width() const;
};

struct PsoTraceEntry {
  std::vector<double> position;
  double fitness = 0.0;
};

struct PsoResult {
  std::vector<double> best_position;
  double best_fitness = 0.0;
  // Entry 0 is the initial swarm, then one entry per iteration.
  std::vector<PsoTraceEntry> trace;
};

using FitnessFunction = std::function<double(std::span<const double>)>;

// Inertia-weight PSO. Positions are clamped to the bounds and velocities to
// the bound widths. Throws Error(InvalidArgument) on a non-finite fitness.
PsoResult pso_optimize(const FitnessFunction& fitness, const PsoConfig& config);

inline constexpr double kLambdaFitnessWeight = 2.0;  // c

// c |F_s - (F_d + p_s F_d)/2| + |F_d' - F_d| + p_ns |F_s - F_ns| where F_d'
// is the rate achieved by (F_s, F_ns).
double lambda_fitness_value(const SpeedupProblem& problem, int semantic, int nonsemantic);

// Fitness over (lambda_1, lambda_2): solves the speed-up problem at the
// particle position and scores the result. Infeasible problems score
// `penalty`.
double fitness_lambda(std::span<const double> position, const SpeedupProblem& problem,
                      double penalty);

struct JitterMeasure {
  double jitter = 0.0;      // J
  double max_jitter = 0.0;  // Max_J
};

// Mean FOE displacement between consecutive selected frames; Max_J is the
// frame diagonal. Frames without a usable FOE reuse the nearest preceding one.
JitterMeasure compute_jitter(const FeatureStream& stream,
                             std::span<const std::size_t> selection);

struct GraphFitnessTerms {
  double jitter = 0.0;
  double length = 0.0;
  double semantic = 0.0;
  double total() const { return jitter + length + semantic; }
};

// Fitness over (lambda_I, lambda_V, lambda_A, lambda_S). Segment cost terms
// are computed once; each evaluation only reweighs and re-solves.
class GraphFitness {
 public:
  GraphFitness(const FeatureStream& stream, std::span<const double> scores,
               std::span<const Segment> leaves, const GraphWeights& base,
               double required, double penalty);

  double operator()(std::span<const double> lambdas) const;

  GraphWeights weights_at(std::span<const double> lambdas) const;
  std::vector<std::size_t> select(const GraphWeights& weights) const;
  GraphFitnessTerms terms(std::span<const std::size_t> selection) const;

  double expected_length() const { return expected_length_; }
  double max_semantic() const { return max_semantic_; }

 private:
  const FeatureStream* stream_;
  std::vector<double> scores_;
  std::vector<SegmentCosts> segments_;
  GraphWeights base_;
  double expected_length_ = 0.0;
  double max_semantic_ = 0.0;
  double penalty_ = 0.0;
};

// Sum of the ceil(L / F_d) highest scores.
double top_score_sum(std::span<const double> scores, double required);

}  // namespace miff
