#pragma once

#include <cstddef>
#include <optional>

namespace miff {

// Discrete assignment of a semantic rate F_s and a non-semantic rate F_ns
// that together approximate the required overall rate F_d.
struct SpeedupProblem {
  std::size_t semantic_frames = 0;     // L_s
  std::size_t nonsemantic_frames = 0;  // L_ns
  double required = 1.0;               // F_d
  double lambda_spread = 0.0;          // lambda_1, weight of |F_ns - F_s|
  double lambda_semantic = 0.0;        // lambda_2, weight of |F_s|
  std::optional<int> max_speedup;      // F_max; defaults to ceil(10 F_d)

  double semantic_fraction() const;  // p_s
  int max_rate() const;
  // Smallest admissible F_s: max(1, ceil(p_s F_d)).
  int min_semantic_rate() const;
  void validate() const;
};

struct SpeedupSolution {
  int semantic = 1;     // F_s
  int nonsemantic = 1;  // F_ns
  double objective = 0.0;
  double residual = 0.0;  // D(F_ns, F_s)
  double semantic_fraction = 0.0;

  // (L_s + L_ns) / (L_s / F_s + L_ns / F_ns)
  double achieved(const SpeedupProblem& problem) const;
};

// |(L_s + L_ns)/F_d - (L_s/F_s + L_ns/F_ns)|
double energy(const SpeedupProblem& problem, int semantic, int nonsemantic);

// energy + lambda_1 |F_ns - F_s| + lambda_2 |F_s|
double speedup_objective(const SpeedupProblem& problem, int semantic, int nonsemantic);

// Exhaustive search over F_s in [min_semantic_rate, floor(F_d)] and F_ns in
// [ceil(F_d), F_max]. Ties go to the smaller F_s, then the smaller F_ns.
// Throws Error(Infeasible) when the box is empty.
SpeedupSolution solve_speedups(const SpeedupProblem& problem);

}  // namespace miff
