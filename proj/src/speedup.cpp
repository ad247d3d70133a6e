#include "miff/speedup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "miff/error.hpp"

namespace miff {

namespace {

// ceil that ignores round-off just above an integer
int ceil_tol(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }
int floor_tol(double x) { return static_cast<int>(std::floor(x + 1e-9)); }

}  // namespace

double SpeedupProblem::semantic_fraction() const {
  const double total = static_cast<double>(semantic_frames + nonsemantic_frames);
  return total > 0.0 ? static_cast<double>(semantic_frames) / total : 0.0;
}

int SpeedupProblem::max_rate() const {
  return max_speedup ? *max_speedup : ceil_tol(10.0 * required);
}

int SpeedupProblem::min_semantic_rate() const {
  return std::max(1, ceil_tol(semantic_fraction() * required));
}

void SpeedupProblem::validate() const {
  if (semantic_frames + nonsemantic_frames < 1) {
    fail(ErrorKind::InvalidArgument, "speed-up problem has no frames");
  }
  if (!(required >= 1.0) || !std::isfinite(required)) {
    fail(ErrorKind::InvalidArgument, "required speed-up must be >= 1");
  }
  if (!(lambda_spread >= 0.0) || !(lambda_semantic >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "speed-up regularizers must be non-negative");
  }
}

double SpeedupSolution::achieved(const SpeedupProblem& problem) const {
  const double ls = static_cast<double>(problem.semantic_frames);
  const double lns = static_cast<double>(problem.nonsemantic_frames);
  return (ls + lns) / (ls / semantic + lns / nonsemantic);
}

double energy(const SpeedupProblem& problem, int semantic, int nonsemantic) {
  if (semantic < 1 || nonsemantic < 1) {
    fail(ErrorKind::InvalidArgument, "speed-up rates must be >= 1");
  }
  const double ls = static_cast<double>(problem.semantic_frames);
  const double lns = static_cast<double>(problem.nonsemantic_frames);
  return std::abs((ls + lns) / problem.required - (ls / semantic + lns / nonsemantic));
}

double speedup_objective(const SpeedupProblem& problem, int semantic, int nonsemantic) {
  return energy(problem, semantic, nonsemantic) +
         problem.lambda_spread * std::abs(nonsemantic - semantic) +
         problem.lambda_semantic * std::abs(semantic);
}

SpeedupSolution solve_speedups(const SpeedupProblem& problem) {
  problem.validate();
  const int fs_lo = problem.min_semantic_rate();
  const int fs_hi = floor_tol(problem.required);
  const int fns_lo = ceil_tol(problem.required);
  const int fns_hi = problem.max_rate();
  if (fs_lo > fs_hi) {
    fail(ErrorKind::Infeasible,
         "constraint r3 (F_s >= p_s F_d = " + std::to_string(fs_lo) +
             ") conflicts with r1 (F_s <= F_d = " + std::to_string(problem.required) + ")");
  }
  if (fns_lo > fns_hi) {
    fail(ErrorKind::Infeasible,
         "constraint r2 (F_ns >= F_d) conflicts with the search ceiling F_max = " +
             std::to_string(fns_hi));
  }

  SpeedupSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int fs = fs_lo; fs <= fs_hi; ++fs) {
    for (int fns = fns_lo; fns <= fns_hi; ++fns) {
      const double value = speedup_objective(problem, fs, fns);
      if (value < best.objective) {
        best.semantic = fs;
        best.nonsemantic = fns;
        best.objective = value;
      }
    }
  }
  best.residual = energy(problem, best.semantic, best.nonsemantic);
  best.semantic_fraction = problem.semantic_fraction();
  return best;
}

}  // namespace miff
