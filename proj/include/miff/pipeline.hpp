#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "miff/features.hpp"
#include "miff/metrics.hpp"
#include "miff/profile.hpp"
#include "miff/pso.hpp"
#include "miff/stabilizer.hpp"
#include "miff/transition_graph.hpp"

namespace miff {

inline constexpr int kConfigVersion = 1;

// Swarm settings shared by both PSO stages; bounds apply to every dimension.
struct PsoSettings {
  std::size_t swarm = 30;
  int iterations = 100;
  double inertia = 0.729;
  double cognitive = 1.49445;
  double social = 1.49445;
  PsoBounds bounds;

  PsoConfig make(std::size_t dims, std::uint64_t seed) const;
};

// Graph-weight fitness solves every segment graph; keep its swarm small.
inline PsoSettings small_swarm() {
  PsoSettings s;
  s.swarm = 10;
  s.iterations = 10;
  return s;
}

struct PipelineConfig {
  double required = 10.0;  // F_d
  std::uint64_t seed = 0;
  ScoringConfig scoring;
  RefineConfig profile;
  // nullopt means "auto": chosen by PSO for every refinement iteration.
  std::optional<double> lambda_spread;
  std::optional<double> lambda_semantic;
  GraphWeights graph;
  // "auto" flags for lambda_I, lambda_V, lambda_A, lambda_S.
  std::array<bool, 4> graph_auto{true, true, true, true};
  PsoSettings speedup_pso;
  PsoSettings graph_pso = small_swarm();
  StabilizerConfig stabilizer;
  bool run_stabilizer = true;
  InstabilityConfig instability;

  void validate() const;
  bool any_graph_auto() const;
};

// Strict parser: unknown keys, wrong types and version mismatches throw
// Error(Config). Missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

struct SpeedupSearch {
  int iteration = 0;  // refinement pass, 1-based
  SpeedupProblem problem;
  std::optional<PsoResult> pso;  // absent when both lambdas were explicit
  SpeedupSolution solution;
};

// Solves one rate problem with the configured lambdas; "auto" lambdas are
// chosen by PSO over the lambda fitness first.
SpeedupSearch search_speedups(const SpeedupProblem& problem, const PipelineConfig& config,
                              std::uint64_t seed);

struct SegmentStage {
  SegmentTree tree;
  std::vector<SpeedupSearch> searches;
};

struct SelectStage {
  GraphWeights weights;
  std::optional<PsoResult> pso;
  std::vector<FramePath> paths;  // one per leaf
  std::vector<std::size_t> selection;
};

struct LeafReport {
  Segment leaf;
  std::size_t selected = 0;
  double achieved = 0.0;
  double path_cost = 0.0;
};

struct Report {
  std::size_t input_length = 0;
  std::size_t output_length = 0;  // selected frames
  std::size_t stabilized_length = 0;  // frames kept by the stabilizer
  double required = 0.0;
  double achieved = 0.0;
  Retention retention;
  Retention uniform_retention;
  std::optional<double> instability_stabilized;
  std::optional<double> instability_unstabilized;
  std::size_t stitched = 0;
  std::size_t replaced = 0;
  std::size_t unstabilizable_segments = 0;
  std::vector<LeafReport> leaves;
};

struct PipelineResult {
  std::vector<double> scores;
  SegmentStage segments;
  SelectStage select;
  std::optional<StabilizationPlan> plan;
  Report report;
};

// Every ceil(F_d)-th frame starting at 0.
std::vector<std::size_t> uniform_baseline(std::size_t length, double required);

std::vector<double> score_stage(const FeatureStream& stream, const PipelineConfig& config);
SegmentStage segment_stage(std::span<const double> scores, double fps,
                           const PipelineConfig& config);
SelectStage select_stage(const FeatureStream& stream, std::span<const double> scores,
                         std::span<const Segment> leaves, const PipelineConfig& config);
Report build_report(const FeatureStream& stream, std::span<const double> scores,
                    std::span<const std::size_t> selection, std::span<const Segment> leaves,
                    std::span<const FramePath> paths, const StabilizationPlan* plan,
                    const PipelineConfig& config, const RasterSource* rasters);

// Runs every stage in order. Errors are rethrown with the failing stage name
// prefixed to the message and their kind preserved.
PipelineResult run_pipeline(const FeatureStream& stream, const PipelineConfig& config,
                            const RasterSource* rasters = nullptr);

// Rasters referenced by the stream's `raster` fields, resolved against `base`.
// nullopt when any frame has no raster.
std::optional<RasterSource> stream_rasters(const FeatureStream& stream,
                                           const std::filesystem::path& base);

// Artifact writers and the readers needed to chain CLI stages. Readers throw
// Error(Format) on malformed input.
nlohmann::json scores_to_json(std::span<const double> scores);
std::vector<double> scores_from_json(const nlohmann::json& j);
nlohmann::json segments_to_json(const SegmentStage& stage);
std::vector<Segment> leaves_from_json(const nlohmann::json& j);
nlohmann::json selection_to_json(const SelectStage& stage, std::span<const Segment> leaves);
std::vector<std::size_t> selection_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const StabilizationPlan& plan);
nlohmann::json report_to_json(const Report& report);
nlohmann::json pso_trace_to_json(const SegmentStage& segments, const SelectStage* select);
nlohmann::json speedup_to_json(const SpeedupProblem& problem, const SpeedupSolution& solution);

nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; byte-stable for equal inputs.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace miff
