#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "miff/error.hpp"
#include "miff/feature_io.hpp"
#include "miff/pipeline.hpp"
#include "miff/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitUnstabilizable = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> speedup;
  std::string out = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed for every random stage");
  app->add_option("--speedup", c.speedup, "required speed-up F_d");
  app->add_option("--out", c.out, "output directory");
}

miff::PipelineConfig resolve_config(const Common& c) {
  auto config = c.config.empty() ? miff::config_from_json({{"version", miff::kConfigVersion}})
                                 : miff::load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (c.speedup) config.required = *c.speedup;
  config.validate();
  return config;
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

json ground_truth_json(const miff::Scenario& s) {
  json poses = json::array();
  for (const auto& p : s.truth.poses) poses.push_back({p.tx, p.ty, p.rotation});
  json blocks = json::array();
  for (const auto& b : s.spec.semantic_blocks) {
    blocks.push_back({{"start", b.start}, {"end", b.end}, {"intensity", b.intensity}});
  }
  return {{"format", "miff-ground-truth"},
          {"version", 1},
          {"length", s.spec.length},
          {"fps", s.spec.fps},
          {"width", s.spec.width},
          {"height", s.spec.height},
          {"seed", s.spec.seed},
          {"semantic_blocks", blocks},
          {"poses", poses},
          {"intensity", s.truth.intensity}};
}

void write_frames(const fs::path& dir, const std::vector<miff::GrayImage>& frames) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "out_%06zu.pgm", k);
    miff::write_pgm(dir / name, frames[k]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-importance semantic fast-forward of egocentric feature streams"};
  app.require_subcommand(1);

  Common common;
  std::string features, scores_path, segments_path, selection_path;
  std::string preset = "25p";
  std::size_t length = 3000;
  bool render = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic scenario");
  add_common(synth, common);
  synth->add_option("--preset", preset, "0p, 25p, 50p, 75p, two-level or static");
  synth->add_option("--length", length, "number of frames")->check(CLI::PositiveNumber);
  synth->add_flag("--render", render, "write PGM rasters and reference them from the stream");

  auto* score = app.add_subcommand("score", "per-frame semantic scores");
  add_common(score, common);
  score->add_option("--features", features)->required()->check(CLI::ExistingFile);

  auto* segment = app.add_subcommand("segment", "multi-importance segmentation");
  add_common(segment, common);
  segment->add_option("--features", features)->required()->check(CLI::ExistingFile);
  segment->add_option("--scores", scores_path, "scores.json from `score`")->check(CLI::ExistingFile);

  std::size_t semantic_frames = 0, nonsemantic_frames = 0;
  std::optional<int> max_speedup;
  auto* speedup = app.add_subcommand("speedup", "solve one semantic/non-semantic rate problem");
  add_common(speedup, common);
  speedup->add_option("--semantic-frames", semantic_frames)->required();
  speedup->add_option("--nonsemantic-frames", nonsemantic_frames)->required();
  speedup->add_option("--max-speedup", max_speedup);

  auto* select = app.add_subcommand("select", "shortest-path frame selection");
  add_common(select, common);
  select->add_option("--features", features)->required()->check(CLI::ExistingFile);
  select->add_option("--segments", segments_path)->required()->check(CLI::ExistingFile);
  select->add_option("--scores", scores_path)->check(CLI::ExistingFile);

  auto* stab = app.add_subcommand("stabilize", "stabilization plan for a selection");
  add_common(stab, common);
  stab->add_option("--features", features)->required()->check(CLI::ExistingFile);
  stab->add_option("--selection", selection_path)->required()->check(CLI::ExistingFile);
  stab->add_option("--scores", scores_path)->check(CLI::ExistingFile);
  stab->add_flag("--render", render, "write the stabilized PGM sequence (needs rasters)");

  auto* metrics = app.add_subcommand("metrics", "evaluate a selection");
  add_common(metrics, common);
  metrics->add_option("--features", features)->required()->check(CLI::ExistingFile);
  metrics->add_option("--selection", selection_path)->required()->check(CLI::ExistingFile);
  metrics->add_option("--segments", segments_path)->check(CLI::ExistingFile);
  metrics->add_option("--scores", scores_path)->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "full pipeline");
  add_common(run, common);
  auto* run_features = run->add_option("--features", features)->check(CLI::ExistingFile);
  run->add_option("--preset", preset, "synthesize this scenario instead of reading features")
      ->excludes(run_features);
  run->add_option("--length", length, "frames of the synthesized scenario")
      ->check(CLI::PositiveNumber);
  run->add_flag("--render", render, "write the stabilized PGM sequence");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve_config(common);
    const auto load = [&] {
      auto stream = miff::load_feature_stream(features);
      miff::validate_stream(stream);
      return stream;
    };
    const auto scores_for = [&](const miff::FeatureStream& stream) {
      if (scores_path.empty()) return miff::score_stage(stream, config);
      auto s = miff::scores_from_json(miff::read_json(scores_path));
      if (s.size() != stream.size()) {
        miff::fail(miff::ErrorKind::Format, "scores.json does not match the stream length");
      }
      return s;
    };
    const fs::path base = features.empty() ? fs::path(".") : fs::path(features).parent_path();

    if (*synth) {
      const auto dir = out_dir(common);
      const auto scenario = miff::synthesize_scenario(
          miff::scenario_preset(preset, length, common.seed.value_or(config.seed)));
      auto stream = scenario.stream;
      if (render) {
        fs::create_directories(dir / "rasters");
        for (std::size_t k = 0; k < stream.size(); ++k) {
          char name[40];
          std::snprintf(name, sizeof name, "rasters/frame_%06zu.pgm", k);
          miff::write_pgm(dir / name, miff::render_frame(scenario, k));
          stream.frames[k].raster = name;
        }
      }
      miff::save_feature_stream(dir / "features.jsonl", stream);
      miff::write_json(dir / "ground_truth.json", ground_truth_json(scenario));
      return 0;
    }
    if (*score) {
      const auto stream = load();
      miff::write_json(out_dir(common) / "scores.json", miff::scores_to_json(scores_for(stream)));
      return 0;
    }
    if (*segment) {
      const auto stream = load();
      const auto scores = scores_for(stream);
      const auto stage = miff::segment_stage(scores, stream.fps, config);
      const auto dir = out_dir(common);
      miff::write_json(dir / "segments.json", miff::segments_to_json(stage));
      miff::write_json(dir / "pso_trace.json", miff::pso_trace_to_json(stage, nullptr));
      return 0;
    }
    if (*speedup) {
      miff::SpeedupProblem problem;
      problem.semantic_frames = semantic_frames;
      problem.nonsemantic_frames = nonsemantic_frames;
      problem.required = config.required;
      problem.max_speedup = max_speedup;
      const auto search = miff::search_speedups(problem, config, config.seed);
      const auto j = miff::speedup_to_json(search.problem, search.solution);
      if (common.out == ".") {
        std::cout << j.dump(2) << '\n';
      } else {
        miff::write_json(out_dir(common) / "speedup.json", j);
      }
      return 0;
    }
    if (*select) {
      const auto stream = load();
      const auto scores = scores_for(stream);
      const auto leaves = miff::leaves_from_json(miff::read_json(segments_path));
      if (leaves.back().end != stream.size()) {
        miff::fail(miff::ErrorKind::Format, "segments.json does not match the stream length");
      }
      const auto stage = miff::select_stage(stream, scores, leaves, config);
      const auto dir = out_dir(common);
      miff::write_json(dir / "selection.json", miff::selection_to_json(stage, leaves));
      if (stage.pso) {
        miff::write_json(dir / "pso_trace.json", miff::pso_trace_to_json({}, &stage));
      }
      return 0;
    }

    // The remaining subcommands need a stabilization plan.
    auto plan_for = [&](const miff::FeatureStream& stream, std::span<const double> scores,
                        std::span<const std::size_t> selection) {
      miff::StabilizerConfig sc = config.stabilizer;
      sc.ransac.seed = config.seed;
      return miff::stabilize(selection, stream, scores, sc);
    };

    if (*stab) {
      const auto stream = load();
      const auto scores = scores_for(stream);
      const auto selection = miff::selection_from_json(miff::read_json(selection_path));
      const auto plan = plan_for(stream, scores, selection);
      const auto dir = out_dir(common);
      miff::write_json(dir / "plan.json", miff::plan_to_json(plan));
      if (render) {
        const auto rasters = miff::stream_rasters(stream, base);
        if (!rasters) miff::fail(miff::ErrorKind::Format, "--render needs a raster for every frame");
        write_frames(dir / "stabilized", miff::render_stabilized(plan, *rasters));
      }
      return plan.fully_unstabilizable() ? kExitUnstabilizable : 0;
    }
    if (*metrics) {
      const auto stream = load();
      const auto scores = scores_for(stream);
      const auto selection = miff::selection_from_json(miff::read_json(selection_path));
      std::vector<miff::Segment> leaves;
      if (!segments_path.empty()) leaves = miff::leaves_from_json(miff::read_json(segments_path));
      std::optional<miff::StabilizationPlan> plan;
      if (config.run_stabilizer) plan = plan_for(stream, scores, selection);
      const auto rasters = miff::stream_rasters(stream, base);
      const auto report = miff::build_report(stream, scores, selection, leaves, {},
                                             plan ? &*plan : nullptr, config,
                                             rasters ? &*rasters : nullptr);
      miff::write_json(out_dir(common) / "report.json", miff::report_to_json(report));
      return 0;
    }

    // run
    std::optional<miff::Scenario> scenario;
    miff::FeatureStream stream;
    std::optional<miff::RasterSource> rasters;
    if (features.empty()) {
      scenario = miff::synthesize_scenario(miff::scenario_preset(preset, length, config.seed));
      stream = scenario->stream;
      rasters = miff::RasterSource(
          [&s = *scenario](std::size_t k) { return miff::render_frame(s, k); });
    } else {
      stream = load();
      rasters = miff::stream_rasters(stream, base);
    }
    const auto result = miff::run_pipeline(stream, config, rasters ? &*rasters : nullptr);
    const auto dir = out_dir(common);
    miff::write_json(dir / "config.json", miff::config_to_json(config));
    miff::write_json(dir / "scores.json", miff::scores_to_json(result.scores));
    miff::write_json(dir / "segments.json", miff::segments_to_json(result.segments));
    miff::write_json(dir / "pso_trace.json",
                     miff::pso_trace_to_json(result.segments, &result.select));
    miff::write_json(dir / "selection.json",
                     miff::selection_to_json(result.select, result.segments.tree.leaves));
    if (result.plan) miff::write_json(dir / "plan.json", miff::plan_to_json(*result.plan));
    miff::write_json(dir / "report.json", miff::report_to_json(result.report));
    if (scenario) miff::write_json(dir / "ground_truth.json", ground_truth_json(*scenario));
    if (render && result.plan && rasters) {
      write_frames(dir / "stabilized", miff::render_stabilized(*result.plan, *rasters));
    }
    return result.plan && result.plan->fully_unstabilizable() ? kExitUnstabilizable : 0;
  } catch (const miff::Error& e) {
    std::cerr << "miff: " << miff::to_string(e.kind()) << ": " << e.what() << '\n';
    switch (e.kind()) {
      case miff::ErrorKind::Format:
      case miff::ErrorKind::Config: return kExitFormat;
      case miff::ErrorKind::Infeasible: return kExitInfeasible;
      case miff::ErrorKind::Unstabilizable: return kExitUnstabilizable;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "miff: " << e.what() << '\n';
    return 1;
  }
}
