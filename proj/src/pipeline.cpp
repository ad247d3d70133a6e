#include "miff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <type_traits>

#include "miff/error.hpp"
#include "miff/image.hpp"

namespace miff {

using nlohmann::json;

PsoConfig PsoSettings::make(std::size_t dims, std::uint64_t seed) const {
  PsoConfig c;
  c.swarm = swarm;
  c.iterations = iterations;
  c.inertia = inertia;
  c.cognitive = cognitive;
  c.social = social;
  c.bounds.assign(dims, bounds);
  c.seed = seed;
  return c;
}

bool PipelineConfig::any_graph_auto() const {
  return std::any_of(graph_auto.begin(), graph_auto.end(), [](bool b) { return b; });
}

void PipelineConfig::validate() const {
  if (!(required >= 1.0) || !std::isfinite(required)) {
    fail(ErrorKind::Config, "speedup must be a finite number >= 1");
  }
  if (!(profile.stop_ratio > 0.0 && profile.stop_ratio < 1.0)) {
    fail(ErrorKind::Config, "profile.stop_ratio must lie in (0, 1)");
  }
  if (profile.bins < 2) fail(ErrorKind::Config, "profile.bins must be >= 2");
  if (profile.max_levels < 1) fail(ErrorKind::Config, "profile.max_levels must be >= 1");
  for (auto v : {lambda_spread, lambda_semantic}) {
    if (v && !(*v >= 0.0 && std::isfinite(*v))) {
      fail(ErrorKind::Config, "speed-up lambdas must be finite and non-negative");
    }
  }
  try {
    graph.validate();
    speedup_pso.make(2, 0).validate();
    graph_pso.make(4, 0).validate();
    stabilizer.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  if (instability.buffer_size == 1) fail(ErrorKind::Config, "metrics.buffer_size must be >= 2");
  if (instability.stride < 1) fail(ErrorKind::Config, "metrics.stride must be >= 1");
}

namespace {

// Walks a JSON object, consuming known keys; leftovers are reported as
// unknown so typos fail loudly.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::Config, where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (auto* v = take(key)) {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!v->is_number_unsigned()) {
          fail(ErrorKind::Config, where(key) + " must be a non-negative integer");
        }
      }
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        fail(ErrorKind::Config, where(key) + " has the wrong type");
      }
    }
  }

  void number(const char* key, double& out) {
    if (auto* v = take(key)) {
      if (!v->is_number()) fail(ErrorKind::Config, where(key) + " must be a number");
      out = v->get<double>();
    }
  }

  // A number or the string "auto"; auto leaves `out` unset.
  void number_or_auto(const char* key, std::optional<double>& out) {
    if (auto* v = take(key)) {
      if (v->is_string() && v->get<std::string>() == "auto") {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(ErrorKind::Config, where(key) + " must be a number or \"auto\"");
      }
    }
  }

  void optional_int(const char* key, std::optional<int>& out) {
    if (auto* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number_integer()) {
        out = v->get<int>();
      } else {
        fail(ErrorKind::Config, where(key) + " must be an integer or null");
      }
    }
  }

  const json* object(const char* key) {
    auto* v = take(key);
    if (v && !v->is_object()) fail(ErrorKind::Config, where(key) + " must be an object");
    return v;
  }

  std::string where(const char* key = nullptr) const {
    std::string s = path_.empty() ? "config" : path_;
    if (key) s += path_.empty() ? std::string(": ") + key : std::string(".") + key;
    return s;
  }
  std::string child(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        fail(ErrorKind::Config, "unknown key " + (path_.empty() ? it.key() : path_ + "." + it.key()));
      }
    }
  }

 private:
  const json* take(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_pso(const json& j, const std::string& path, PsoSettings& s) {
  Reader r(j, path);
  r.get("swarm", s.swarm);
  r.get("iterations", s.iterations);
  r.number("inertia", s.inertia);
  r.number("cognitive", s.cognitive);
  r.number("social", s.social);
  r.number("lower", s.bounds.lo);
  r.number("upper", s.bounds.hi);
  r.finish();
}

json pso_json(const PsoSettings& s) {
  return {{"swarm", s.swarm},         {"iterations", s.iterations}, {"inertia", s.inertia},
          {"cognitive", s.cognitive}, {"social", s.social},         {"lower", s.bounds.lo},
          {"upper", s.bounds.hi}};
}

json auto_or(std::optional<double> v) { return v ? json(*v) : json("auto"); }

}  // namespace

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  Reader root(j, "");
  int version = 0;
  root.get("version", version);
  if (version != kConfigVersion) {
    fail(ErrorKind::Config, "config version must be " + std::to_string(kConfigVersion));
  }
  root.number("speedup", c.required);
  root.get("seed", c.seed);
  if (auto* s = root.object("scoring")) {
    Reader r(*s, "scoring");
    r.get("confidence_floor", c.scoring.confidence_floor);
    r.get("confidence_norm", c.scoring.confidence_norm);
    r.finish();
  }
  if (auto* s = root.object("profile")) {
    Reader r(*s, "profile");
    r.number("stop_ratio", c.profile.stop_ratio);
    r.get("bins", c.profile.bins);
    r.get("max_levels", c.profile.max_levels);
    r.optional_int("max_speedup", c.profile.max_speedup);
    r.finish();
  }
  c.lambda_spread.reset();
  c.lambda_semantic.reset();
  if (auto* s = root.object("speedup_weights")) {
    Reader r(*s, "speedup_weights");
    r.number_or_auto("lambda_spread", c.lambda_spread);
    r.number_or_auto("lambda_semantic", c.lambda_semantic);
    r.finish();
  }
  if (auto* s = root.object("graph")) {
    Reader r(*s, "graph");
    double* lambdas[4] = {&c.graph.instability, &c.graph.velocity, &c.graph.appearance,
                          &c.graph.semantic};
    const char* names[4] = {"instability", "velocity", "appearance", "semantic"};
    for (int k = 0; k < 4; ++k) {
      std::optional<double> v = *lambdas[k];
      r.number_or_auto(names[k], v);
      c.graph_auto[static_cast<std::size_t>(k)] = !v.has_value();
      if (v) *lambdas[k] = *v;
    }
    r.number("epsilon", c.graph.epsilon);
    r.get("max_skip", c.graph.max_skip);
    r.get("border", c.graph.border);
    r.get("cap_border", c.graph.cap_border);
    r.finish();
  }
  if (auto* s = root.object("pso")) {
    Reader r(*s, "pso");
    if (auto* p = r.object("speedup")) read_pso(*p, "pso.speedup", c.speedup_pso);
    if (auto* p = r.object("graph")) read_pso(*p, "pso.graph", c.graph_pso);
    r.finish();
  }
  if (auto* s = root.object("stabilizer")) {
    Reader r(*s, "stabilizer");
    r.get("enabled", c.run_stabilizer);
    r.get("segment_size", c.stabilizer.segment_size);
    r.number("drop_fraction", c.stabilizer.drop_fraction);
    r.number("crop_fraction", c.stabilizer.crop_fraction);
    r.number("eta", c.stabilizer.eta);
    r.number("sigma", c.stabilizer.sigma);
    r.get("ransac_iterations", c.stabilizer.ransac.iterations);
    r.number("inlier_threshold", c.stabilizer.ransac.inlier_threshold);
    r.finish();
  }
  if (auto* s = root.object("metrics")) {
    Reader r(*s, "metrics");
    r.get("buffer_size", c.instability.buffer_size);
    r.get("stride", c.instability.stride);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json graph = {{"epsilon", c.graph.epsilon},
                {"max_skip", c.graph.max_skip},
                {"border", c.graph.border},
                {"cap_border", c.graph.cap_border}};
  const double lambdas[4] = {c.graph.instability, c.graph.velocity, c.graph.appearance,
                             c.graph.semantic};
  const char* names[4] = {"instability", "velocity", "appearance", "semantic"};
  for (std::size_t k = 0; k < 4; ++k) {
    graph[names[k]] = c.graph_auto[k] ? json("auto") : json(lambdas[k]);
  }
  return {
      {"version", kConfigVersion},
      {"speedup", c.required},
      {"seed", c.seed},
      {"scoring",
       {{"confidence_floor", c.scoring.confidence_floor},
        {"confidence_norm", c.scoring.confidence_norm}}},
      {"profile",
       {{"stop_ratio", c.profile.stop_ratio},
        {"bins", c.profile.bins},
        {"max_levels", c.profile.max_levels},
        {"max_speedup", c.profile.max_speedup ? json(*c.profile.max_speedup) : json(nullptr)}}},
      {"speedup_weights",
       {{"lambda_spread", auto_or(c.lambda_spread)},
        {"lambda_semantic", auto_or(c.lambda_semantic)}}},
      {"graph", graph},
      {"pso", {{"speedup", pso_json(c.speedup_pso)}, {"graph", pso_json(c.graph_pso)}}},
      {"stabilizer",
       {{"enabled", c.run_stabilizer},
        {"segment_size", c.stabilizer.segment_size},
        {"drop_fraction", c.stabilizer.drop_fraction},
        {"crop_fraction", c.stabilizer.crop_fraction},
        {"eta", c.stabilizer.eta},
        {"sigma", c.stabilizer.sigma},
        {"ransac_iterations", c.stabilizer.ransac.iterations},
        {"inlier_threshold", c.stabilizer.ransac.inlier_threshold}}},
      {"metrics",
       {{"buffer_size", c.instability.buffer_size}, {"stride", c.instability.stride}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return config_from_json(j);
}

std::vector<std::size_t> uniform_baseline(std::size_t length, double required) {
  if (!(required >= 1.0)) fail(ErrorKind::InvalidArgument, "required speed-up must be >= 1");
  const auto step = static_cast<std::size_t>(std::ceil(required - 1e-9));
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < length; f += step) out.push_back(f);
  return out;
}

namespace {

// Seeds of the independent random streams, derived from the run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Salt : std::uint64_t { kSpeedupPso = 1, kGraphPso = 2, kRansac = 3 };

template <typename F>
auto in_stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    fail(e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

std::vector<double> score_stage(const FeatureStream& stream, const PipelineConfig& config) {
  return in_stage("score", [&] {
    validate_stream(stream);
    return score_stream(stream, resolve_norms(stream, config.scoring));
  });
}

SpeedupSearch search_speedups(const SpeedupProblem& problem, const PipelineConfig& config,
                              std::uint64_t seed) {
  SpeedupSearch search;
  search.problem = problem;
  search.problem.lambda_spread = config.lambda_spread.value_or(0.0);
  search.problem.lambda_semantic = config.lambda_semantic.value_or(0.0);
  if (!config.lambda_spread || !config.lambda_semantic) {
    // Feasibility does not depend on the lambdas; fail before searching.
    solve_speedups(search.problem);
    const auto pso = config.speedup_pso.make(2, seed);
    const double penalty = 1e3 * pso.max_width();
    auto place = [&](std::span<const double> x) {
      SpeedupProblem p = search.problem;
      if (!config.lambda_spread) p.lambda_spread = x[0];
      if (!config.lambda_semantic) p.lambda_semantic = x[1];
      return p;
    };
    search.pso = pso_optimize(
        [&](std::span<const double> x) {
          const auto p = place(x);
          const double lambdas[2] = {p.lambda_spread, p.lambda_semantic};
          return fitness_lambda(lambdas, p, penalty);
        },
        pso);
    search.problem = place(search.pso->best_position);
  }
  search.solution = solve_speedups(search.problem);
  return search;
}

SegmentStage segment_stage(std::span<const double> scores, double fps,
                           const PipelineConfig& config) {
  return in_stage("segment", [&] {
    SegmentStage stage;
    int iteration = 0;
    const SpeedupSolver solver = [&](const SpeedupProblem& base) {
      ++iteration;
      auto search = search_speedups(
          base, config, stream_seed(config.seed, kSpeedupPso * 1000 + static_cast<std::uint64_t>(iteration)));
      search.iteration = iteration;
      stage.searches.push_back(search);
      return search.solution;
    };
    stage.tree = refine_multi_importance(scores, fps, config.required, config.profile, solver);
    return stage;
  });
}

SelectStage select_stage(const FeatureStream& stream, std::span<const double> scores,
                         std::span<const Segment> leaves, const PipelineConfig& config) {
  return in_stage("select", [&] {
    SelectStage stage;
    stage.weights = config.graph;
    const CostContext context(stream, scores);
    std::vector<SegmentCosts> costs;
    costs.reserve(leaves.size());
    for (const auto& leaf : leaves) {
      costs.push_back(
          compute_segment_costs(context, leaf, config.graph.max_skip, config.graph.epsilon));
    }
    if (config.any_graph_auto()) {
      std::vector<std::size_t> dims;
      for (std::size_t k = 0; k < 4; ++k) {
        if (config.graph_auto[k]) dims.push_back(k);
      }
      const auto pso = config.graph_pso.make(dims.size(), stream_seed(config.seed, kGraphPso));
      const GraphFitness fitness(stream, scores, leaves, config.graph, config.required,
                                 1e3 * pso.max_width());
      const double base[4] = {config.graph.instability, config.graph.velocity,
                              config.graph.appearance, config.graph.semantic};
      auto expand = [&](std::span<const double> x) {
        std::vector<double> full(base, base + 4);
        for (std::size_t d = 0; d < dims.size(); ++d) full[dims[d]] = x[d];
        return full;
      };
      stage.pso = pso_optimize([&](std::span<const double> x) { return fitness(expand(x)); }, pso);
      stage.weights = fitness.weights_at(expand(stage.pso->best_position));
    }
    for (const auto& c : costs) stage.paths.push_back(shortest_path(weigh(c, stage.weights)));
    stage.selection = compose_selection(stage.paths);
    return stage;
  });
}

Report build_report(const FeatureStream& stream, std::span<const double> scores,
                    std::span<const std::size_t> selection, std::span<const Segment> leaves,
                    std::span<const FramePath> paths, const StabilizationPlan* plan,
                    const PipelineConfig& config, const RasterSource* rasters) {
  return in_stage("metrics", [&] {
    Report r;
    r.input_length = stream.size();
    r.output_length = selection.size();
    r.required = config.required;
    r.achieved = achieved_speedup(stream.size(), selection.size());
    r.retention = semantic_retention(selection, scores, config.required);
    const auto uniform = uniform_baseline(stream.size(), config.required);
    r.uniform_retention = semantic_retention(uniform, scores, config.required);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      LeafReport lr;
      lr.leaf = leaves[k];
      lr.selected = static_cast<std::size_t>(std::count_if(
          selection.begin(), selection.end(),
          [&](std::size_t f) { return f >= leaves[k].start && f < leaves[k].end; }));
      lr.achieved = lr.selected ? static_cast<double>(leaves[k].length()) /
                                      static_cast<double>(lr.selected)
                                : 0.0;
      if (k < paths.size()) lr.path_cost = paths[k].cost;
      r.leaves.push_back(lr);
    }
    if (plan) {
      r.stabilized_length = plan->frames.size();
      r.unstabilizable_segments = plan->unstabilizable_segments;
      for (const auto& f : plan->frames) {
        if (f.action == FrameAction::Stitched) ++r.stitched;
        if (f.action == FrameAction::Replaced) ++r.replaced;
      }
      const std::size_t buffer = config.instability.resolved_buffer(stream.fps);
      if (rasters && plan->frames.size() >= buffer) {
        InstabilityAccumulator stabilized(buffer, config.instability.stride);
        InstabilityAccumulator raw(buffer, config.instability.stride);
        for (const auto& f : plan->frames) {
          // Each source raster is loaded once per output frame.
          std::map<std::size_t, GrayImage> loaded;
          const RasterSource cached = [&](std::size_t k) -> GrayImage {
            auto it = loaded.find(k);
            if (it == loaded.end()) it = loaded.emplace(k, (*rasters)(k)).first;
            return it->second;
          };
          stabilized.push(render_planned_frame(*plan, f, cached));
          raw.push(render_unstabilized_frame(*plan, f, cached));
        }
        r.instability_stabilized = stabilized.value();
        r.instability_unstabilized = raw.value();
      }
    }
    return r;
  });
}

PipelineResult run_pipeline(const FeatureStream& stream, const PipelineConfig& config,
                            const RasterSource* rasters) {
  config.validate();
  PipelineResult out;
  out.scores = score_stage(stream, config);
  out.segments = segment_stage(out.scores, stream.fps, config);
  out.select = select_stage(stream, out.scores, out.segments.tree.leaves, config);
  if (config.run_stabilizer) {
    out.plan = in_stage("stabilize", [&] {
      StabilizerConfig sc = config.stabilizer;
      sc.ransac.seed = stream_seed(config.seed, kRansac);
      return stabilize(out.select.selection, stream, out.scores, sc);
    });
  }
  out.report = build_report(stream, out.scores, out.select.selection, out.segments.tree.leaves,
                            out.select.paths, out.plan ? &*out.plan : nullptr, config, rasters);
  return out;
}

std::optional<RasterSource> stream_rasters(const FeatureStream& stream,
                                           const std::filesystem::path& base) {
  std::vector<std::filesystem::path> paths;
  paths.reserve(stream.size());
  for (const auto& f : stream.frames) {
    if (!f.raster) return std::nullopt;
    const std::filesystem::path p(*f.raster);
    paths.push_back(p.is_absolute() ? p : base / p);
  }
  return RasterSource([paths](std::size_t k) { return read_pgm(paths.at(k)); });
}

}  // namespace miff
