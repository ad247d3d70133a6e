#include <cmath>
#include <fstream>

#include "miff/error.hpp"
#include "miff/pipeline.hpp"

namespace miff {

using nlohmann::json;

namespace {

json segment_json(const Segment& s) {
  return {{"start", s.start},
          {"end", s.end},
          {"kind", to_string(s.kind)},
          {"level", s.level},
          {"speedup", s.speedup ? json(*s.speedup) : json(nullptr)}};
}

json matrix_json(const Homography& h) {
  json row = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) row.push_back(h(r, c));
  }
  return row;
}

json rect_json(const Rect& r) { return {r.x0, r.y0, r.x1, r.y1}; }

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

json trace_json(const PsoResult& pso) {
  json trace = json::array();
  for (std::size_t k = 0; k < pso.trace.size(); ++k) {
    trace.push_back({{"iteration", k},
                     {"best_position", pso.trace[k].position},
                     {"best_fitness", pso.trace[k].fitness}});
  }
  return {{"best_position", pso.best_position},
          {"best_fitness", pso.best_fitness},
          {"trace", trace}};
}

json retention_json(const Retention& r) {
  return {{"value", r.value}, {"degenerate", r.degenerate}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void expect_format(const json& j, const char* format) {
  if (!j.is_object() || !j.contains("format") || j["format"] != format) {
    fail(ErrorKind::Format, std::string("expected a ") + format + " document");
  }
}

}  // namespace

json scores_to_json(std::span<const double> scores) {
  return {{"format", "miff-scores"},
          {"version", 1},
          {"scores", std::vector<double>(scores.begin(), scores.end())}};
}

std::vector<double> scores_from_json(const json& j) {
  expect_format(j, "miff-scores");
  try {
    auto scores = j.at("scores").get<std::vector<double>>();
    for (double s : scores) {
      if (!std::isfinite(s) || s < 0.0) fail(ErrorKind::Format, "scores must be finite and >= 0");
    }
    return scores;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed scores document: ") + e.what());
  }
}

json segments_to_json(const SegmentStage& stage) {
  const auto& tree = stage.tree;
  json iterations = json::array();
  for (std::size_t k = 0; k < tree.iterations.size(); ++k) {
    const auto& it = tree.iterations[k];
    json segs = json::array();
    for (const auto& s : it.segments) segs.push_back(segment_json(s));
    iterations.push_back({{"iteration", k + 1},
                          {"threshold", it.threshold},
                          {"required", it.required},
                          {"semantic_frames", it.semantic_frames},
                          {"nonsemantic_frames", it.nonsemantic_frames},
                          {"semantic_speedup", it.solution.semantic},
                          {"nonsemantic_speedup", it.solution.nonsemantic},
                          {"objective", it.solution.objective},
                          {"residual", it.solution.residual},
                          {"segments", segs}});
  }
  json leaves = json::array();
  for (const auto& s : tree.leaves) leaves.push_back(segment_json(s));
  return {{"format", "miff-segments"},
          {"version", 1},
          {"stop_ratio", tree.stop_ratio},
          {"thresholds", tree.thresholds()},
          {"depth", tree.depth()},
          {"degenerate", tree.degenerate},
          {"stop_reason", tree.stop_reason},
          {"rejected_threshold", optional_number(tree.rejected_threshold)},
          {"iterations", iterations},
          {"leaves", leaves}};
}

std::vector<Segment> leaves_from_json(const json& j) {
  expect_format(j, "miff-segments");
  std::vector<Segment> out;
  try {
    for (const auto& s : j.at("leaves")) {
      Segment seg;
      seg.start = s.at("start").get<std::size_t>();
      seg.end = s.at("end").get<std::size_t>();
      const auto kind = s.at("kind").get<std::string>();
      if (kind == to_string(SegmentKind::Semantic)) {
        seg.kind = SegmentKind::Semantic;
      } else if (kind != to_string(SegmentKind::NonSemantic)) {
        fail(ErrorKind::Format, "unknown segment kind " + kind);
      }
      seg.level = s.at("level").get<int>();
      if (!s.at("speedup").is_null()) seg.speedup = s.at("speedup").get<double>();
      out.push_back(seg);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed segments document: ") + e.what());
  }
  std::size_t expect = 0;
  for (const auto& s : out) {
    if (s.start != expect || s.end <= s.start) {
      fail(ErrorKind::Format, "leaves must tile the video without gaps");
    }
    if (!s.speedup || !(*s.speedup >= 1.0)) {
      fail(ErrorKind::Format, "every leaf needs a speed-up >= 1");
    }
    expect = s.end;
  }
  if (out.empty()) fail(ErrorKind::Format, "segments document has no leaves");
  return out;
}

json selection_to_json(const SelectStage& stage, std::span<const Segment> leaves) {
  json segs = json::array();
  for (std::size_t k = 0; k < leaves.size() && k < stage.paths.size(); ++k) {
    json s = segment_json(leaves[k]);
    s["path_cost"] = stage.paths[k].cost;
    s["selected"] = stage.paths[k].frames.size();
    segs.push_back(s);
  }
  const auto& w = stage.weights;
  return {{"format", "miff-selection"},
          {"version", 1},
          {"weights",
           {{"instability", w.instability},
            {"velocity", w.velocity},
            {"appearance", w.appearance},
            {"semantic", w.semantic},
            {"epsilon", w.epsilon},
            {"max_skip", w.max_skip},
            {"border", w.border},
            {"cap_border", w.cap_border}}},
          {"frames", stage.selection},
          {"segments", segs}};
}

std::vector<std::size_t> selection_from_json(const json& j) {
  expect_format(j, "miff-selection");
  std::vector<std::size_t> frames;
  try {
    frames = j.at("frames").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed selection document: ") + e.what());
  }
  if (frames.empty()) fail(ErrorKind::Format, "selection is empty");
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (frames[k] <= frames[k - 1]) fail(ErrorKind::Format, "selection must be strictly increasing");
  }
  return frames;
}

json plan_to_json(const StabilizationPlan& plan) {
  json frames = json::array();
  for (const auto& f : plan.frames) {
    json stitched = json::array();
    for (std::size_t s = 0; s < f.stitched.size(); ++s) {
      stitched.push_back({{"frame", f.stitched[s]}, {"homography", matrix_json(f.stitch_transforms[s])}});
    }
    frames.push_back({{"slot", f.slot},
                      {"selected", f.selected},
                      {"source", f.source},
                      {"action", to_string(f.action)},
                      {"homography", matrix_json(f.transform)},
                      {"coverage", f.coverage},
                      {"master_pre", optional_index(f.master_pre)},
                      {"master_pos", optional_index(f.master_pos)},
                      {"delta", f.delta},
                      {"span", f.span},
                      {"weight", f.weight},
                      {"stitched", stitched},
                      {"unstabilized", f.unstabilized},
                      {"linear_fallback", f.linear_fallback}});
  }
  return {{"format", "miff-plan"},
          {"version", 1},
          {"width", plan.width},
          {"height", plan.height},
          {"crop", rect_json(plan.crop)},
          {"drop", rect_json(plan.drop)},
          {"segments", plan.segments},
          {"unstabilizable_segments", plan.unstabilizable_segments},
          {"masters", plan.masters},
          {"dropped_slots", plan.dropped_slots},
          {"frames", frames}};
}

json report_to_json(const Report& r) {
  json leaves = json::array();
  for (const auto& l : r.leaves) {
    json s = segment_json(l.leaf);
    s["selected"] = l.selected;
    s["achieved_speedup"] = l.selected ? json(l.achieved) : json(nullptr);
    s["path_cost"] = l.path_cost;
    leaves.push_back(s);
  }
  return {{"format", "miff-report"},
          {"version", 1},
          {"input_frames", r.input_length},
          {"output_frames", r.output_length},
          {"stabilized_frames", r.stabilized_length},
          {"required_speedup", r.required},
          {"achieved_speedup", r.achieved},
          {"speedup_deviation", std::abs(r.achieved - r.required)},
          {"retention", retention_json(r.retention)},
          {"uniform_retention", retention_json(r.uniform_retention)},
          {"instability",
           {{"stabilized", optional_number(r.instability_stabilized)},
            {"unstabilized", optional_number(r.instability_unstabilized)}}},
          {"stitched", r.stitched},
          {"replaced", r.replaced},
          {"unstabilizable_segments", r.unstabilizable_segments},
          {"segments", leaves}};
}

json pso_trace_to_json(const SegmentStage& segments, const SelectStage* select) {
  json speed = json::array();
  for (const auto& s : segments.searches) {
    json entry = {{"iteration", s.iteration},
                  {"lambda_spread", s.problem.lambda_spread},
                  {"lambda_semantic", s.problem.lambda_semantic},
                  {"semantic_speedup", s.solution.semantic},
                  {"nonsemantic_speedup", s.solution.nonsemantic}};
    entry["pso"] = s.pso ? trace_json(*s.pso) : json(nullptr);
    speed.push_back(entry);
  }
  json graph = nullptr;
  if (select && select->pso) {
    const auto& w = select->weights;
    graph = trace_json(*select->pso);
    graph["weights"] = {{"instability", w.instability},
                        {"velocity", w.velocity},
                        {"appearance", w.appearance},
                        {"semantic", w.semantic}};
  }
  return {{"format", "miff-pso-trace"}, {"version", 1}, {"speedup", speed}, {"graph", graph}};
}

json speedup_to_json(const SpeedupProblem& p, const SpeedupSolution& s) {
  return {{"semantic_frames", p.semantic_frames},
          {"nonsemantic_frames", p.nonsemantic_frames},
          {"required", p.required},
          {"lambda_spread", p.lambda_spread},
          {"lambda_semantic", p.lambda_semantic},
          {"max_speedup", p.max_rate()},
          {"semantic_speedup", s.semantic},
          {"nonsemantic_speedup", s.nonsemantic},
          {"objective", s.objective},
          {"residual", s.residual},
          {"achieved", s.achieved(p)}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Format, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::InvalidArgument, "failed writing " + path.string());
}

}  // namespace miff
