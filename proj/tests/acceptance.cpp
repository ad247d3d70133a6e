// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.
// Usage: acceptance <path to miff_cli> [work directory] [criterion key]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "miff/error.hpp"
#include "miff/homography.hpp"
#include "miff/metrics.hpp"
#include "miff/pipeline.hpp"
#include "miff/profile.hpp"
#include "miff/pso.hpp"
#include "miff/scenario.hpp"
#include "miff/speedup.hpp"
#include "miff/transition_graph.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace miff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

struct Run {
  std::string preset;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  Scenario scenario;
  PipelineResult result;
  double seconds = 0.0;
};

Run run_scenario(const std::string& preset, std::size_t length, std::uint64_t seed,
                 const PipelineConfig& config) {
  Run r;
  r.preset = preset;
  r.length = length;
  r.seed = seed;
  r.scenario = synthesize_scenario(scenario_preset(preset, length, seed));
  const auto t0 = std::chrono::steady_clock::now();
  r.result = run_pipeline(r.scenario.stream, config);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Input frames per selected frame inside [start, end).
double effective_rate(const std::vector<std::size_t>& selection, std::size_t start,
                      std::size_t end) {
  const auto n = std::count_if(selection.begin(), selection.end(),
                               [&](std::size_t f) { return f >= start && f < end; });
  return n == 0 ? INFINITY : static_cast<double>(end - start) / static_cast<double>(n);
}

// Frame-weighted mean of the assigned leaf rates over [start, end).
double assigned_rate(const SegmentTree& tree, std::size_t start, std::size_t end) {
  double sum = 0.0;
  std::size_t frames = 0;
  for (const auto& leaf : tree.leaves) {
    const std::size_t a = std::max(start, leaf.start), b = std::min(end, leaf.end);
    if (a >= b || !leaf.speedup) continue;
    sum += *leaf.speedup * static_cast<double>(b - a);
    frames += b - a;
  }
  return frames == 0 ? INFINITY : sum / static_cast<double>(frames);
}

Outcome speedup_accuracy(const std::vector<Run>& runs) {
  double total = 0.0, slowest = 0.0;
  for (const auto& r : runs) {
    total += std::abs(r.result.report.achieved - 10.0);
    slowest = std::max(slowest, r.seconds);
  }
  const double mean = total / static_cast<double>(runs.size());
  return {mean <= 0.5 && slowest < 60.0,
          std::to_string(runs.size()) + " scenarios, mean |achieved - 10| = " + fmt(mean) +
              ", slowest run " + fmt(slowest, 1) + " s"};
}

Outcome semantic_emphasis(const std::vector<Run>& runs) {
  bool pass = true;
  std::string detail;
  for (const auto& r : runs) {
    if (r.preset != "25p") continue;
    const auto& rep = r.result.report;
    const double ratio = rep.retention.value / rep.uniform_retention.value;
    bool rates_ok = !r.result.segments.tree.degenerate;
    for (const auto& leaf : r.result.segments.tree.leaves) {
      if (!leaf.speedup) {
        rates_ok = false;
        continue;
      }
      if (leaf.kind == SegmentKind::Semantic && !(*leaf.speedup < 10.0)) rates_ok = false;
      if (leaf.kind == SegmentKind::NonSemantic && !(*leaf.speedup >= 10.0)) rates_ok = false;
    }
    pass = pass && ratio >= 1.5 && rates_ok;
    detail += " seed " + std::to_string(r.seed) + ": " + fmt(rep.retention.value) + "/" +
              fmt(rep.uniform_retention.value) + " = " + fmt(ratio, 2) + "x" +
              (rates_ok ? "" : " (segment rates violated)") + ";";
  }
  return {pass, "retention vs uniform:" + detail};
}

Outcome multi_importance(const PipelineConfig& config) {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = run_scenario("two-level", 3000, seed, config);
    const auto& blocks = r.scenario.spec.semantic_blocks;
    const auto& low = blocks[0];   // intensity 1
    const auto& high = blocks[1];  // intensity 2
    const auto& sel = r.result.select.selection;
    const double eff_low = effective_rate(sel, low.start, low.end);
    const double eff_high = effective_rate(sel, high.start, high.end);
    const double as_low = assigned_rate(r.result.segments.tree, low.start, low.end);
    const double as_high = assigned_rate(r.result.segments.tree, high.start, high.end);
    pass = pass && eff_high < eff_low && as_high < as_low;
    detail += " seed " + std::to_string(seed) + ": assigned " + fmt(as_high, 2) + " < " +
              fmt(as_low, 2) + ", effective " + fmt(eff_high, 2) + " < " + fmt(eff_low, 2) + ";";
  }
  return {pass, "intensity 2 vs intensity 1:" + detail};
}

// Real segment graphs, weights snapped to multiples of 2^-20 so that every
// path sum is exact and the comparison can be exact too.
Outcome path_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> frames_d(2, 15), skip_d(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0), xy(0.0, 64.0), mag(0.0, 4.0);
  int agree = 0;
  const int cases = 200;
  for (int c = 0; c < cases; ++c) {
    const auto n = static_cast<std::size_t>(frames_d(rng));
    FeatureStream s;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      FrameFeatures f;
      f.frame_index = i;
      f.width = 64;
      f.height = 48;
      f.histogram = oracle::random_histogram(rng, 8);
      f.foe = Point2{xy(rng), xy(rng) * 0.75};
      f.flow_mean_magnitude = mag(rng);
      s.frames.push_back(std::move(f));
      scores[i] = u(rng) < 0.5 ? 0.0 : u(rng);
    }
    const CostContext ctx(s, scores);
    GraphWeights w;
    w.max_skip = skip_d(rng);
    std::uniform_int_distribution<int> border_d(1, w.max_skip);
    w.border = border_d(rng);
    w.instability = u(rng) * 4;
    w.velocity = u(rng) * 4;
    w.appearance = u(rng) * 4;
    w.semantic = u(rng) * 4;
    const Segment seg{0, n, SegmentKind::NonSemantic, 0, 1.0 + std::floor(u(rng) * 6)};
    auto g = build_graph(ctx, seg, w);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 1; g.has_edge(i, k); ++k) {
        g.set_weight(i, k, std::ldexp(std::round(std::ldexp(g.weight(i, k), 20)), -20));
      }
    }
    const auto got = shortest_path(g);
    const auto expected = oracle::enumerate_paths(
        n, w.max_skip, w.border, [&](std::size_t i, int k) { return g.weight(i, k); });
    if (got.cost == expected.cost && got.frames == expected.nodes) ++agree;
  }
  return {agree == cases, std::to_string(agree) + "/" + std::to_string(cases) +
                              " segments match exhaustive enumeration (cost and frames)"};
}

Outcome speedup_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> frames(0, 10000), fd_d(2, 20), extra(0, 80);
  std::uniform_real_distribution<double> lam(0.0, 5.0);
  int agree = 0, checked = 0;
  while (checked < 100) {
    SpeedupProblem p;
    p.semantic_frames = static_cast<std::size_t>(frames(rng));
    p.nonsemantic_frames = static_cast<std::size_t>(frames(rng));
    if (p.semantic_frames + p.nonsemantic_frames == 0) continue;
    p.required = fd_d(rng);
    p.lambda_spread = lam(rng);
    p.lambda_semantic = lam(rng);
    const int fmax = static_cast<int>(p.required) + extra(rng);
    p.max_speedup = fmax;
    const auto expected = oracle::speedups(p.semantic_frames, p.nonsemantic_frames, p.required,
                                           p.lambda_spread, p.lambda_semantic, fmax);
    if (!expected) continue;
    ++checked;
    const auto s = solve_speedups(p);
    const bool r1 = s.semantic <= p.required;
    const bool r2 = s.nonsemantic >= p.required;
    const bool r3 = s.semantic >= std::ceil(p.semantic_fraction() * p.required - 1e-9);
    if (s.semantic == expected->semantic && s.nonsemantic == expected->nonsemantic &&
        s.objective == expected->objective && r1 && r2 && r3) {
      ++agree;
    }
  }
  return {agree == 100, std::to_string(agree) + "/100 problems match enumeration with r1-r3"};
}

Outcome otsu_oracle() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> count(0, 1000), zero(0, 3);
  int agree = 0;
  for (int c = 0; c < 100; ++c) {
    std::vector<std::int64_t> counts(256);
    for (auto& v : counts) v = zero(rng) == 0 ? 0 : count(rng);
    const std::vector<double> hist(counts.begin(), counts.end());
    if (otsu_split(hist) == oracle::otsu(counts)) ++agree;
  }
  return {agree == 100, std::to_string(agree) + "/100 histograms give the same split bin"};
}

Outcome pso_quality() {
  const PipelineConfig config;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> frames(100, 10000);
  bool pass = true;
  int at_or_below = 0;
  for (int c = 0; c < 10; ++c) {
    SpeedupProblem p;
    p.semantic_frames = static_cast<std::size_t>(frames(rng));
    p.nonsemantic_frames = static_cast<std::size_t>(frames(rng));
    p.required = 10;
    const auto search = search_speedups(p, config, static_cast<std::uint64_t>(c));
    const auto& r = *search.pso;
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      if (r.trace[i].fitness > r.trace[i - 1].fitness) pass = false;
    }
    const double penalty = 1e3 * config.speedup_pso.make(2, 0).max_width();
    double grid = INFINITY;
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 50; ++j) {
        const double x[2] = {10.0 * i / 49, 10.0 * j / 49};
        grid = std::min(grid, fitness_lambda(x, p, penalty));
      }
    }
    if (r.best_fitness <= grid) ++at_or_below;
  }
  return {pass && at_or_below == 10,
          std::to_string(at_or_below) + "/10 instances at or below the 50x50 grid" +
              (pass ? ", traces non-increasing" : ", a trace increased")};
}

Outcome geometry() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> x(0, 640), y(0, 480);
  int recovered = 0, roots = 0;
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const Eigen::Matrix3d h = oracle::random_homography(rng);
    std::vector<PointPair> pairs;
    for (int i = 0; i < 70; ++i) {
      const double px = x(rng), py = y(rng);
      const auto q = oracle::apply(h, px, py);
      pairs.push_back({{px, py}, {q.x(), q.y()}});
    }
    for (int i = 0; i < 30; ++i) pairs.push_back({{x(rng), y(rng)}, {x(rng), y(rng)}});
    std::shuffle(pairs.begin(), pairs.end(), rng);
    RansacConfig cfg;
    cfg.iterations = 500;
    cfg.inlier_threshold = 1.0;
    cfg.seed = static_cast<std::uint64_t>(c);
    const auto fit = ransac_homography(pairs, cfg);
    const double err = (fit.model.matrix() - oracle::normalized(h)).norm();
    worst = std::max(worst, err);
    if (err <= 1e-6) ++recovered;
  }
  bool endpoints = true;
  double worst_root = 0.0;
  for (int c = 0; c < 100; ++c) {
    const Homography h(oracle::random_homography(rng));
    const auto half = fractional_power(h, 0.5);
    const double err = ((half * half).matrix() - h.matrix()).norm();
    worst_root = std::max(worst_root, err);
    if (err <= 1e-6) ++roots;
    endpoints = endpoints && fractional_power(h, 0.0).matrix() == Eigen::Matrix3d::Identity() &&
                fractional_power(h, 1.0).matrix() == h.matrix();
  }
  std::ostringstream worst_s, root_s;
  worst_s << worst;
  root_s << worst_root;
  return {recovered == 100 && roots == 100 && endpoints,
          "RANSAC " + std::to_string(recovered) + "/100 (worst " + worst_s.str() +
              "), square roots " + std::to_string(roots) + "/100 (worst " + root_s.str() +
              "), exact endpoints " + (endpoints ? "yes" : "no")};
}

Outcome instability(const PipelineConfig& base) {
  const std::vector<GrayImage> constant(100, GrayImage(64, 64, 77));
  const double flat = instability_index(constant, {}, 30.0);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(128.0, 10.0);
  std::vector<GrayImage> noisy;
  for (int k = 0; k < 100; ++k) {
    GrayImage img(64, 64, 0);
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(std::clamp(std::lround(g(rng)), 0L, 255L));
    }
    noisy.push_back(std::move(img));
  }
  const double sigma = instability_index(noisy, {}, 30.0);

  // No intended camera motion, only shake.
  auto spec = scenario_preset("static", 900, 3);
  spec.motion.shake_px = 4.0;
  spec.motion.shake_rotation = 0.004;
  const auto sc = synthesize_scenario(spec);
  const RasterSource rasters = [&](std::size_t k) { return render_frame(sc, k); };
  auto config = base;
  config.run_stabilizer = true;
  const auto res = run_pipeline(sc.stream, config, &rasters);
  const double stab = res.report.instability_stabilized.value_or(INFINITY);
  const double raw = res.report.instability_unstabilized.value_or(-INFINITY);

  return {flat == 0.0 && std::abs(sigma - 10.0) <= 1.0 && stab <= raw,
          "constant " + fmt(flat) + ", noise sigma 10 -> " + fmt(sigma) + ", shaky scenario " +
              fmt(stab) + " stabilized vs " + fmt(raw) + " unstabilized"};
}

Outcome emd() {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> bins_d(2, 64);
  int agree = 0, symmetric = 0, triangle = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto bins = static_cast<std::size_t>(bins_d(rng));
    const auto a = oracle::random_histogram(rng, bins);
    const auto b = oracle::random_histogram(rng, bins);
    const auto m = oracle::random_histogram(rng, bins);
    const double norm = static_cast<double>(bins - 1);
    // Analytic 1-D form: L1 distance between the two CDFs.
    double ca = 0.0, cb = 0.0, analytic = 0.0;
    for (std::size_t i = 0; i + 1 < bins; ++i) {
      ca += a[i];
      cb += b[i];
      analytic += std::abs(ca - cb);
    }
    analytic /= norm;
    const double got = appearance_cost(a, b);
    const double transport = oracle::emd_transport(a, b) / norm;
    if (std::abs(got - analytic) <= 1e-9 && std::abs(got - transport) <= 1e-9) ++agree;
    if (got == appearance_cost(b, a)) ++symmetric;
    if (got <= appearance_cost(a, m) + appearance_cost(m, b) + 1e-12) ++triangle;
  }
  return {agree == 1000 && symmetric == 1000 && triangle == 1000,
          std::to_string(agree) + "/1000 match the CDF form and explicit transport, symmetric " +
              std::to_string(symmetric) + "/1000, triangle " + std::to_string(triangle) + "/1000"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no CLI path given"};
  const fs::path a = work / "run_a", b = work / "run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  for (const auto& dir : {a, b}) {
    const std::string cmd = "\"" + cli + "\" run --preset 25p --length 3000 --seed 7 --out \"" +
                            dir.string() + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, "run failed: " + cmd};
  }
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
      return {false, rel.string() + " differs"};
    }
    ++files;
  }
  std::size_t files_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(b)) files_b += entry.is_regular_file();
  return {files > 0 && files == files_b,
          std::to_string(files) + " output files byte-identical across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "miff_acceptance";
  const std::string only = argc > 3 ? argv[3] : "";
  fs::create_directories(work);

  int failed = 0, ran = 0;
  auto report = [&](const std::string& key, const std::string& name,
                    const std::function<Outcome()>& check) {
    if (!only.empty() && only != key) return;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  };

  PipelineConfig fast;
  fast.run_stabilizer = false;

  // Density 0-75 %, L = 3,000-10,000, F_d = 10. Only the 25p runs feed the
  // emphasis criterion.
  auto scenarios = [&](bool only_25p) {
    std::vector<Run> runs;
    const char* presets[4] = {"0p", "25p", "50p", "75p"};
    for (std::size_t i = 0; i < 20; ++i) {
      if (only_25p && i % 4 != 1) continue;
      const std::size_t length = 3000 + (7000 * i) / 19;
      runs.push_back(run_scenario(presets[i % 4], length, 100 + i, fast));
    }
    return runs;
  };

  report("speedup-accuracy", "speed-up accuracy", [&] { return speedup_accuracy(scenarios(false)); });
  report("semantic-emphasis", "semantic emphasis", [&] { return semantic_emphasis(scenarios(true)); });
  report("multi-importance", "multi-importance ordering", [&] { return multi_importance(fast); });
  report("oracle-paths", "oracle equivalence: paths", path_oracle);
  report("oracle-speedups", "oracle equivalence: speed-ups", speedup_oracle);
  report("oracle-otsu", "oracle equivalence: otsu", otsu_oracle);
  report("pso-quality", "pso quality", pso_quality);
  report("geometry", "geometry", geometry);
  report("instability", "instability index", [&] { return instability(fast); });
  report("emd", "emd", emd);
  report("determinism", "determinism", [&] { return determinism(cli, work); });

  if (ran == 0) {
    std::cerr << "unknown criterion '" << only << "'" << std::endl;
    return 2;
  }
  if (only.empty()) {
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
