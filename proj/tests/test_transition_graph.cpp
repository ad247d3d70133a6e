#include <doctest.h>

#include <cmath>
#include <random>

#include "miff/error.hpp"
#include "miff/transition_graph.hpp"
#include "oracles.hpp"

using namespace miff;

namespace {

FrameFeatures frame(std::size_t index, Point2 foe, double magnitude = 1.0,
                    std::vector<double> hist = {0.25, 0.25, 0.25, 0.25}) {
  FrameFeatures f;
  f.frame_index = index;
  f.width = 40;
  f.height = 30;
  f.foe = foe;
  f.flow_mean_magnitude = magnitude;
  f.histogram = std::move(hist);
  return f;
}

FeatureStream random_stream(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> x(0, 40), y(0, 30), mag(0, 5);
  FeatureStream s;
  for (std::size_t i = 0; i < n; ++i) {
    s.frames.push_back(frame(i, {x(rng), y(rng)}, mag(rng), oracle::random_histogram(rng, 8)));
  }
  return s;
}

// Dyadic weights keep every path sum exact, so cost ties are genuine.
TransitionGraph random_graph(std::mt19937_64& rng, std::size_t frames, int max_skip, int border) {
  std::uniform_int_distribution<int> w(0, 32);
  TransitionGraph g(0, frames, max_skip, border, 1.0);
  for (std::size_t i = 0; i < frames; ++i) {
    for (int k = 1; g.has_edge(i, k); ++k) g.set_weight(i, k, w(rng) / 8.0);
  }
  return g;
}

}  // namespace

TEST_CASE("focus of expansion") {
  std::vector<FlowVector> radial;
  for (double x : {0.0, 50.0, 100.0, 170.0}) {
    for (double y : {10.0, 80.0, 140.0}) radial.push_back({{x, y}, {0.1 * (x - 30), 0.1 * (y - 40)}});
  }
  const auto e = estimate_foe(radial);
  REQUIRE(e);
  CHECK(std::abs(e->point.x - 30) < 1e-9);
  CHECK(std::abs(e->point.y - 40) < 1e-9);
  CHECK(e->residual < 1e-9);

  const std::vector<FlowVector> cross{{{-1, 0}, {1, 0}}, {{0, 5}, {0, -2}}};
  const auto c = estimate_foe(cross);
  REQUIRE(c);
  CHECK(std::abs(c->point.x) < 1e-12);
  CHECK(std::abs(c->point.y) < 1e-12);

  const std::vector<FlowVector> parallel{{{0, 0}, {1, 1}}, {{5, 0}, {2, 2}}, {{0, 9}, {3, 3}}};
  CHECK_FALSE(estimate_foe(parallel).has_value());

  // Pure translation falls back to the center offset by the mean displacement.
  FrameFeatures f = frame(0, {0, 0});
  f.foe.reset();
  f.flow = parallel;
  const auto p = resolve_foe(f);
  CHECK(p.x == doctest::Approx(22.0));
  CHECK(p.y == doctest::Approx(17.0));

  f.flow.clear();
  try {
    resolve_foe(f);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::FeatureMissing);
  }
}

TEST_CASE("instability cost") {
  FeatureStream s;
  for (std::size_t i = 0; i < 5; ++i) s.frames.push_back(frame(i, {20, 15}));
  CHECK(instability_cost(s, 0, 4) == 0.0);
  s.frames[0].foe = Point2{0, 0};
  CHECK(instability_cost(s, 0, 1) == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 5; ++i) s.frames[i].foe = i % 2 ? Point2{40, 30} : Point2{20, 15};
  CHECK(instability_cost(s, 0, 4) == doctest::Approx(0.5));
  CHECK_THROWS_AS(instability_cost(s, 3, 3), Error);
  CHECK_THROWS_AS(instability_cost(s, 0, 5), Error);
}

TEST_CASE("velocity cost") {
  FeatureStream s;
  for (std::size_t i = 0; i < 10; ++i) s.frames.push_back(frame(i, {20, 15}, 2.0));
  // Target m F = 2 * 3; three consecutive frames accumulate 6.
  CHECK(velocity_cost(s, 0, 3, 2.0, 3.0) == 0.0);
  CHECK(velocity_cost(s, 0, 6, 2.0, 3.0) == doctest::Approx(1.0));
  CHECK(velocity_cost(s, 0, 6, 0.0, 3.0) == 0.0);
}

TEST_CASE("appearance cost") {
  const std::vector<double> a{0.5, 0.5, 0.0}, b{0.0, 0.5, 0.5};
  CHECK(appearance_cost(a, a) == 0.0);
  CHECK(appearance_cost(a, b) == doctest::Approx(0.5));
  for (std::size_t bins : {2, 5, 16, 256}) {
    std::vector<double> lo(bins, 0.0), hi(bins, 0.0);
    lo.front() = 1.0;
    hi.back() = 1.0;
    CHECK(appearance_cost(lo, hi) == doctest::Approx(1.0));
  }
  const std::vector<double> short_hist{1.0};
  CHECK_THROWS_AS(appearance_cost(a, short_hist), Error);
}

TEST_CASE("appearance cost is a transport distance") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 300; ++i) {
    const auto a = oracle::random_histogram(rng, 16);
    const auto b = oracle::random_histogram(rng, 16);
    const auto c = oracle::random_histogram(rng, 16);
    CHECK(std::abs(appearance_cost(a, b) - oracle::emd_transport(a, b) / 15.0) < 1e-9);
    CHECK(std::abs(appearance_cost(a, b) - appearance_cost(b, a)) < 1e-12);
    CHECK(appearance_cost(a, c) <= appearance_cost(a, b) + appearance_cost(b, c) + 1e-9);
  }
}

TEST_CASE("semantic cost") {
  CHECK(semantic_cost(0, 0, 1) == 1.0);
  CHECK(semantic_cost(1, 1, 1) == doctest::Approx(1.0 / 3));
  CHECK(semantic_cost(0.5, 0, 1) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(semantic_cost(-1, 0, 1), Error);
  CHECK_THROWS_AS(semantic_cost(0, 0, 0), Error);
}

TEST_CASE("edge weight") {
  GraphWeights w;
  const TransitionCosts c{1, 2, 3, 4};
  CHECK(edge_weight(c, w, 0, 12, 5) == 30.0);
  CHECK(edge_weight(c, w, 3, 8, 5) == 10.0);
  CHECK(edge_weight(c, w, 3, 4, 5) == 10.0);
  w.semantic = 0;
  const TransitionCosts d{1, 2, 3, 400};
  CHECK(edge_weight(c, w, 0, 1, 5) == edge_weight(d, w, 0, 1, 5));

  // Monotone in every cost term.
  w = GraphWeights{};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const TransitionCosts base{u(rng), u(rng), u(rng), u(rng)};
    const double w0 = edge_weight(base, w, 0, 7, 3);
    for (int term = 0; term < 4; ++term) {
      auto more = base;
      (term == 0 ? more.instability : term == 1 ? more.velocity : term == 2 ? more.appearance
                                                                            : more.semantic) += 0.1;
      CHECK(edge_weight(more, w, 0, 7, 3) >= w0);
    }
  }
}

TEST_CASE("graph weights validation") {
  GraphWeights w;
  CHECK_NOTHROW(w.validate());
  w.border = 101;
  CHECK_THROWS_AS(w.validate(), Error);
  w = GraphWeights{};
  w.velocity = -1;
  CHECK_THROWS_AS(w.validate(), Error);
  w = GraphWeights{};
  w.epsilon = 0;
  CHECK_THROWS_AS(w.validate(), Error);
}

TEST_CASE("graph structure") {
  const TransitionGraph g(0, 5, 2, 1, 1.0);
  CHECK(g.edge_count() == 7);
  CHECK(g.has_edge(3, 1));
  CHECK_FALSE(g.has_edge(3, 2));
  CHECK_FALSE(g.has_edge(0, 3));

  const TransitionGraph wide(10, 4, 8, 8, 2.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(wide.linked_to_source(i));
    CHECK(wide.linked_to_sink(i));
  }
}

TEST_CASE("build_graph over a stream") {
  std::mt19937_64 rng(12);
  const auto s = random_stream(rng, 60);
  std::vector<double> scores(60);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : scores) v = u(rng);
  const CostContext ctx(s, scores);
  GraphWeights w;
  w.max_skip = 6;
  w.border = 3;
  const Segment seg{10, 40, SegmentKind::NonSemantic, 0, 4.0};
  const auto g = build_graph(ctx, seg, w);
  CHECK(g.first_frame() == 10);
  CHECK(g.frames() == 30);
  for (std::size_t i = 0; i < g.frames(); ++i) {
    for (int k = 1; g.has_edge(i, k); ++k) {
      CHECK(std::isfinite(g.weight(i, k)));
      CHECK(g.weight(i, k) >= 0.0);
      // Independent evaluation of the edge from the per-term functions.
      const std::size_t a = 10 + i, b = a + static_cast<std::size_t>(k);
      const double expected =
          (instability_cost(s, a, b) + velocity_cost(s, a, b, ctx.video_mean_magnitude(), 4.0) +
           appearance_cost(s.frames[a].histogram, s.frames[b].histogram) +
           semantic_cost(scores[a], scores[b], 1.0)) *
          std::ceil(k / 4.0);
      CHECK(g.weight(i, k) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  const auto path = shortest_path(g);
  CHECK(path.frames.front() < 13);
  CHECK(path.frames.back() >= 37);
}

TEST_CASE("shortest path examples") {
  TransitionGraph g(0, 3, 2, 1, 1.0);
  g.set_weight(0, 1, 1);
  g.set_weight(1, 1, 1);
  g.set_weight(0, 2, 5);
  const auto p = shortest_path(g);
  CHECK(p.frames == std::vector<std::size_t>{0, 1, 2});
  CHECK(p.cost == 2.0);

  const TransitionGraph single(17, 1, 5, 1, 1.0);
  CHECK(shortest_path(single).frames == std::vector<std::size_t>{17});

  // Equal costs with the skip multiplier: skips of F are free relative to 1.
  TransitionGraph eq(0, 13, 4, 1, 3.0);
  for (std::size_t i = 0; i < 13; ++i) {
    for (int k = 1; eq.has_edge(i, k); ++k) eq.set_weight(i, k, std::ceil(k / 3.0));
  }
  const auto q = shortest_path(eq);
  CHECK(q.frames == std::vector<std::size_t>{0, 3, 6, 9, 12});
  const auto o = oracle::enumerate_paths(13, 4, 1, [&](std::size_t i, int k) { return eq.weight(i, k); });
  CHECK(q.cost == o.cost);
}

TEST_CASE("shortest path matches exhaustive enumeration") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> frames_d(1, 15), skip_d(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t frames = static_cast<std::size_t>(frames_d(rng));
    const int skip = skip_d(rng);
    std::uniform_int_distribution<int> border_d(1, skip);
    const int border = border_d(rng);
    const auto g = random_graph(rng, frames, skip, border);
    const auto got = shortest_path(g);
    const auto expected =
        oracle::enumerate_paths(frames, skip, border, [&](std::size_t i, int k) { return g.weight(i, k); });
    if (frames == 1) {
      CHECK(got.frames == std::vector<std::size_t>{0});
      continue;
    }
    CHECK(got.cost == expected.cost);
    CHECK(got.frames == expected.nodes);
  }
}

TEST_CASE("scaling every lambda keeps the path") {
  std::mt19937_64 rng(5);
  const auto s = random_stream(rng, 40);
  std::vector<double> scores(40);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : scores) v = u(rng);
  const CostContext ctx(s, scores);
  const Segment seg{0, 40, SegmentKind::Semantic, 1, 3.0};
  GraphWeights w;
  w.max_skip = 8;
  w.border = 4;
  w.instability = 0.75;
  w.velocity = 1.5;
  w.appearance = 2.0;
  w.semantic = 0.25;
  const auto base = shortest_path(build_graph(ctx, seg, w));
  for (double factor : {0.5, 2.0, 8.0}) {
    auto scaled = w;
    scaled.instability *= factor;
    scaled.velocity *= factor;
    scaled.appearance *= factor;
    scaled.semantic *= factor;
    CHECK(shortest_path(build_graph(ctx, seg, scaled)).frames == base.frames);
  }
}

TEST_CASE("cap_border limits the border to one output frame") {
  std::mt19937_64 rng(6);
  const auto s = random_stream(rng, 100);
  const std::vector<double> scores(100, 0.0);
  const CostContext ctx(s, scores);
  GraphWeights w;
  w.cap_border = true;
  const auto costs = compute_segment_costs(ctx, {0, 100, SegmentKind::NonSemantic, 0, 4.0},
                                           w.max_skip, w.epsilon);
  CHECK(weigh(costs, w).border() == 4);
  w.cap_border = false;
  CHECK(weigh(costs, w).border() == 30);
}

TEST_CASE("compose selection") {
  const std::vector<FramePath> one{{{0, 3, 7}, 1.0}};
  CHECK(compose_selection(one) == std::vector<std::size_t>{0, 3, 7});
  const std::vector<FramePath> two{{{0, 3, 7}, 1.0}, {{8, 12}, 1.0}};
  CHECK(compose_selection(two) == std::vector<std::size_t>{0, 3, 7, 8, 12});
  const std::vector<FramePath> overlap{{{0, 3, 7}, 1.0}, {{7, 12}, 1.0}};
  CHECK_THROWS_AS(compose_selection(overlap), Error);
}
