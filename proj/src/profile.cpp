#include "miff/profile.hpp"

#include <algorithm>
#include <cmath>

#include "miff/error.hpp"

namespace miff {

const char* to_string(SegmentKind kind) {
  return kind == SegmentKind::Semantic ? "semantic" : "non-semantic";
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorKind::InvalidArgument, "gaussian_kernel: sigma must be positive");
  }
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (auto& v : kernel) v /= sum;
  return kernel;
}

std::vector<double> smooth_profile(std::span<const double> raw, double fps,
                                   double required) {
  if (raw.empty()) fail(ErrorKind::InvalidArgument, "smooth_profile: empty profile");
  if (!(fps > 0.0)) fail(ErrorKind::InvalidArgument, "smooth_profile: fps must be positive");
  if (!(required >= 1.0)) {
    fail(ErrorKind::InvalidArgument, "smooth_profile: required speed-up must be >= 1");
  }
  const auto kernel = gaussian_kernel(required / 2.0 * fps);
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
  auto reflect = [n](std::ptrdiff_t i) {
    std::ptrdiff_t m = i % (2 * n);
    if (m < 0) m += 2 * n;
    return m < n ? m : 2 * n - 1 - m;
  };
  std::vector<double> out(raw.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
      acc += kernel[static_cast<std::size_t>(k + radius)] * raw[static_cast<std::size_t>(reflect(i + k))];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::optional<std::size_t> otsu_split(std::span<const double> histogram) {
  const std::size_t bins = histogram.size();
  if (bins < 2) return std::nullopt;
  double total = 0.0, sum = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    total += histogram[b];
    sum += static_cast<double>(b) * histogram[b];
  }
  if (!(total > 0.0)) return std::nullopt;

  std::optional<std::size_t> best;
  double best_var = 0.0;
  double w0 = 0.0, s0 = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    w0 += histogram[k - 1];
    s0 += static_cast<double>(k - 1) * histogram[k - 1];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = s0 / w0;
    const double mu1 = (sum - s0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best = k;
    }
  }
  return best;
}

std::optional<OtsuResult> otsu_threshold(std::span<const double> scores, std::size_t bins) {
  if (bins < 2) fail(ErrorKind::InvalidArgument, "otsu_threshold: need at least 2 bins");
  if (scores.empty()) return std::nullopt;
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    fail(ErrorKind::InvalidArgument, "otsu_threshold: non-finite score");
  }
  if (!(hi > lo)) return std::nullopt;
  const double width = (hi - lo) / static_cast<double>(bins);

  OtsuResult result;
  result.histogram.assign(bins, 0.0);
  for (double s : scores) {
    auto b = static_cast<std::size_t>((s - lo) / width);
    result.histogram[std::min(b, bins - 1)] += 1.0;
  }
  const auto split = otsu_split(result.histogram);
  if (!split) return std::nullopt;
  result.split = *split;
  // Every edge inside the run of empty bins starting at the split yields the
  // same partition; the threshold sits in the middle of that run.
  std::size_t last = *split;
  while (last + 1 < bins && result.histogram[last] == 0.0) ++last;
  result.threshold = lo + 0.5 * static_cast<double>(*split + last) * width;
  return result;
}

std::vector<Segment> extract_segments(std::span<const double> profile,
                                      double threshold, double fps,
                                      double required) {
  if (!std::isfinite(threshold)) {
    fail(ErrorKind::InvalidArgument, "extract_segments: threshold must be finite");
  }
  if (!(fps > 0.0) || !(required >= 1.0)) {
    fail(ErrorKind::InvalidArgument, "extract_segments: invalid fps or speed-up");
  }
  const std::size_t n = profile.size();
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < n;) {
    if (profile[i] > threshold) {
      std::size_t j = i;
      while (j < n && profile[j] > threshold) ++j;
      runs.emplace_back(i, j);
      i = j;
    } else {
      ++i;
    }
  }

  const double max_gap = 5.0 * fps;
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& run : runs) {
    if (!merged.empty() && static_cast<double>(run.first - merged.back().second) <= max_gap) {
      merged.back().second = run.second;
    } else {
      merged.push_back(run);
    }
  }

  const double min_length = required * fps;
  std::vector<Segment> out;
  std::size_t cursor = 0;
  for (const auto& [s, e] : merged) {
    if (static_cast<double>(e - s) < min_length) continue;
    if (s > cursor) out.push_back({cursor, s, SegmentKind::NonSemantic, 0, std::nullopt});
    out.push_back({s, e, SegmentKind::Semantic, 1, std::nullopt});
    cursor = e;
  }
  if (cursor < n) out.push_back({cursor, n, SegmentKind::NonSemantic, 0, std::nullopt});
  return out;
}

std::vector<double> SegmentTree::thresholds() const {
  std::vector<double> out;
  for (const auto& it : iterations) out.push_back(it.threshold);
  return out;
}

int SegmentTree::depth() const {
  int d = 0;
  for (const auto& leaf : leaves) d = std::max(d, leaf.level);
  return d;
}

namespace {

// Splits a range of the concatenated (active-only) profile into runs that are
// contiguous in the original video.
void map_back(const std::vector<std::size_t>& active, const Segment& seg,
              std::vector<Segment>& out) {
  std::size_t a = seg.start;
  while (a < seg.end) {
    std::size_t b = a + 1;
    while (b < seg.end && active[b] == active[b - 1] + 1) ++b;
    Segment s = seg;
    s.start = active[a];
    s.end = active[b - 1] + 1;
    out.push_back(s);
    a = b;
  }
}

}  // namespace

SegmentTree refine_multi_importance(std::span<const double> raw_scores, double fps,
                                    double required, const RefineConfig& config,
                                    const SpeedupSolver& solver) {
  if (!(config.stop_ratio > 0.0 && config.stop_ratio < 1.0)) {
    fail(ErrorKind::InvalidArgument, "stop ratio t must lie in (0, 1)");
  }
  if (raw_scores.empty()) fail(ErrorKind::InvalidArgument, "empty score profile");
  const std::size_t n = raw_scores.size();

  SegmentTree tree;
  tree.stop_ratio = config.stop_ratio;
  std::vector<int> level(n, 0);
  std::vector<double> rate(n, required);

  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  double current = required;
  // Semantic levels never play at or above the user's rate.
  const int sub_cap = static_cast<int>(std::ceil(required - 1e-9)) - 1;

  for (int iter = 1;; ++iter) {
    if (iter > config.max_levels) {
      tree.stop_reason = "level cap reached";
      break;
    }
    if (active.size() < 2) {
      tree.stop_reason = "too few frames left to split";
      break;
    }
    std::vector<double> sub(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) sub[a] = raw_scores[active[a]];
    const auto smoothed = smooth_profile(sub, fps, current);
    const auto otsu = otsu_threshold(smoothed, config.bins);
    if (!otsu) {
      tree.stop_reason = "degenerate profile";
      tree.degenerate = iter == 1;
      break;
    }
    if (!tree.iterations.empty() &&
        otsu->threshold < config.stop_ratio * tree.iterations.back().threshold) {
      tree.stop_reason = "threshold fell below t times the previous threshold";
      tree.rejected_threshold = otsu->threshold;
      break;
    }
    const auto segs = extract_segments(smoothed, otsu->threshold, fps, current);
    std::size_t semantic = 0;
    for (const auto& s : segs) {
      if (s.kind == SegmentKind::Semantic) semantic += s.length();
    }
    if (semantic == 0) {
      tree.stop_reason = "no semantic segment survived";
      tree.degenerate = iter == 1;
      break;
    }

    SpeedupProblem problem;
    problem.semantic_frames = semantic;
    problem.nonsemantic_frames = active.size() - semantic;
    problem.required = current;
    if (iter == 1) {
      problem.max_speedup = config.max_speedup;
    } else {
      if (sub_cap < static_cast<int>(std::ceil(current - 1e-9))) {
        tree.stop_reason = "no admissible rate below the required speed-up";
        break;
      }
      problem.max_speedup = sub_cap;
    }
    SpeedupSolution solution;
    if (iter == 1) {
      solution = solver(problem);
    } else {
      try {
        solution = solver(problem);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        tree.stop_reason = std::string("sub-problem infeasible: ") + e.what();
        break;
      }
      if (solution.semantic >= current) {
        tree.stop_reason = "no lower semantic rate found";
        break;
      }
    }

    RefineIteration record;
    record.threshold = otsu->threshold;
    record.required = current;
    record.semantic_frames = problem.semantic_frames;
    record.nonsemantic_frames = problem.nonsemantic_frames;
    record.solution = solution;
    std::vector<std::size_t> next;
    for (auto seg : segs) {
      const bool is_sem = seg.kind == SegmentKind::Semantic;
      seg.level = is_sem ? iter : iter - 1;
      seg.speedup = is_sem ? solution.semantic : solution.nonsemantic;
      for (std::size_t a = seg.start; a < seg.end; ++a) {
        level[active[a]] = seg.level;
        rate[active[a]] = *seg.speedup;
        if (is_sem) next.push_back(active[a]);
      }
      map_back(active, seg, record.segments);
    }
    tree.iterations.push_back(std::move(record));
    active = std::move(next);
    current = solution.semantic;
  }

  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && level[j] == level[i] && rate[j] == rate[i]) ++j;
    tree.leaves.push_back({i, j,
                           level[i] > 0 ? SegmentKind::Semantic : SegmentKind::NonSemantic,
                           level[i], rate[i]});
    i = j;
  }
  return tree;
}

}  // namespace miff
