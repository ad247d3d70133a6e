#include "miff/stabilizer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "miff/error.hpp"

namespace miff {

void StabilizerConfig::validate() const {
  if (segment_size < 2) fail(ErrorKind::InvalidArgument, "alpha must be >= 2");
  if (!(drop_fraction > 0.0 && drop_fraction < crop_fraction && crop_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, "need 0 < dp < cp < 1");
  }
  if (!(eta > 0.0)) fail(ErrorKind::InvalidArgument, "eta must be positive");
  if (!(sigma > 0.0)) fail(ErrorKind::InvalidArgument, "sigma must be positive");
  if (ransac.iterations < 1 || !(ransac.inlier_threshold > 0.0)) {
    fail(ErrorKind::InvalidArgument, "invalid RANSAC settings");
  }
}

const char* to_string(FrameAction action) {
  switch (action) {
    case FrameAction::Kept: return "kept";
    case FrameAction::Stitched: return "stitched";
    case FrameAction::Replaced: return "replaced";
  }
  return "kept";
}

std::optional<std::vector<PointPair>> correspondences(const FeatureStream& stream,
                                                      std::size_t a, std::size_t b) {
  const auto& fa = stream.frames.at(a);
  const auto& fb = stream.frames.at(b);
  std::unordered_map<std::int64_t, Point2> in_b;
  in_b.reserve(fb.keypoints.size());
  for (const auto& k : fb.keypoints) in_b.emplace(k.track_id, Point2{k.x, k.y});
  std::vector<PointPair> pairs;
  for (const auto& k : fa.keypoints) {
    if (auto it = in_b.find(k.track_id); it != in_b.end()) {
      pairs.push_back({{k.x, k.y}, it->second});
    }
  }
  if (pairs.size() < 4) return std::nullopt;
  return pairs;
}

namespace {

std::uint64_t pair_seed(std::uint64_t seed, std::size_t a, std::size_t b) {
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL) ^
                    (static_cast<std::uint64_t>(b) * 0xc2b2ae3d27d4eb4fULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

PairMatcher::PairMatcher(const FeatureStream& stream, RansacConfig config)
    : stream_(&stream), config_(config) {}

const std::optional<RansacResult>& PairMatcher::match(std::size_t a, std::size_t b) {
  const auto key = std::make_pair(a, b);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  std::optional<RansacResult> result;
  if (a == b) {
    result = RansacResult{Homography::identity(), {}};
  } else if (auto pairs = correspondences(*stream_, a, b)) {
    RansacConfig cfg = config_;
    cfg.seed = pair_seed(config_.seed, a, b);
    try {
      result = ransac_homography(*pairs, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoModel) throw;
    }
  }
  return cache_.emplace(key, std::move(result)).first->second;
}

std::size_t PairMatcher::inliers(std::size_t a, std::size_t b) {
  if (a == b) return 0;
  const auto& m = match(a, b);
  return m ? m->inliers.size() : 0;
}

std::optional<std::size_t> select_master(PairMatcher& matcher,
                                         std::span<const std::size_t> segment) {
  if (segment.empty()) return std::nullopt;
  const double middle = (static_cast<double>(segment.size()) - 1.0) / 2.0;
  std::optional<std::size_t> best;
  std::size_t best_total = 0;
  double best_offset = 0.0;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    std::size_t total = 0;
    for (std::size_t j = 0; j < segment.size(); ++j) {
      if (i != j) total += matcher.inliers(segment[i], segment[j]);
    }
    const double offset = std::abs(static_cast<double>(i) - middle);
    if (total == 0) continue;
    if (!best || total > best_total || (total == best_total && offset < best_offset)) {
      best = i;
      best_total = total;
      best_offset = offset;
    }
  }
  if (!best) return std::nullopt;
  return segment[*best];
}

double replacement_objective(const ReplacementCandidate& c, double eta, double sigma) {
  const double d = c.coverage - 1.0;
  const double g = std::exp(-d * d / (2.0 * sigma * sigma));
  return g * static_cast<double>(c.inliers_prev + c.inliers_next) * (eta + c.score);
}

std::optional<std::size_t> select_replacement_frame(
    std::span<const ReplacementCandidate> candidates, double eta, double sigma) {
  std::optional<std::size_t> best;
  double best_value = 0.0;
  std::size_t best_frame = 0;
  for (const auto& c : candidates) {
    const double v = replacement_objective(c, eta, sigma);
    if (!best || v > best_value || (v == best_value && c.frame < best_frame)) {
      best = c.frame;
      best_value = v;
      best_frame = c.frame;
    }
  }
  return best;
}

namespace {

constexpr double kCoverTolerance = 1e-9;

double safe_coverage(std::span<const Homography> hs, double w, double h, const Rect& r) {
  std::vector<Homography> valid;
  for (const auto& x : hs) {
    try {
      warp_frame(x, w, h);
      valid.push_back(x);
    } catch (const Error&) {
    }
  }
  if (valid.empty()) return 0.0;
  return coverage_fraction(valid, w, h, r);
}

class Stabilizer {
 public:
  Stabilizer(std::span<const std::size_t> selection, const FeatureStream& stream,
             std::span<const double> scores, const StabilizerConfig& config)
      : selection_(selection),
        stream_(stream),
        scores_(scores),
        config_(config),
        matcher_(stream, config.ransac) {}

  StabilizationPlan run() {
    const auto& first = stream_.frames.front();
    plan_.width = first.width;
    plan_.height = first.height;
    plan_.crop = centered_rect(first.width, first.height, config_.crop_fraction);
    plan_.drop = centered_rect(first.width, first.height, config_.drop_fraction);

    selected_.assign(stream_.size(), false);
    for (auto f : selection_) selected_.at(f) = true;
    consumed_ = selected_;

    const auto alpha = static_cast<std::size_t>(config_.segment_size);
    plan_.segments = (selection_.size() + alpha - 1) / alpha;
    segment_ok_.assign(plan_.segments, false);
    for (std::size_t s = 0; s < plan_.segments; ++s) {
      const std::size_t lo = s * alpha;
      const std::size_t hi = std::min(selection_.size(), lo + alpha);
      const auto master = select_master(matcher_, selection_.subspan(lo, hi - lo));
      if (!master) {
        ++plan_.unstabilizable_segments;
        continue;
      }
      segment_ok_[s] = true;
      plan_.masters.push_back(*master);
      const auto pos = static_cast<std::size_t>(
          std::find(selection_.begin() + static_cast<std::ptrdiff_t>(lo),
                    selection_.begin() + static_cast<std::ptrdiff_t>(hi), *master) -
          selection_.begin());
      master_slots_.push_back(pos);
    }

    for (std::size_t slot = 0; slot < selection_.size(); ++slot) plan_slot(slot);
    return std::move(plan_);
  }

 private:
  struct Interpolated {
    std::optional<Homography> transform;
    bool linear_fallback = false;
  };

  // Masters bracketing a (possibly fractional) slot position.
  std::pair<std::size_t, std::size_t> bracket(double position) const {
    std::size_t pre = master_slots_.size(), pos = master_slots_.size();
    for (std::size_t m = 0; m < master_slots_.size(); ++m) {
      if (static_cast<double>(master_slots_[m]) <= position) pre = m;
      if (static_cast<double>(master_slots_[m]) > position && pos == master_slots_.size()) pos = m;
    }
    if (pre == master_slots_.size()) pre = pos;
    if (pos == master_slots_.size()) pos = pre;
    return {pre, pos};
  }

  double weight_at(double position, std::size_t pre, std::size_t pos, double* delta,
                   double* span) const {
    const double d = std::abs(position - static_cast<double>(master_slots_[pre]));
    const double s = static_cast<double>(master_slots_[pos]) - static_cast<double>(master_slots_[pre]);
    *delta = d;
    *span = s;
    if (!(s > 0.0)) return 0.0;
    return std::clamp(d * (2.0 * config_.segment_size) / s, 0.0, 1.0);
  }

  Interpolated interpolate(std::size_t frame, std::size_t pre, std::size_t pos, double w) {
    Interpolated out;
    const auto& to_pre = matcher_.match(frame, selection_[master_slots_[pre]]);
    const auto& to_pos = matcher_.match(frame, selection_[master_slots_[pos]]);
    if (!to_pre || !to_pos) return out;
    auto power = [&](const Homography& h, double e) {
      try {
        return fractional_power(h, e);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::Degenerate) throw;
        out.linear_fallback = true;
        return linear_interpolation(h, e);
      }
    };
    try {
      out.transform = power(to_pre->model, 1.0 - w) * power(to_pos->model, w);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::InvalidArgument) throw;
      out.transform.reset();
    }
    return out;
  }

  // Dropped frames strictly between the neighbouring selected frames, nearest
  // in time first; with `unused_only` frames already consumed are skipped.
  std::vector<std::size_t> window(std::size_t slot, std::size_t around, bool unused_only) const {
    const std::ptrdiff_t lo = slot == 0 ? -1 : static_cast<std::ptrdiff_t>(selection_[slot - 1]);
    const std::ptrdiff_t hi = slot + 1 < selection_.size()
                                  ? static_cast<std::ptrdiff_t>(selection_[slot + 1])
                                  : static_cast<std::ptrdiff_t>(stream_.size());
    std::vector<std::size_t> out;
    for (std::ptrdiff_t f = lo + 1; f < hi; ++f) {
      const auto u = static_cast<std::size_t>(f);
      if (selected_[u] || (unused_only && consumed_[u])) continue;
      out.push_back(u);
    }
    std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      const auto da = a > around ? a - around : around - a;
      const auto db = b > around ? b - around : around - b;
      return da < db;
    });
    return out;
  }

  // Slot position of an unselected frame, interpolated between the
  // neighbouring selected frames.
  double fractional_slot(std::size_t slot, std::size_t frame) const {
    const std::size_t f = selection_[slot];
    const auto s = static_cast<double>(slot);
    if (frame > f && slot + 1 < selection_.size()) {
      return s + static_cast<double>(frame - f) / static_cast<double>(selection_[slot + 1] - f);
    }
    if (frame < f && slot > 0) {
      return s - static_cast<double>(f - frame) / static_cast<double>(f - selection_[slot - 1]);
    }
    return s;
  }

  void plan_slot(std::size_t slot) {
    PlannedFrame pf;
    pf.slot = slot;
    pf.selected = selection_[slot];
    pf.source = pf.selected;
    const auto alpha = static_cast<std::size_t>(config_.segment_size);
    const double w_img = plan_.width, h_img = plan_.height;

    if (!segment_ok_[slot / alpha] || master_slots_.empty()) {
      pf.unstabilized = true;
      pf.coverage = safe_coverage(std::span(&pf.transform, 1), w_img, h_img, plan_.crop);
      plan_.frames.push_back(std::move(pf));
      return;
    }

    const auto [pre, pos] = bracket(static_cast<double>(slot));
    pf.master_pre = selection_[master_slots_[pre]];
    pf.master_pos = selection_[master_slots_[pos]];
    pf.weight = weight_at(static_cast<double>(slot), pre, pos, &pf.delta, &pf.span);

    std::vector<Homography> transforms;
    if (auto h = interpolate(pf.selected, pre, pos, pf.weight); h.transform) {
      transforms.push_back(*h.transform);
      pf.linear_fallback = h.linear_fallback;
    } else {
      transforms.push_back(Homography::identity());
    }
    double coverage = safe_coverage(transforms, w_img, h_img, plan_.crop);
    // Stitching draws only unused frames; replacement may reuse any dropped
    // frame of the interval but tries each one at most once per slot.
    std::vector<std::size_t> tried;

    while (coverage < 1.0 - kCoverTolerance) {
      const bool drop_covered =
          safe_coverage(transforms, w_img, h_img, plan_.drop) >= 1.0 - kCoverTolerance;
      const auto unused = window(slot, pf.source, true);
      if (drop_covered && !unused.empty()) {
        const std::size_t d = unused.front();
        consumed_[d] = true;
        const auto h = interpolate(d, pre, pos, pf.weight);
        if (!h.transform) continue;
        transforms.push_back(*h.transform);
        pf.stitched.push_back(d);
        if (pf.action == FrameAction::Kept) pf.action = FrameAction::Stitched;
        coverage = safe_coverage(transforms, w_img, h_img, plan_.crop);
        continue;
      }
      std::vector<std::size_t> pool;
      for (auto c : window(slot, pf.source, false)) {
        if (std::find(tried.begin(), tried.end(), c) == tried.end()) pool.push_back(c);
      }
      if (pool.empty()) break;

      std::vector<ReplacementCandidate> candidates;
      std::vector<std::optional<Homography>> candidate_h;
      std::vector<double> candidate_w;
      for (auto c : pool) {
        const double position = fractional_slot(slot, c);
        const auto [cpre, cpos] = bracket(position);
        double delta = 0.0, span = 0.0;
        const double w = weight_at(position, cpre, cpos, &delta, &span);
        const auto h = interpolate(c, cpre, cpos, w);
        ReplacementCandidate rc;
        rc.frame = c;
        rc.coverage = h.transform ? safe_coverage(std::span(&*h.transform, 1), w_img, h_img,
                                                  plan_.crop)
                                  : 0.0;
        rc.inliers_prev = slot > 0 ? matcher_.inliers(c, selection_[slot - 1]) : 0;
        rc.inliers_next =
            slot + 1 < selection_.size() ? matcher_.inliers(c, selection_[slot + 1]) : 0;
        rc.score = scores_[c];
        candidates.push_back(rc);
        candidate_h.push_back(h.transform);
        candidate_w.push_back(w);
      }
      const auto chosen = select_replacement_frame(candidates, config_.eta, config_.sigma);
      const auto idx = static_cast<std::size_t>(
          std::find(pool.begin(), pool.end(), *chosen) - pool.begin());
      consumed_[*chosen] = true;
      tried.push_back(*chosen);
      if (!candidate_h[idx]) continue;
      pf.source = *chosen;
      pf.action = FrameAction::Replaced;
      pf.weight = candidate_w[idx];
      pf.stitched.clear();
      transforms.assign(1, *candidate_h[idx]);
      coverage = safe_coverage(transforms, w_img, h_img, plan_.crop);
    }

    if (coverage < 1.0 - kCoverTolerance) {
      plan_.dropped_slots.push_back(slot);
      return;
    }
    pf.transform = transforms.front();
    pf.stitch_transforms.assign(transforms.begin() + 1, transforms.end());
    pf.coverage = coverage;
    plan_.frames.push_back(std::move(pf));
  }

  std::span<const std::size_t> selection_;
  const FeatureStream& stream_;
  std::span<const double> scores_;
  const StabilizerConfig& config_;
  PairMatcher matcher_;
  StabilizationPlan plan_;
  std::vector<bool> selected_;
  std::vector<bool> consumed_;
  std::vector<bool> segment_ok_;
  std::vector<std::size_t> master_slots_;
};

}  // namespace

StabilizationPlan stabilize(std::span<const std::size_t> selection,
                            const FeatureStream& stream, std::span<const double> scores,
                            const StabilizerConfig& config) {
  config.validate();
  if (selection.empty()) fail(ErrorKind::InvalidArgument, "stabilize: empty selection");
  if (scores.size() != stream.size()) {
    fail(ErrorKind::InvalidArgument, "stabilize: one score per frame required");
  }
  for (std::size_t i = 0; i < selection.size(); ++i) {
    if (selection[i] >= stream.size() || (i > 0 && selection[i] <= selection[i - 1])) {
      fail(ErrorKind::InvalidArgument, "stabilize: selection must be strictly increasing frames");
    }
  }
  return Stabilizer(selection, stream, scores, config).run();
}

namespace {

struct IntRect {
  int x0, y0, w, h;
};

IntRect pixel_rect(const Rect& r) {
  const int x0 = static_cast<int>(std::ceil(r.x0));
  const int y0 = static_cast<int>(std::ceil(r.y0));
  const int x1 = static_cast<int>(std::floor(r.x1));
  const int y1 = static_cast<int>(std::floor(r.y1));
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

GrayImage render_planned_frame(const StabilizationPlan& plan, const PlannedFrame& frame,
                               const RasterSource& rasters) {
  const IntRect r = pixel_rect(plan.crop);
  GrayImage canvas(plan.width, plan.height, 0);
  for (std::size_t s = frame.stitched.size(); s-- > 0;) {
    warp_into(rasters(frame.stitched[s]), frame.stitch_transforms[s].matrix(), canvas);
  }
  warp_into(rasters(frame.source), frame.transform.matrix(), canvas);
  return crop(canvas, r.x0, r.y0, r.w, r.h);
}

GrayImage render_unstabilized_frame(const StabilizationPlan& plan, const PlannedFrame& frame,
                                    const RasterSource& rasters) {
  const IntRect r = pixel_rect(plan.crop);
  return crop(rasters(frame.selected), r.x0, r.y0, r.w, r.h);
}

std::vector<GrayImage> render_stabilized(const StabilizationPlan& plan,
                                         const RasterSource& rasters) {
  std::vector<GrayImage> out;
  out.reserve(plan.frames.size());
  for (const auto& pf : plan.frames) out.push_back(render_planned_frame(plan, pf, rasters));
  return out;
}

std::vector<GrayImage> render_unstabilized(const StabilizationPlan& plan,
                                           const RasterSource& rasters) {
  std::vector<GrayImage> out;
  out.reserve(plan.frames.size());
  for (const auto& pf : plan.frames) out.push_back(render_unstabilized_frame(plan, pf, rasters));
  return out;
}

}  // namespace miff
