#include "miff/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "miff/error.hpp"
#include "miff/pso.hpp"

namespace miff {

std::size_t InstabilityConfig::resolved_buffer(double fps) const {
  if (buffer_size != 0) return buffer_size;
  return static_cast<std::size_t>(std::max(2.0, std::ceil(fps / 2.0)));
}

InstabilityAccumulator::InstabilityAccumulator(std::size_t buffer_size, std::size_t stride)
    : buffer_size_(buffer_size), stride_(stride) {
  if (buffer_size_ < 2) {
    fail(ErrorKind::InvalidArgument, "instability buffer must hold at least 2 frames");
  }
  if (stride_ < 1) fail(ErrorKind::InvalidArgument, "instability stride must be >= 1");
  window_.resize(buffer_size_);
}

void InstabilityAccumulator::accumulate(const GrayImage& frame, double sign) {
  for (std::size_t p = 0; p < sum_.size(); ++p) {
    const double v = frame.pixels[p];
    sum_[p] += sign * v;
    sq_[p] += sign * v * v;
  }
}

void InstabilityAccumulator::push(const GrayImage& frame) {
  if (pushed_ == 0) {
    if (frame.pixels.empty()) fail(ErrorKind::InvalidArgument, "instability frames are empty");
    sum_.assign(frame.pixels.size(), 0.0);
    sq_.assign(frame.pixels.size(), 0.0);
  } else {
    const auto& first = window_[0];
    if (frame.width != first.width || frame.height != first.height) {
      fail(ErrorKind::InvalidArgument, "instability frames differ in size");
    }
  }
  // The frame leaving the ring is the one buffer_size_ frames back.
  auto& slot = window_[pushed_ % buffer_size_];
  if (pushed_ >= buffer_size_) accumulate(slot, -1.0);
  slot = frame;
  accumulate(slot, 1.0);
  ++pushed_;

  if (pushed_ == next_start_ + buffer_size_) {
    // Sums are exact in double for 8-bit data, so the running form matches a
    // direct per-buffer computation.
    const double nb = static_cast<double>(buffer_size_);
    double mean_std = 0.0;
    for (std::size_t p = 0; p < sum_.size(); ++p) {
      const double var = (sq_[p] - sum_[p] * sum_[p] / nb) / (nb - 1.0);
      mean_std += std::sqrt(std::max(0.0, var));
    }
    total_ += mean_std / static_cast<double>(sum_.size());
    ++buffers_;
    next_start_ += stride_;
  }
}

double InstabilityAccumulator::value() const {
  if (buffers_ == 0) {
    fail(ErrorKind::InvalidArgument, "instability needs at least as many frames as the buffer");
  }
  return total_ / static_cast<double>(buffers_);
}

double instability_index(std::span<const GrayImage> frames, const InstabilityConfig& config,
                         double fps) {
  InstabilityAccumulator acc(config.resolved_buffer(fps), config.stride);
  for (const auto& f : frames) acc.push(f);
  return acc.value();
}

Retention semantic_retention(std::span<const std::size_t> selection,
                             std::span<const double> scores, double required) {
  if (!(required >= 1.0)) fail(ErrorKind::InvalidArgument, "required speed-up must be >= 1");
  double kept = 0.0;
  for (auto f : selection) {
    if (f >= scores.size()) fail(ErrorKind::InvalidArgument, "selection index out of range");
    kept += scores[f];
  }
  const double best = top_score_sum(scores, required);
  if (!(best > 0.0)) return {1.0, true};
  return {kept / best, false};
}

double achieved_speedup(std::size_t input_length, std::size_t output_length) {
  if (output_length == 0) fail(ErrorKind::InvalidArgument, "achieved speed-up of an empty output");
  return static_cast<double>(input_length) / static_cast<double>(output_length);
}

}  // namespace miff
