#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "miff/image.hpp"

namespace miff {

struct InstabilityConfig {
  std::size_t buffer_size = 0;  // 0 means ceil(fps / 2)
  std::size_t stride = 1;

  std::size_t resolved_buffer(double fps) const;
};

// Streaming form of instability_index: frames are pushed in order and only
// the current buffer is retained.
class InstabilityAccumulator {
 public:
  InstabilityAccumulator(std::size_t buffer_size, std::size_t stride);

  void push(const GrayImage& frame);
  std::size_t buffers() const { return buffers_; }
  // Throws Error(InvalidArgument) when fewer frames than one buffer arrived.
  double value() const;

 private:
  void accumulate(const GrayImage& frame, double sign);

  std::size_t buffer_size_;
  std::size_t stride_;
  std::vector<GrayImage> window_;  // ring of the last buffer_size frames
  std::size_t pushed_ = 0;
  std::size_t next_start_ = 0;  // index of the first frame of the next buffer
  std::vector<double> sum_, sq_;
  double total_ = 0.0;
  std::size_t buffers_ = 0;
};

// Mean over sliding buffers of the per-pixel sample standard deviation,
// averaged over pixels.
double instability_index(std::span<const GrayImage> frames, const InstabilityConfig& config,
                         double fps = 30.0);

struct Retention {
  double value = 1.0;
  bool degenerate = false;  // no semantic content to retain
};

Retention semantic_retention(std::span<const std::size_t> selection,
                             std::span<const double> scores, double required);

double achieved_speedup(std::size_t input_length, std::size_t output_length);

}  // namespace miff
