#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace miff {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Nearest-neighbour warp: output(p) = source(H^-1 p). Pixels mapping outside
// the source keep their current value in `target` and are left unmarked in
// `covered` (when given).
void warp_into(const GrayImage& source, const Eigen::Matrix3d& homography,
               GrayImage& target, std::vector<bool>* covered = nullptr);

GrayImage crop(const GrayImage& image, int x0, int y0, int width, int height);

}  // namespace miff
