#include "miff/image.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/LU>

#include "miff/error.hpp"

namespace miff {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Format, "cannot open raster " + path.string());
  if (next_token(in) != "P5") fail(ErrorKind::Format, path.string() + ": not a P5 PGM");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    fail(ErrorKind::Format, path.string() + ": malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval != 255) {
    fail(ErrorKind::Format, path.string() + ": only 8-bit PGM rasters are supported");
  }
  GrayImage image(width, height);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    fail(ErrorKind::Format, path.string() + ": truncated PGM payload");
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Format, "cannot write raster " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

void warp_into(const GrayImage& source, const Eigen::Matrix3d& homography,
               GrayImage& target, std::vector<bool>* covered) {
  const Eigen::Matrix3d inv = homography.inverse();
  if (covered) covered->resize(target.pixels.size(), false);
  const Eigen::Vector3d step = inv.col(0);
  for (int y = 0; y < target.height; ++y) {
    Eigen::Vector3d p = inv * Eigen::Vector3d(0.5, y + 0.5, 1.0) - step;
    for (int x = 0; x < target.width; ++x) {
      p += step;
      if (std::abs(p.z()) < 1e-12) continue;
      const int sx = static_cast<int>(std::floor(p.x() / p.z()));
      const int sy = static_cast<int>(std::floor(p.y() / p.z()));
      if (sx < 0 || sy < 0 || sx >= source.width || sy >= source.height) continue;
      target.at(x, y) = source.at(sx, sy);
      if (covered) (*covered)[static_cast<std::size_t>(y) * target.width + x] = true;
    }
  }
}

GrayImage crop(const GrayImage& image, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width <= 0 || height <= 0 || x0 + width > image.width ||
      y0 + height > image.height) {
    fail(ErrorKind::InvalidArgument, "crop rectangle outside the image");
  }
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.at(x, y) = image.at(x0 + x, y0 + y);
  }
  return out;
}

}  // namespace miff
