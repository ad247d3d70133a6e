#pragma once

#include <filesystem>
#include <iosfwd>

#include "miff/features.hpp"

namespace miff {

inline constexpr int kFeatureStreamVersion = 1;

// JSON Lines: a header object {"format": "miff-features", "version": 1,
// "fps": ...} followed by one object per frame.
FeatureStream read_feature_stream(std::istream& in);
FeatureStream load_feature_stream(const std::filesystem::path& path);

void write_feature_stream(std::ostream& out, const FeatureStream& stream);
void save_feature_stream(const std::filesystem::path& path,
                         const FeatureStream& stream);

}  // namespace miff
