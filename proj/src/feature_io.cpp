#include "miff/feature_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "miff/error.hpp"

namespace miff {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(std::size_t line, std::size_t record,
                             const std::string& what) {
  fail(ErrorKind::Format, "line " + std::to_string(line) + " (frame record " +
                              std::to_string(record) + "): " + what);
}

double as_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw std::invalid_argument(std::string("missing numeric key '") + key + "'");
  }
  return it->get<double>();
}

Point2 as_point(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw std::invalid_argument("point must be [x, y]");
  }
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

FrameFeatures parse_frame(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("frame line is not an object");
  FrameFeatures f;
  f.frame_index = j.at("frame_index").get<std::size_t>();
  f.width = j.at("width").get<int>();
  f.height = j.at("height").get<int>();
  for (const auto& d : j.at("detections")) {
    const auto& b = d.at("bbox");
    if (!b.is_array() || b.size() != 4) {
      throw std::invalid_argument("bbox must be [x, y, w, h]");
    }
    f.detections.push_back(Detection{
        {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
        as_number(d, "confidence"),
        d.at("class").get<std::string>()});
  }
  for (const auto& k : j.at("keypoints")) {
    if (!k.is_array() || k.size() != 3) {
      throw std::invalid_argument("keypoint must be [track_id, x, y]");
    }
    f.keypoints.push_back({k[0].get<std::int64_t>(), k[1].get<double>(), k[2].get<double>()});
  }
  if (const auto& foe = j.at("foe"); !foe.is_null()) f.foe = as_point(foe);
  if (const auto it = j.find("flow"); it != j.end()) {
    for (const auto& v : *it) {
      if (!v.is_array() || v.size() != 4) {
        throw std::invalid_argument("flow vector must be [x, y, dx, dy]");
      }
      f.flow.push_back({{v[0].get<double>(), v[1].get<double>()},
                        {v[2].get<double>(), v[3].get<double>()}});
    }
  }
  f.flow_mean_magnitude = as_number(j, "flow_mean_magnitude");
  f.histogram = j.at("histogram").get<std::vector<double>>();
  if (const auto it = j.find("raster"); it != j.end() && !it->is_null()) {
    f.raster = it->get<std::string>();
  }
  if (const auto it = j.find("score"); it != j.end() && !it->is_null()) {
    f.score = it->get<double>();
  }
  return f;
}

json frame_to_json(const FrameFeatures& f) {
  json dets = json::array();
  for (const auto& d : f.detections) {
    dets.push_back({{"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                    {"confidence", d.confidence},
                    {"class", d.class_label}});
  }
  json kps = json::array();
  for (const auto& k : f.keypoints) kps.push_back({k.track_id, k.x, k.y});
  json j = {{"frame_index", f.frame_index},
            {"width", f.width},
            {"height", f.height},
            {"detections", std::move(dets)},
            {"keypoints", std::move(kps)},
            {"foe", f.foe ? json{f.foe->x, f.foe->y} : json(nullptr)},
            {"flow_mean_magnitude", f.flow_mean_magnitude},
            {"histogram", f.histogram},
            {"raster", f.raster ? json(*f.raster) : json(nullptr)},
            {"score", f.score ? json(*f.score) : json(nullptr)}};
  if (!f.flow.empty()) {
    json flow = json::array();
    for (const auto& v : f.flow) {
      flow.push_back({v.position.x, v.position.y, v.displacement.x, v.displacement.y});
    }
    j["flow"] = std::move(flow);
  }
  return j;
}

}  // namespace

FeatureStream read_feature_stream(std::istream& in) {
  FeatureStream stream;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || j.value("format", "") != "miff-features") {
        fail(ErrorKind::Format, "line " + std::to_string(line) +
                                    ": missing miff-features header");
      }
      if (j.value("version", -1) != kFeatureStreamVersion) {
        fail(ErrorKind::Format, "unsupported feature stream version");
      }
      if (!j.contains("fps") || !j["fps"].is_number()) {
        fail(ErrorKind::Format, "header lacks numeric fps");
      }
      stream.fps = j["fps"].get<double>();
      if (!(stream.fps > 0.0)) fail(ErrorKind::Format, "fps must be positive");
      have_header = true;
      continue;
    }
    const std::size_t record = stream.frames.size() + 1;
    FrameFeatures frame;
    try {
      frame = parse_frame(j);
    } catch (const json::exception& e) {
      line_error(line, record, e.what());
    } catch (const std::invalid_argument& e) {
      line_error(line, record, e.what());
    }
    const std::size_t expected = stream.frames.size();
    if (frame.frame_index != expected) {
      line_error(line, record,
                 (frame.frame_index < expected ? "duplicate frame_index " : "gap before frame_index ") +
                     std::to_string(frame.frame_index) + " (expected " +
                     std::to_string(expected) + ")");
    }
    try {
      validate_frame(frame);
    } catch (const Error& e) {
      line_error(line, record, e.what());
    }
    stream.frames.push_back(std::move(frame));
  }
  if (!have_header) fail(ErrorKind::Format, "empty feature stream");
  validate_stream(stream);
  return stream;
}

FeatureStream load_feature_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Format, "cannot open " + path.string());
  return read_feature_stream(in);
}

void write_feature_stream(std::ostream& out, const FeatureStream& stream) {
  out << json{{"format", "miff-features"},
              {"version", kFeatureStreamVersion},
              {"fps", stream.fps}}
             .dump()
      << '\n';
  for (const auto& frame : stream.frames) out << frame_to_json(frame).dump() << '\n';
}

void save_feature_stream(const std::filesystem::path& path,
                         const FeatureStream& stream) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Format, "cannot write " + path.string());
  write_feature_stream(out, stream);
}

}  // namespace miff
