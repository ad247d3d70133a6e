#include <doctest.h>

#include <sstream>
#include <string>

#include "miff/error.hpp"
#include "miff/feature_io.hpp"
#include "miff/scenario.hpp"

using namespace miff;

namespace {

const char* kHeader = R"({"format":"miff-features","version":1,"fps":30})";

std::string frame_line(int index, const std::string& histogram = "[0.5,0.5]") {
  return R"({"frame_index":)" + std::to_string(index) +
         R"(,"width":64,"height":48,"detections":[],"keypoints":[[1,2.0,3.0]],"foe":null,)"
         R"("flow_mean_magnitude":1.5,"histogram":)" +
         histogram + "}";
}

ErrorKind kind_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_feature_stream(in);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Internal;
}

std::string message_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_feature_stream(in);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("well-formed two-frame stream") {
  std::istringstream in(std::string(kHeader) + "\n" + frame_line(0) + "\n" + frame_line(1) + "\n");
  const auto s = read_feature_stream(in);
  REQUIRE(s.size() == 2);
  CHECK(s.fps == 30.0);
  CHECK(s.frames[1].keypoints[0] == Keypoint{1, 2.0, 3.0});
  CHECK_FALSE(s.frames[0].foe.has_value());
  CHECK(s.frames[0].flow_mean_magnitude == 1.5);
}

TEST_CASE("gap in frame_index is reported with its line") {
  const std::string text = std::string(kHeader) + "\n" + frame_line(0) + "\n" + frame_line(2) + "\n";
  CHECK(kind_of(text) == ErrorKind::Format);
  const auto msg = message_of(text);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("frame record 2") != std::string::npos);
  CHECK(msg.find("gap") != std::string::npos);
}

TEST_CASE("duplicate frame_index") {
  const std::string text = std::string(kHeader) + "\n" + frame_line(0) + "\n" + frame_line(0) + "\n";
  CHECK(message_of(text).find("duplicate") != std::string::npos);
}

TEST_CASE("non-normalized histogram") {
  const std::string text =
      std::string(kHeader) + "\n" + frame_line(0) + "\n" + frame_line(1, "[0.5,0.4]") + "\n";
  CHECK(kind_of(text) == ErrorKind::Format);
  CHECK(message_of(text).find("normalized") != std::string::npos);
}

TEST_CASE("malformed input") {
  CHECK(kind_of("") == ErrorKind::Format);
  CHECK(kind_of("{\"format\":\"other\"}\n") == ErrorKind::Format);
  CHECK(kind_of(std::string(kHeader) + "\n{not json\n") == ErrorKind::Format);
  CHECK(kind_of(std::string(kHeader) + "\n" + frame_line(0) + "\n") == ErrorKind::Format);
  CHECK(kind_of(std::string(kHeader) + "\n{\"frame_index\":0}\n" + frame_line(1) + "\n") ==
        ErrorKind::Format);
}

TEST_CASE("save then load is the identity") {
  auto spec = scenario_preset("25p", 120, 5);
  spec.foe_from_flow = true;
  auto s = synthesize_scenario(spec).stream;
  s.frames[3].score = 0.25;
  s.frames[4].raster = "rasters/frame_000004.pgm";
  std::ostringstream out;
  write_feature_stream(out, s);
  std::istringstream in(out.str());
  const auto back = read_feature_stream(in);
  CHECK(back == s);

  std::ostringstream again;
  write_feature_stream(again, back);
  CHECK(again.str() == out.str());
}
