#include "locfuse/exchange.h"

#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "test_util.h"

using namespace locfuse;

namespace {

std::string ReadBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

SegmentSample RandomSample(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SegmentSample s;
  s.image = Image(6, kSampleSize, kSampleSize);
  for (float& v : s.image.data) v = u(rng);
  s.crop_offset = Vec2i(-12, 340);
  s.frames = FrameRange{1500, 13499};
  s.span = 239.98;
  return s;
}

}  // namespace

TEST_CASE("input files round trip bit-exactly") {
  const auto dir = testing::TempDir("exchange_rt");
  const SegmentSample s = RandomSample(1);
  WriteSampleInput(SampleInputPath(dir, 3), s);
  CHECK(SampleInputPath(dir, 3).filename() == "seg_3_input.bin");
  CHECK(std::filesystem::file_size(SampleInputPath(dir, 3)) == 256 + 6 * 250 * 250 * 4);

  const ExchangeFile f = ReadExchangeFile(SampleInputPath(dir, 3));
  CHECK(f.header.channels == 6);
  CHECK(f.header.crop_offset == s.crop_offset);
  CHECK(f.header.frame_range == s.frames);
  CHECK(f.header.span_s == s.span);
  CHECK(f.image.data == s.image.data);

  // No temporary files are left behind.
  size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("header layout and little-endian payload") {
  const auto dir = testing::TempDir("exchange_layout");
  const SegmentSample s = RandomSample(2);
  WriteSampleInput(dir / "x.bin", s);
  const std::string bytes = ReadBytes(dir / "x.bin");
  const std::string header = bytes.substr(0, 256);
  const auto j = nlohmann::json::parse(header);
  CHECK(j["magic"] == "FDHL1");
  CHECK(j["channels"] == 6);
  CHECK(j["frame_range"][0] == 1500);
  CHECK(j["frame_range"][1] == 13499);
  CHECK(j["crop_offset"][0] == -12);
  CHECK(header.back() == ' ');

  // Channel 1, row 2, col 3.
  const size_t index = (1 * 250 + 2) * 250 + 3;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + 256 + 4 * index);
  const uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float value;
  std::memcpy(&value, &bits, 4);
  CHECK(value == s.image.at(1, 2, 3));
}

TEST_CASE("flow files round trip with their mask") {
  const auto dir = testing::TempDir("exchange_flow");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-30.0f, 30.0f);
  FlowField f;
  for (size_t i = 0; i < f.mask.size(); i += 7) {
    f.mask[i] = 1;
    f.flow.data[i] = u(rng);
    f.flow.data[i + f.mask.size()] = u(rng);
  }
  const Image packed = PackFlow(f);
  CHECK(packed.channels == 3);
  const FlowField back = UnpackFlow(packed);
  CHECK(back.mask == f.mask);
  CHECK(back.flow.data == f.flow.data);

  ExchangeHeader h;
  h.frame_range = {4, 9};
  h.crop_offset = Vec2i(1, 2);
  h.span_s = 5.0;
  h.channels = 3;
  WriteFlowFile(SampleFlowPath(dir, 0), h, f);
  ExchangeHeader got;
  const FlowField read = ReadFlowFile(SampleFlowPath(dir, 0), &got);
  CHECK(got.frame_range == h.frame_range);
  CHECK(got.crop_offset == h.crop_offset);
  CHECK(read.mask == f.mask);
  CHECK(read.flow.data == f.flow.data);
  CHECK(SampleTargetPath(dir, 2).filename() == "seg_2_target.bin");
}

TEST_CASE("malformed files are rejected with the file name") {
  const auto dir = testing::TempDir("exchange_bad");
  const SegmentSample s = RandomSample(3);
  WriteSampleInput(dir / "good.bin", s);
  std::string bytes = ReadBytes(dir / "good.bin");

  std::string bad = bytes;
  bad.replace(bad.find("FDHL1"), 5, "FDHL9");
  std::ofstream(dir / "magic.bin", std::ios::binary) << bad;
  try {
    ReadExchangeFile(dir / "magic.bin");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("magic.bin") != std::string::npos);
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }

  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, 1000);
  CHECK_THROWS_AS(ReadExchangeFile(dir / "short.bin"), std::runtime_error);

  std::ofstream(dir / "tiny.bin", std::ios::binary) << "FDHL1";
  CHECK_THROWS_AS(ReadExchangeFile(dir / "tiny.bin"), std::runtime_error);

  // An input file is not a flow file.
  CHECK_THROWS_AS(ReadFlowFile(dir / "good.bin"), std::runtime_error);
  CHECK_THROWS(ReadExchangeFile(dir / "missing.bin"));
}
