#include "locfuse/exchange.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace locfuse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "exchange I/O assumes a little-endian host");

[[noreturn]] void Fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

void WriteFileAtomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void WriteExchangeFile(const std::filesystem::path& path,
                       const ExchangeHeader& header, const Image& image) {
  if (image.channels != header.channels || image.height != kSampleSize ||
      image.width != kSampleSize) {
    throw std::invalid_argument("exchange image must be channels x 250 x 250");
  }
  nlohmann::ordered_json j;
  j["magic"] = kExchangeMagic;
  j["channels"] = header.channels;
  j["crop_offset"] = {header.crop_offset.x(), header.crop_offset.y()};
  j["frame_range"] = {header.frame_range.first, header.frame_range.last};
  j["span_s"] = header.span_s;
  std::string text = j.dump();
  if (text.size() > kExchangeHeaderBytes) {
    throw std::invalid_argument("exchange header exceeds 256 bytes");
  }
  text.resize(kExchangeHeaderBytes, ' ');

  std::string blob = std::move(text);
  const size_t payload = image.data.size() * sizeof(float);
  blob.resize(kExchangeHeaderBytes + payload);
  std::memcpy(blob.data() + kExchangeHeaderBytes, image.data.data(), payload);
  WriteFileAtomic(path, blob);
}

ExchangeFile ReadExchangeFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(path, "cannot open");
  std::string head(kExchangeHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  if (in.gcount() != static_cast<std::streamsize>(head.size())) {
    Fail(path, "truncated header");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception&) {
    Fail(path, "malformed header");
  }
  if (!j.is_object() || j.value("magic", std::string()) != kExchangeMagic) {
    Fail(path, "bad magic");
  }
  ExchangeFile file;
  try {
    file.header.channels = j.at("channels").get<int>();
    const auto offset = j.at("crop_offset").get<std::vector<int>>();
    const auto range = j.at("frame_range").get<std::vector<size_t>>();
    if (offset.size() != 2 || range.size() != 2) Fail(path, "malformed header");
    file.header.crop_offset = Vec2i(offset[0], offset[1]);
    file.header.frame_range = {range[0], range[1]};
    file.header.span_s = j.at("span_s").get<double>();
  } catch (const nlohmann::json::exception&) {
    Fail(path, "malformed header");
  }
  if (file.header.channels <= 0 || file.header.channels > 64) {
    Fail(path, "bad channel count");
  }
  file.image = Image(file.header.channels, kSampleSize, kSampleSize);
  const auto bytes =
      static_cast<std::streamsize>(file.image.data.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(file.image.data.data()), bytes);
  if (in.gcount() != bytes) Fail(path, "truncated payload");
  return file;
}

std::filesystem::path SampleInputPath(const std::filesystem::path& dir, size_t k) {
  return dir / ("seg_" + std::to_string(k) + "_input.bin");
}
std::filesystem::path SampleFlowPath(const std::filesystem::path& dir, size_t k) {
  return dir / ("seg_" + std::to_string(k) + "_flow.bin");
}
std::filesystem::path SampleTargetPath(const std::filesystem::path& dir, size_t k) {
  return dir / ("seg_" + std::to_string(k) + "_target.bin");
}

ExchangeHeader HeaderFor(const SegmentSample& sample) {
  ExchangeHeader h;
  h.crop_offset = sample.crop_offset;
  h.frame_range = sample.frames;
  h.span_s = sample.span;
  h.channels = sample.image.channels;
  return h;
}

void WriteSampleInput(const std::filesystem::path& path, const SegmentSample& sample) {
  WriteExchangeFile(path, HeaderFor(sample), sample.image);
}

Image PackFlow(const FlowField& flow) {
  Image packed(3, kSampleSize, kSampleSize);
  const size_t plane = static_cast<size_t>(kSampleSize) * kSampleSize;
  std::copy(flow.flow.data.begin(), flow.flow.data.end(), packed.data.begin());
  for (size_t i = 0; i < plane; ++i) {
    packed.data[2 * plane + i] = flow.mask[i] ? 1.0f : 0.0f;
  }
  return packed;
}

FlowField UnpackFlow(const Image& packed) {
  if (packed.channels != 3 || packed.height != kSampleSize ||
      packed.width != kSampleSize) {
    throw std::invalid_argument("flow image must be 3 x 250 x 250");
  }
  FlowField flow;
  const size_t plane = static_cast<size_t>(kSampleSize) * kSampleSize;
  std::copy(packed.data.begin(), packed.data.begin() + 2 * plane,
            flow.flow.data.begin());
  for (size_t i = 0; i < plane; ++i) flow.mask[i] = packed.data[2 * plane + i] > 0.5f;
  return flow;
}

void WriteFlowFile(const std::filesystem::path& path, const ExchangeHeader& header,
                   const FlowField& flow) {
  ExchangeHeader h = header;
  h.channels = 3;
  WriteExchangeFile(path, h, PackFlow(flow));
}

FlowField ReadFlowFile(const std::filesystem::path& path, ExchangeHeader* header) {
  ExchangeFile file = ReadExchangeFile(path);
  if (file.header.channels != 3) {
    throw std::runtime_error(path.string() + ": flow files need 3 channels");
  }
  if (header != nullptr) *header = file.header;
  return UnpackFlow(file.image);
}

}  // namespace locfuse
