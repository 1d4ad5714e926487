// File exchange with the flow-prediction component.
//
// Every file is a 256-byte header holding a space-padded JSON object (its
// "magic" member is "FDHL1"), followed by channels x 250 x 250 little-endian
// float32 values in channel-major order. Inputs carry 6 channels; flow and
// target files carry the 2 flow channels plus a 0/1 mask channel.

#ifndef LOCFUSE_EXCHANGE_H_
#define LOCFUSE_EXCHANGE_H_

#include <filesystem>
#include <string>

#include "locfuse/raster.h"

namespace locfuse {

inline constexpr char kExchangeMagic[] = "FDHL1";
inline constexpr size_t kExchangeHeaderBytes = 256;

struct ExchangeHeader {
  Vec2i crop_offset = Vec2i::Zero();
  FrameRange frame_range;
  double span_s = 0.0;
  int channels = 0;
};

struct ExchangeFile {
  ExchangeHeader header;
  Image image;
};

// Writes to a temporary sibling and renames it into place.
void WriteExchangeFile(const std::filesystem::path& path,
                       const ExchangeHeader& header, const Image& image);
// Throws std::runtime_error naming the file on a bad magic, malformed header
// or truncated payload.
ExchangeFile ReadExchangeFile(const std::filesystem::path& path);

std::filesystem::path SampleInputPath(const std::filesystem::path& dir, size_t k);
std::filesystem::path SampleFlowPath(const std::filesystem::path& dir, size_t k);
std::filesystem::path SampleTargetPath(const std::filesystem::path& dir, size_t k);

ExchangeHeader HeaderFor(const SegmentSample& sample);
void WriteSampleInput(const std::filesystem::path& path, const SegmentSample& sample);

// Flow + mask packed as a 3-channel image and back.
Image PackFlow(const FlowField& flow);
FlowField UnpackFlow(const Image& packed);
void WriteFlowFile(const std::filesystem::path& path, const ExchangeHeader& header,
                   const FlowField& flow);
FlowField ReadFlowFile(const std::filesystem::path& path,
                       ExchangeHeader* header = nullptr);

// Writes `contents` to a temporary sibling, then renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace locfuse

#endif  // LOCFUSE_EXCHANGE_H_
