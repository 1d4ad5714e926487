// Minimal 8-bit RGB PNG reading and writing on top of libpng.

#ifndef LOCFUSE_PNG_IO_H_
#define LOCFUSE_PNG_IO_H_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace locfuse {

struct RgbImage {
  int width = 0;
  int height = 0;
  // Row-major, 3 bytes per pixel.
  std::vector<uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

  uint8_t* At(int col, int row) {
    return &data[(static_cast<size_t>(row) * width + col) * 3];
  }
  const uint8_t* At(int col, int row) const {
    return &data[(static_cast<size_t>(row) * width + col) * 3];
  }
};

// Palette, grey and alpha inputs are converted to 8-bit RGB.
RgbImage ReadPng(const std::filesystem::path& path);
void WritePng(const std::filesystem::path& path, const RgbImage& image);

}  // namespace locfuse

#endif  // LOCFUSE_PNG_IO_H_
