// Trajectory segments as 250x250 image samples, correction flows and the
// Gaussian-weighted stitching of overlapping per-segment corrections.
//
// Pixel geometry is integer: a continuous pixel position p lies in cell
// floor(p), and a disk of radius r around p covers the cells (cx+dx, cy+dy)
// with dx*dx + dy*dy <= r*r around its center cell (cx, cy).

#ifndef LOCFUSE_RASTER_H_
#define LOCFUSE_RASTER_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "locfuse/geo.h"
#include "locfuse/trajectory.h"

namespace locfuse {

inline constexpr int kSampleSize = 250;
inline constexpr int kDiskRadius = 3;
inline constexpr double kMaxSegmentDuration = 240.0;

using Vec2i = Eigen::Vector2i;

// Dense float image stored channel-major: data[(c * height + row) * width + col].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int row, int col) {
    return data[(static_cast<size_t>(c) * height + row) * width + col];
  }
  float at(int c, int row, int col) const {
    return data[(static_cast<size_t>(c) * height + row) * width + col];
  }
};

// Inclusive frame index range.
struct FrameRange {
  size_t first = 0;
  size_t last = 0;
  size_t size() const { return last - first + 1; }
  bool operator==(const FrameRange&) const = default;
};

// Bounding box of the pixel cells touched by a set of continuous positions.
struct CellBox {
  int min_col = 0;
  int min_row = 0;
  int max_col = -1;
  int max_row = -1;

  int width() const { return max_col - min_col + 1; }
  int height() const { return max_row - min_row + 1; }
  void Extend(const Vec2& pixel);
  bool FitsIn(int window) const { return width() <= window && height() <= window; }
};

CellBox CellBounds(std::span<const Vec2> pixels);

// Greedy segmentation: a segment grows until its duration would exceed
// `max_duration` or its cell bounding box would not fit in a window x window
// square. The next segment starts after dropping the first three quarters of
// the previous one, i.e. the last ceil(len / 4) frames are shared.
std::vector<FrameRange> SegmentTrajectory(
    const PositionSeries& series, const GeoRegistration& reg,
    double max_duration = kMaxSegmentDuration, int window = kSampleSize);

struct FloorplanCrop {
  // 3 x 250 x 250, values in [0, 1].
  Image rgb;
  // Plan pixel of the crop's cell (0, 0).
  Vec2i offset = Vec2i::Zero();
};

// Crop offset that centers the cell bounding box of `pixels`, pulled toward
// the plan borders as far as the box stays inside the crop.
Vec2i CenteredCropOffset(const CellBox& box, int plan_width, int plan_height,
                         int window = kSampleSize);

// Throws std::invalid_argument when the pixels do not fit a 250x250 crop.
FloorplanCrop CropFloorplan(const FloorplanRaster& plan,
                            std::span<const Vec2> segment_pixels);

// Hue sweep from 240 degrees (blue) at u = 0 to 0 degrees (red) at u = 1, at
// full saturation and value. u is clamped to [0, 1].
std::array<float, 3> RainbowColor(double u);

// Cells of a disk around the cell containing `center`, clipped to the image.
std::vector<Vec2i> DiskCells(const Vec2& center, int radius, int width,
                             int height);

struct SegmentSample {
  // 6 x 250 x 250: floorplan RGB followed by the trajectory plot RGB.
  Image image;
  Vec2i crop_offset = Vec2i::Zero();
  FrameRange frames;
  // Per-frame continuous pixel position inside the crop.
  std::vector<Vec2> frame_pixels;
  // Per-frame time since the segment's first frame.
  std::vector<double> frame_times;
  double span = 0.0;
};

// Plots the frames of `frames` (positions in plan pixels) on black with disks
// of radius 3, colored by normalized time, later frames drawn over earlier
// ones. Throws std::invalid_argument if a frame falls outside the crop.
SegmentSample RasterizeSegment(std::span<const Vec2> plan_pixels,
                               std::span<const double> timestamps,
                               FrameRange frames, const FloorplanCrop& crop);

// Segments, crops and rasterizes a whole trajectory.
std::vector<SegmentSample> BuildSegmentSamples(const PositionSeries& series,
                                               const FloorplanRaster& plan);

struct FlowField {
  // 2 x 250 x 250 displacement in pixels (x = column, y = row).
  Image flow;
  // Row-major 250 x 250; true on trajectory pixels.
  std::vector<uint8_t> mask;

  FlowField() : flow(2, kSampleSize, kSampleSize),
                mask(static_cast<size_t>(kSampleSize) * kSampleSize, 0) {}

  bool masked(int col, int row) const {
    return mask[static_cast<size_t>(row) * kSampleSize + col] != 0;
  }
  Vec2 at(int col, int row) const {
    return Vec2(flow.at(0, row, col), flow.at(1, row, col));
  }
};

// Paints per-frame displacements with the same disks and painter's order as
// the trajectory plot.
FlowField PaintFlow(std::span<const Vec2> frame_pixels,
                    std::span<const Vec2> displacements);

// Per-frame world-space correction (meters) read from a flow field at each
// frame's cell, falling back to the nearest masked cell within 3 pixels, else
// zero.
std::vector<Vec2> ApplyFlow(const SegmentSample& sample, const FlowField& flow,
                            const GeoRegistration& reg);

// Gaussian pdf with mean span / 2 and standard deviation span / 4 at the
// offset; a zero span gives weight 1.
double StitchWeight(double offset, double span);

// Weighted average of overlapping per-segment corrections, one output per
// frame of a trajectory with `frame_count` frames. Throws if a frame is not
// covered by any segment.
std::vector<Vec2> Stitch(std::span<const SegmentSample> segments,
                         std::span<const std::vector<Vec2>> corrections,
                         size_t frame_count);

}  // namespace locfuse

#endif  // LOCFUSE_RASTER_H_
