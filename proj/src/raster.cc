#include "locfuse/raster.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace locfuse {
namespace {

Vec2i CellOf(const Vec2& p) {
  return Vec2i(static_cast<int>(std::floor(p.x())),
               static_cast<int>(std::floor(p.y())));
}

bool InsideWindow(const Vec2& p, int window) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < window && p.y() < window;
}

}  // namespace

void CellBox::Extend(const Vec2& pixel) {
  const Vec2i c = CellOf(pixel);
  if (max_col < min_col) {
    min_col = max_col = c.x();
    min_row = max_row = c.y();
    return;
  }
  min_col = std::min(min_col, c.x());
  max_col = std::max(max_col, c.x());
  min_row = std::min(min_row, c.y());
  max_row = std::max(max_row, c.y());
}

CellBox CellBounds(std::span<const Vec2> pixels) {
  CellBox box;
  for (const Vec2& p : pixels) box.Extend(p);
  return box;
}

std::vector<FrameRange> SegmentTrajectory(const PositionSeries& series,
                                          const GeoRegistration& reg,
                                          double max_duration, int window) {
  if (series.empty()) throw std::invalid_argument("empty position series");
  const size_t n = series.size();
  std::vector<Vec2> pixels(n);
  for (size_t i = 0; i < n; ++i) pixels[i] = WorldToPixel(series.positions[i], reg);

  std::vector<FrameRange> segments;
  size_t start = 0;
  while (true) {
    CellBox box;
    box.Extend(pixels[start]);
    size_t end = start;
    while (end + 1 < n &&
           series.timestamps[end + 1] - series.timestamps[start] <=
               max_duration + 1e-9) {
      CellBox grown = box;
      grown.Extend(pixels[end + 1]);
      if (!grown.FitsIn(window)) break;
      box = grown;
      ++end;
    }
    segments.push_back({start, end});
    if (end + 1 >= n) break;
    const size_t len = end - start + 1;
    const size_t keep = (len + 3) / 4;
    start = std::max(start + len - keep, start + 1);
  }
  return segments;
}

Vec2i CenteredCropOffset(const CellBox& box, int plan_width, int plan_height,
                         int window) {
  if (!box.FitsIn(window)) {
    throw std::invalid_argument("segment bounding box exceeds the crop window");
  }
  auto axis = [window](int lo, int hi, int extent) {
    const int size = hi - lo + 1;
    int offset = lo - (window - size) / 2;
    if (extent >= window) offset = std::clamp(offset, 0, extent - window);
    // Keep the whole box inside the crop.
    return std::clamp(offset, hi - (window - 1), lo);
  };
  return Vec2i(axis(box.min_col, box.max_col, plan_width),
               axis(box.min_row, box.max_row, plan_height));
}

FloorplanCrop CropFloorplan(const FloorplanRaster& plan,
                            std::span<const Vec2> segment_pixels) {
  if (segment_pixels.empty()) throw std::invalid_argument("empty segment");
  FloorplanCrop crop;
  crop.offset = CenteredCropOffset(CellBounds(segment_pixels), plan.width(),
                                   plan.height());
  crop.rgb = Image(3, kSampleSize, kSampleSize);
  for (int row = 0; row < kSampleSize; ++row) {
    for (int col = 0; col < kSampleSize; ++col) {
      const Rgb c =
          plan.RgbAtOrBackground(col + crop.offset.x(), row + crop.offset.y());
      for (int k = 0; k < 3; ++k) crop.rgb.at(k, row, col) = c[k] / 255.0f;
    }
  }
  return crop;
}

std::array<float, 3> RainbowColor(double u) {
  u = std::clamp(u, 0.0, 1.0);
  const double hue = 240.0 * (1.0 - u);  // degrees
  const double h = hue / 60.0;
  const int sector = std::min(static_cast<int>(std::floor(h)), 5);
  const double f = h - sector;
  const float rise = static_cast<float>(f);
  const float fall = static_cast<float>(1.0 - f);
  switch (sector) {
    case 0:
      return {1.0f, rise, 0.0f};
    case 1:
      return {fall, 1.0f, 0.0f};
    case 2:
      return {0.0f, 1.0f, rise};
    case 3:
      return {0.0f, fall, 1.0f};
    default:
      return {rise, 0.0f, 1.0f};
  }
}

std::vector<Vec2i> DiskCells(const Vec2& center, int radius, int width,
                             int height) {
  const Vec2i c = CellOf(center);
  std::vector<Vec2i> cells;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      const int col = c.x() + dx;
      const int row = c.y() + dy;
      if (col < 0 || row < 0 || col >= width || row >= height) continue;
      cells.emplace_back(col, row);
    }
  }
  return cells;
}

SegmentSample RasterizeSegment(std::span<const Vec2> plan_pixels,
                               std::span<const double> timestamps,
                               FrameRange frames, const FloorplanCrop& crop) {
  if (frames.last < frames.first || frames.last >= plan_pixels.size() ||
      plan_pixels.size() != timestamps.size()) {
    throw std::invalid_argument("frame range outside the trajectory");
  }
  SegmentSample sample;
  sample.crop_offset = crop.offset;
  sample.frames = frames;
  sample.span = timestamps[frames.last] - timestamps[frames.first];
  sample.image = Image(6, kSampleSize, kSampleSize);
  std::copy(crop.rgb.data.begin(), crop.rgb.data.end(), sample.image.data.begin());

  const Vec2 offset = crop.offset.cast<double>();
  for (size_t f = frames.first; f <= frames.last; ++f) {
    const Vec2 local = plan_pixels[f] - offset;
    if (!InsideWindow(local, kSampleSize)) {
      throw std::invalid_argument("frame " + std::to_string(f) +
                                  " falls outside the crop");
    }
    const double dt = timestamps[f] - timestamps[frames.first];
    sample.frame_pixels.push_back(local);
    sample.frame_times.push_back(dt);
    const auto color = RainbowColor(sample.span > 0.0 ? dt / sample.span : 0.0);
    for (const Vec2i& cell : DiskCells(local, kDiskRadius, kSampleSize, kSampleSize)) {
      for (int k = 0; k < 3; ++k) sample.image.at(3 + k, cell.y(), cell.x()) = color[k];
    }
  }
  return sample;
}

std::vector<SegmentSample> BuildSegmentSamples(const PositionSeries& series,
                                               const FloorplanRaster& plan) {
  std::vector<Vec2> pixels(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    pixels[i] = WorldToPixel(series.positions[i], plan.registration());
  }
  std::vector<SegmentSample> samples;
  for (const FrameRange& range : SegmentTrajectory(series, plan.registration())) {
    const std::span<const Vec2> seg(pixels.data() + range.first, range.size());
    const FloorplanCrop crop = CropFloorplan(plan, seg);
    samples.push_back(RasterizeSegment(pixels, series.timestamps, range, crop));
  }
  return samples;
}

FlowField PaintFlow(std::span<const Vec2> frame_pixels,
                    std::span<const Vec2> displacements) {
  if (frame_pixels.size() != displacements.size()) {
    throw std::invalid_argument("frame and displacement counts differ");
  }
  FlowField field;
  for (size_t i = 0; i < frame_pixels.size(); ++i) {
    for (const Vec2i& cell :
         DiskCells(frame_pixels[i], kDiskRadius, kSampleSize, kSampleSize)) {
      field.flow.at(0, cell.y(), cell.x()) = static_cast<float>(displacements[i].x());
      field.flow.at(1, cell.y(), cell.x()) = static_cast<float>(displacements[i].y());
      field.mask[static_cast<size_t>(cell.y()) * kSampleSize + cell.x()] = 1;
    }
  }
  return field;
}

std::vector<Vec2> ApplyFlow(const SegmentSample& sample, const FlowField& flow,
                            const GeoRegistration& reg) {
  if (flow.flow.channels != 2 || flow.flow.height != kSampleSize ||
      flow.flow.width != kSampleSize ||
      flow.mask.size() != static_cast<size_t>(kSampleSize) * kSampleSize) {
    throw std::invalid_argument("flow field must be 2 x 250 x 250 with a mask");
  }
  std::vector<Vec2> corrections;
  corrections.reserve(sample.frame_pixels.size());
  for (const Vec2& p : sample.frame_pixels) {
    const Vec2i c = CellOf(p);
    Vec2 d = Vec2::Zero();
    bool found = false;
    if (c.x() >= 0 && c.y() >= 0 && c.x() < kSampleSize && c.y() < kSampleSize &&
        flow.masked(c.x(), c.y())) {
      d = flow.at(c.x(), c.y());
      found = true;
    }
    if (!found) {
      // Nearest masked cell within the disk radius; scan order breaks ties.
      int best = kDiskRadius * kDiskRadius + 1;
      for (int dy = -kDiskRadius; dy <= kDiskRadius; ++dy) {
        for (int dx = -kDiskRadius; dx <= kDiskRadius; ++dx) {
          const int d2 = dx * dx + dy * dy;
          const int col = c.x() + dx;
          const int row = c.y() + dy;
          if (d2 >= best || col < 0 || row < 0 || col >= kSampleSize ||
              row >= kSampleSize || !flow.masked(col, row)) {
            continue;
          }
          best = d2;
          d = flow.at(col, row);
        }
      }
    }
    corrections.push_back(PixelDeltaToWorld(d, reg));
  }
  return corrections;
}

double StitchWeight(double offset, double span) {
  if (span <= 0.0) return 1.0;
  const double sigma = span / 4.0;
  const double z = (offset - span / 2.0) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<Vec2> Stitch(std::span<const SegmentSample> segments,
                         std::span<const std::vector<Vec2>> corrections,
                         size_t frame_count) {
  if (segments.size() != corrections.size()) {
    throw std::invalid_argument("one correction set per segment expected");
  }
  std::vector<Vec2> sum(frame_count, Vec2::Zero());
  std::vector<double> weight(frame_count, 0.0);
  for (size_t j = 0; j < segments.size(); ++j) {
    const SegmentSample& seg = segments[j];
    if (corrections[j].size() != seg.frames.size() ||
        seg.frame_times.size() != seg.frames.size() || seg.frames.last >= frame_count) {
      throw std::invalid_argument("segment " + std::to_string(j) +
                                  " does not match its corrections");
    }
    for (size_t i = 0; i < seg.frames.size(); ++i) {
      const double w = StitchWeight(seg.frame_times[i], seg.span);
      sum[seg.frames.first + i] += w * corrections[j][i];
      weight[seg.frames.first + i] += w;
    }
  }
  for (size_t f = 0; f < frame_count; ++f) {
    if (!(weight[f] > 0.0)) {
      throw std::invalid_argument("frame " + std::to_string(f) +
                                  " is not covered by any segment");
    }
    sum[f] /= weight[f];
  }
  return sum;
}

}  // namespace locfuse
