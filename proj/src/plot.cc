#include "locfuse/plot.h"

#include <algorithm>
#include <cmath>

#include "locfuse/raster.h"

namespace locfuse {

RgbImage FloorplanImage(const FloorplanRaster& plan) {
  RgbImage img(plan.width(), plan.height());
  for (int r = 0; r < plan.height(); ++r) {
    for (int c = 0; c < plan.width(); ++c) {
      const Rgb& rgb = plan.RgbAt(c, r);
      std::copy(rgb.begin(), rgb.end(), img.At(c, r));
    }
  }
  return img;
}

namespace {

void Put(RgbImage* img, int c, int r, uint8_t red, uint8_t green, uint8_t blue) {
  if (c < 0 || r < 0 || c >= img->width || r >= img->height) return;
  uint8_t* px = img->At(c, r);
  px[0] = red;
  px[1] = green;
  px[2] = blue;
}

void Line(RgbImage* img, const Vec2& a, const Vec2& b) {
  const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm())));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
    Put(img, static_cast<int>(std::floor(p.x())), static_cast<int>(std::floor(p.y())), 0, 0,
        0);
  }
}

}  // namespace

RgbImage RenderTrajectoryPlot(const FloorplanRaster& plan, const PositionSeries& estimate,
                              std::span<const GtPoint> gt) {
  RgbImage img = FloorplanImage(plan);
  for (uint8_t& v : img.data) v = static_cast<uint8_t>(v / 2 + 64);
  const GeoRegistration& reg = plan.registration();
  const size_t n = estimate.size();
  for (size_t f = 0; f < n; ++f) {
    const double u = n > 1 ? static_cast<double>(f) / (n - 1) : 0.0;
    const std::array<float, 3> color = RainbowColor(u);
    const Vec2 p = WorldToPixel(estimate.positions[f], reg);
    for (const Vec2i& cell : DiskCells(p, 1, img.width, img.height)) {
      Put(&img, cell.x(), cell.y(), static_cast<uint8_t>(std::lround(color[0] * 255)),
          static_cast<uint8_t>(std::lround(color[1] * 255)),
          static_cast<uint8_t>(std::lround(color[2] * 255)));
    }
  }
  for (const GtPoint& g : gt) {
    const Vec2 p = WorldToPixel(g.position, reg);
    if (n > 0) Line(&img, p, WorldToPixel(InterpolatePosition(estimate, g.t), reg));
    const int c = static_cast<int>(std::floor(p.x()));
    const int r = static_cast<int>(std::floor(p.y()));
    for (int k = -3; k <= 3; ++k) {
      Put(&img, c + k, r + k, 0, 0, 0);
      Put(&img, c + k, r - k, 0, 0, 0);
    }
  }
  return img;
}

}  // namespace locfuse
