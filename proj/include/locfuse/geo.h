// Floorplan rasters and the world <-> pixel registration.
//
// World coordinates are a local metric frame in meters. Pixel coordinates are
// continuous: pixel cell (col, row) covers [col, col + 1) x [row, row + 1).

#ifndef LOCFUSE_GEO_H_
#define LOCFUSE_GEO_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace locfuse {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Similarity transform from world meters to floorplan pixels:
//   pixel = pixels_per_meter * F * R(rotation) * (world - origin_world)
// where F = diag(1, -1) when flip_y is set.
struct GeoRegistration {
  Vec2 origin_world = Vec2::Zero();
  double pixels_per_meter = 1.0;
  double rotation = 0.0;
  bool flip_y = false;

  // Linear part of world_to_pixel.
  Mat2 Linear() const;
  // Throws std::invalid_argument when the mapping is not invertible.
  void Validate() const;
};

Vec2 WorldToPixel(const Vec2& p, const GeoRegistration& reg);
Vec2 PixelToWorld(const Vec2& p, const GeoRegistration& reg);

// Maps a pixel-space displacement (not a point) to meters.
Vec2 PixelDeltaToWorld(const Vec2& d, const GeoRegistration& reg);
Vec2 WorldDeltaToPixel(const Vec2& d, const GeoRegistration& reg);

enum class PixelClass : uint8_t {
  kCorridor = 0,
  kRoom,
  kUnwalkable,
  kOpenBoundary,
  kWall,
  kBackground,
};

const char* PixelClassName(PixelClass c);
// Accepts the lowercase legend keys: corridor, room, unwalkable,
// open_boundary, wall, background.
PixelClass PixelClassFromName(const std::string& name);

using Rgb = std::array<uint8_t, 3>;

// Ordered legend. Earlier entries win ties in nearest-color matching.
struct LegendEntry {
  PixelClass cls;
  Rgb color;
};
using Legend = std::vector<LegendEntry>;

// White corridors, yellow rooms, grey unwalkable area, brown open boundaries
// and black walls.
Legend DefaultLegend();

inline constexpr double kDefaultLegendThreshold = 60.0;
// Fill color for out-of-plan pixels; far enough from every default legend
// color to classify as Background.
inline constexpr Rgb kBackgroundRgb = {48, 48, 48};

// Nearest legend color by Euclidean RGB distance; Background when the nearest
// entry is farther than `threshold`.
PixelClass ClassifyColor(const Rgb& rgb, const Legend& legend,
                         double threshold = kDefaultLegendThreshold);

class FloorplanRaster {
 public:
  FloorplanRaster() = default;
  FloorplanRaster(int width, int height, std::vector<Rgb> rgb,
                  const Legend& legend, const GeoRegistration& registration,
                  double threshold = kDefaultLegendThreshold);

  int width() const { return width_; }
  int height() const { return height_; }
  const GeoRegistration& registration() const { return registration_; }

  bool Contains(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_;
  }
  PixelClass ClassAt(int col, int row) const {
    return classes_[Index(col, row)];
  }
  const Rgb& RgbAt(int col, int row) const { return rgb_[Index(col, row)]; }
  // Out-of-plan pixels read as Background.
  PixelClass ClassAtOrBackground(int col, int row) const;
  Rgb RgbAtOrBackground(int col, int row) const;

  int64_t CountClass(PixelClass c) const;
  int64_t background_count() const { return CountClass(PixelClass::kBackground); }

 private:
  size_t Index(int col, int row) const {
    return static_cast<size_t>(row) * width_ + col;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<PixelClass> classes_;
  std::vector<Rgb> rgb_;
  GeoRegistration registration_;
};

// Legend, registration and threshold as read from the JSON floorplan config.
struct FloorplanConfig {
  GeoRegistration registration;
  Legend legend;
  double threshold = kDefaultLegendThreshold;
};

FloorplanConfig LoadFloorplanConfig(const std::filesystem::path& json_path);
FloorplanConfig ParseFloorplanConfig(const std::string& json_text);
std::string FloorplanConfigToJson(const FloorplanConfig& config);

// Decodes an 8-bit RGB (or RGBA/grey, converted) PNG and classifies every
// pixel. Throws std::runtime_error on unreadable or empty images.
FloorplanRaster LoadFloorplan(const std::filesystem::path& image_path,
                              const Legend& legend,
                              const GeoRegistration& registration,
                              double threshold = kDefaultLegendThreshold);

}  // namespace locfuse

#endif  // LOCFUSE_GEO_H_
