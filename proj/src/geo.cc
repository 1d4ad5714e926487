#include "locfuse/geo.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "locfuse/png_io.h"

namespace locfuse {

Mat2 GeoRegistration::Linear() const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  Mat2 rot;
  rot << c, -s, s, c;
  if (flip_y) rot.row(1) *= -1.0;
  return pixels_per_meter * rot;
}

void GeoRegistration::Validate() const {
  if (!(pixels_per_meter > 0.0) || !std::isfinite(pixels_per_meter)) {
    throw std::invalid_argument("pixels_per_meter must be positive");
  }
  if (!std::isfinite(rotation) || !origin_world.allFinite()) {
    throw std::invalid_argument("registration must be finite");
  }
}

Vec2 WorldToPixel(const Vec2& p, const GeoRegistration& reg) {
  return reg.Linear() * (p - reg.origin_world);
}

Vec2 PixelToWorld(const Vec2& p, const GeoRegistration& reg) {
  return reg.origin_world + PixelDeltaToWorld(p, reg);
}

Vec2 PixelDeltaToWorld(const Vec2& d, const GeoRegistration& reg) {
  // The linear part is a scaled orthogonal matrix, so its inverse is the
  // transpose divided by the squared scale.
  const double s2 = reg.pixels_per_meter * reg.pixels_per_meter;
  return reg.Linear().transpose() * d / s2;
}

Vec2 WorldDeltaToPixel(const Vec2& d, const GeoRegistration& reg) {
  return reg.Linear() * d;
}

const char* PixelClassName(PixelClass c) {
  switch (c) {
    case PixelClass::kCorridor:
      return "corridor";
    case PixelClass::kRoom:
      return "room";
    case PixelClass::kUnwalkable:
      return "unwalkable";
    case PixelClass::kOpenBoundary:
      return "open_boundary";
    case PixelClass::kWall:
      return "wall";
    case PixelClass::kBackground:
      return "background";
  }
  return "unknown";
}

PixelClass PixelClassFromName(const std::string& name) {
  for (PixelClass c :
       {PixelClass::kCorridor, PixelClass::kRoom, PixelClass::kUnwalkable,
        PixelClass::kOpenBoundary, PixelClass::kWall, PixelClass::kBackground}) {
    if (name == PixelClassName(c)) return c;
  }
  throw std::invalid_argument("unknown pixel class: " + name);
}

Legend DefaultLegend() {
  return {
      {PixelClass::kCorridor, {255, 255, 255}},
      {PixelClass::kRoom, {255, 255, 0}},
      {PixelClass::kUnwalkable, {128, 128, 128}},
      {PixelClass::kOpenBoundary, {150, 75, 0}},
      {PixelClass::kWall, {0, 0, 0}},
  };
}

PixelClass ClassifyColor(const Rgb& rgb, const Legend& legend,
                         double threshold) {
  if (legend.empty()) throw std::invalid_argument("legend is empty");
  int best_d2 = std::numeric_limits<int>::max();
  PixelClass best = PixelClass::kBackground;
  for (const LegendEntry& entry : legend) {
    int d2 = 0;
    for (int k = 0; k < 3; ++k) {
      const int d = static_cast<int>(rgb[k]) - entry.color[k];
      d2 += d * d;
    }
    // Strict comparison keeps the earlier entry on ties.
    if (d2 < best_d2) {
      best_d2 = d2;
      best = entry.cls;
    }
  }
  if (std::sqrt(static_cast<double>(best_d2)) > threshold) {
    return PixelClass::kBackground;
  }
  return best;
}

FloorplanRaster::FloorplanRaster(int width, int height, std::vector<Rgb> rgb,
                                 const Legend& legend,
                                 const GeoRegistration& registration,
                                 double threshold)
    : width_(width),
      height_(height),
      rgb_(std::move(rgb)),
      registration_(registration) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("floorplan must be non-empty");
  }
  if (rgb_.size() != static_cast<size_t>(width) * height) {
    throw std::invalid_argument("floorplan rgb size does not match dimensions");
  }
  registration_.Validate();
  classes_.reserve(rgb_.size());
  for (const Rgb& px : rgb_) {
    classes_.push_back(ClassifyColor(px, legend, threshold));
  }
}

PixelClass FloorplanRaster::ClassAtOrBackground(int col, int row) const {
  return Contains(col, row) ? ClassAt(col, row) : PixelClass::kBackground;
}

Rgb FloorplanRaster::RgbAtOrBackground(int col, int row) const {
  return Contains(col, row) ? RgbAt(col, row) : kBackgroundRgb;
}

int64_t FloorplanRaster::CountClass(PixelClass c) const {
  int64_t n = 0;
  for (PixelClass v : classes_) n += (v == c);
  return n;
}

FloorplanConfig ParseFloorplanConfig(const std::string& json_text) {
  const nlohmann::ordered_json j = nlohmann::ordered_json::parse(json_text);
  FloorplanConfig config;
  config.registration.pixels_per_meter = j.at("pixels_per_meter").get<double>();
  if (j.contains("origin_world")) {
    const auto origin = j.at("origin_world").get<std::vector<double>>();
    if (origin.size() != 2) {
      throw std::invalid_argument("origin_world must have two components");
    }
    config.registration.origin_world = Vec2(origin[0], origin[1]);
  }
  config.registration.rotation = j.value("rotation_rad", 0.0);
  config.registration.flip_y = j.value("flip_y", false);
  config.threshold = j.value("legend_threshold", kDefaultLegendThreshold);
  config.registration.Validate();

  if (j.contains("legend")) {
    // Parsed as ordered_json so legend order, and hence tie-breaking, follows
    // the file.
    for (const auto& [key, value] : j.at("legend").items()) {
      const auto rgb = value.get<std::vector<int>>();
      if (rgb.size() != 3) {
        throw std::invalid_argument("legend colors must have 3 components");
      }
      LegendEntry entry{PixelClassFromName(key), {}};
      for (int k = 0; k < 3; ++k) {
        if (rgb[k] < 0 || rgb[k] > 255) {
          throw std::invalid_argument("legend color out of range");
        }
        entry.color[k] = static_cast<uint8_t>(rgb[k]);
      }
      config.legend.push_back(entry);
    }
  } else {
    config.legend = DefaultLegend();
  }
  if (config.legend.empty()) throw std::invalid_argument("legend is empty");
  return config;
}

FloorplanConfig LoadFloorplanConfig(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) {
    throw std::runtime_error("cannot open floorplan config: " +
                             json_path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseFloorplanConfig(buffer.str());
}

std::string FloorplanConfigToJson(const FloorplanConfig& config) {
  nlohmann::ordered_json j;
  j["pixels_per_meter"] = config.registration.pixels_per_meter;
  j["origin_world"] = {config.registration.origin_world.x(),
                       config.registration.origin_world.y()};
  j["rotation_rad"] = config.registration.rotation;
  j["flip_y"] = config.registration.flip_y;
  j["legend_threshold"] = config.threshold;
  nlohmann::ordered_json legend = nlohmann::ordered_json::object();
  for (const LegendEntry& e : config.legend) {
    legend[PixelClassName(e.cls)] = {e.color[0], e.color[1], e.color[2]};
  }
  j["legend"] = legend;
  return j.dump(2);
}

FloorplanRaster LoadFloorplan(const std::filesystem::path& image_path,
                              const Legend& legend,
                              const GeoRegistration& registration,
                              double threshold) {
  if (legend.empty()) throw std::invalid_argument("legend is empty");
  const RgbImage image = ReadPng(image_path);
  std::vector<Rgb> rgb(static_cast<size_t>(image.width) * image.height);
  for (size_t i = 0; i < rgb.size(); ++i) {
    rgb[i] = {image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]};
  }
  return FloorplanRaster(image.width, image.height, std::move(rgb), legend,
                         registration, threshold);
}

}  // namespace locfuse
