#include "locfuse/geo.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "locfuse/png_io.h"
#include "test_util.h"

using namespace locfuse;

TEST_CASE("world_to_pixel examples") {
  GeoRegistration reg;
  reg.pixels_per_meter = 5.0;
  CHECK((WorldToPixel(Vec2(2, 0), reg) - Vec2(10, 0)).norm() < 1e-12);
  CHECK((PixelToWorld(Vec2(10, 0), reg) - Vec2(2, 0)).norm() < 1e-12);

  reg.origin_world = Vec2(3, -7);
  reg.rotation = 0.7;
  reg.flip_y = true;
  CHECK(WorldToPixel(reg.origin_world, reg).norm() < 1e-12);
  CHECK((PixelToWorld(Vec2::Zero(), reg) - reg.origin_world).norm() < 1e-12);
}

TEST_CASE("world_to_pixel matches the similarity formula") {
  GeoRegistration reg;
  reg.origin_world = Vec2(1, 2);
  reg.pixels_per_meter = 2.5;
  reg.rotation = std::numbers::pi / 6;
  reg.flip_y = true;
  const Vec2 w(4, -1);
  const Vec2 d = w - reg.origin_world;
  const double c = std::cos(reg.rotation), s = std::sin(reg.rotation);
  const Vec2 expected(2.5 * (c * d.x() - s * d.y()), -2.5 * (s * d.x() + c * d.y()));
  CHECK((WorldToPixel(w, reg) - expected).norm() < 1e-12);
}

TEST_CASE("round trip and distance scaling on 1000 random points") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-500.0, 500.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> scale(0.5, 10.0);
  for (int i = 0; i < 1000; ++i) {
    GeoRegistration reg;
    reg.origin_world = Vec2(coord(rng), coord(rng));
    reg.pixels_per_meter = scale(rng);
    reg.rotation = angle(rng);
    reg.flip_y = (i % 2) == 0;
    const Vec2 a(coord(rng), coord(rng));
    const Vec2 b(coord(rng), coord(rng));
    CHECK((PixelToWorld(WorldToPixel(a, reg), reg) - a).norm() < 1e-9);
    CHECK((WorldToPixel(PixelToWorld(a, reg), reg) - a).norm() < 1e-9);
    const double pd = (WorldToPixel(a, reg) - WorldToPixel(b, reg)).norm();
    CHECK(std::abs(pd - reg.pixels_per_meter * (a - b).norm()) < 1e-9 * (1.0 + pd));
    const Vec2 delta = b - a;
    CHECK((PixelDeltaToWorld(WorldToPixel(b, reg) - WorldToPixel(a, reg), reg) - delta).norm() <
          1e-9);
    CHECK((WorldDeltaToPixel(delta, reg) - (WorldToPixel(b, reg) - WorldToPixel(a, reg))).norm() <
          1e-8);
  }
}

TEST_CASE("non-invertible registration is rejected") {
  GeoRegistration reg;
  reg.pixels_per_meter = 0.0;
  CHECK_THROWS_AS(reg.Validate(), std::invalid_argument);
  reg.pixels_per_meter = -1.0;
  CHECK_THROWS_AS(reg.Validate(), std::invalid_argument);
}

TEST_CASE("legend classification") {
  const Legend legend = DefaultLegend();
  CHECK(ClassifyColor({255, 255, 255}, legend) == PixelClass::kCorridor);
  CHECK(ClassifyColor({0, 0, 0}, legend) == PixelClass::kWall);
  CHECK(ClassifyColor({255, 255, 0}, legend) == PixelClass::kRoom);
  CHECK(ClassifyColor({128, 128, 128}, legend) == PixelClass::kUnwalkable);
  CHECK(ClassifyColor({250, 250, 245}, legend) == PixelClass::kCorridor);
  // Pure blue is far from every entry.
  CHECK(ClassifyColor({0, 0, 255}, legend) == PixelClass::kBackground);
}

TEST_CASE("threshold boundary") {
  const Legend legend{{PixelClass::kWall, {0, 0, 0}}};
  // Distance exactly 60 is kept; just above is background.
  CHECK(ClassifyColor({60, 0, 0}, legend, 60.0) == PixelClass::kWall);
  CHECK(ClassifyColor({61, 0, 0}, legend, 60.0) == PixelClass::kBackground);
  CHECK(ClassifyColor({36, 48, 0}, legend, 60.0) == PixelClass::kWall);
}

TEST_CASE("equidistant colors go to the earlier legend entry") {
  const Legend ab{{PixelClass::kCorridor, {0, 0, 0}}, {PixelClass::kRoom, {20, 0, 0}}};
  const Legend ba{{PixelClass::kRoom, {20, 0, 0}}, {PixelClass::kCorridor, {0, 0, 0}}};
  CHECK(ClassifyColor({10, 0, 0}, ab) == PixelClass::kCorridor);
  CHECK(ClassifyColor({10, 0, 0}, ba) == PixelClass::kRoom);
  CHECK(ClassifyColor({9, 0, 0}, ba) == PixelClass::kCorridor);
}

TEST_CASE("pixel class names round trip") {
  for (PixelClass c : {PixelClass::kCorridor, PixelClass::kRoom, PixelClass::kUnwalkable,
                       PixelClass::kOpenBoundary, PixelClass::kWall, PixelClass::kBackground}) {
    CHECK(PixelClassFromName(PixelClassName(c)) == c);
  }
  CHECK_THROWS(PixelClassFromName("lobby"));
}

TEST_CASE("floorplan config keeps legend order from the file") {
  const std::string text = R"({
    "pixels_per_meter": 2.5, "origin_world": [1.0, 250.0], "rotation_rad": 0.25,
    "flip_y": true, "legend_threshold": 40,
    "legend": {"wall": [0,0,0], "room": [20,0,0], "corridor": [255,255,255]}})";
  const FloorplanConfig c = ParseFloorplanConfig(text);
  REQUIRE(c.legend.size() == 3);
  CHECK(c.legend[0].cls == PixelClass::kWall);
  CHECK(c.legend[1].cls == PixelClass::kRoom);
  CHECK(c.legend[2].cls == PixelClass::kCorridor);
  CHECK(c.registration.pixels_per_meter == 2.5);
  CHECK(c.registration.origin_world == Vec2(1.0, 250.0));
  CHECK(c.registration.rotation == 0.25);
  CHECK(c.registration.flip_y);
  CHECK(c.threshold == 40.0);

  const FloorplanConfig again = ParseFloorplanConfig(FloorplanConfigToJson(c));
  REQUIRE(again.legend.size() == 3);
  CHECK(again.legend[0].cls == PixelClass::kWall);
  CHECK(again.legend[1].color == c.legend[1].color);
  CHECK(again.registration.rotation == 0.25);
  CHECK(again.threshold == 40.0);

  CHECK_THROWS(ParseFloorplanConfig(R"({"pixels_per_meter": 0, "legend": {"wall": [0,0,0]}})"));
  CHECK_THROWS(ParseFloorplanConfig(R"({"pixels_per_meter": 1, "legend": {}})"));
}

TEST_CASE("load_floorplan classifies every pixel and counts background") {
  const auto dir = testing::TempDir("geo_load");
  RgbImage img(4, 3, 255);
  uint8_t* blue = img.At(1, 1);
  blue[0] = 0;
  blue[1] = 0;
  blue[2] = 255;
  uint8_t* black = img.At(3, 2);
  black[0] = black[1] = black[2] = 0;
  WritePng(dir / "plan.png", img);

  const FloorplanRaster plan = LoadFloorplan(dir / "plan.png", DefaultLegend(), GeoRegistration{});
  CHECK(plan.width() == 4);
  CHECK(plan.height() == 3);
  CHECK(plan.ClassAt(0, 0) == PixelClass::kCorridor);
  CHECK(plan.ClassAt(1, 1) == PixelClass::kBackground);
  CHECK(plan.ClassAt(3, 2) == PixelClass::kWall);
  CHECK(plan.background_count() == 1);
  CHECK(plan.CountClass(PixelClass::kCorridor) + plan.CountClass(PixelClass::kWall) +
            plan.background_count() ==
        12);
  CHECK(plan.RgbAt(1, 1) == Rgb{0, 0, 255});
  CHECK(plan.ClassAtOrBackground(-1, 0) == PixelClass::kBackground);
  CHECK(plan.ClassAtOrBackground(4, 0) == PixelClass::kBackground);
}

TEST_CASE("load_floorplan errors") {
  const auto dir = testing::TempDir("geo_errors");
  CHECK_THROWS(LoadFloorplan(dir / "missing.png", DefaultLegend(), GeoRegistration{}));
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS(LoadFloorplan(dir / "junk.png", DefaultLegend(), GeoRegistration{}));
  RgbImage img(2, 2, 255);
  WritePng(dir / "ok.png", img);
  CHECK_THROWS(LoadFloorplan(dir / "ok.png", Legend{}, GeoRegistration{}));
}
