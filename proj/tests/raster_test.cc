#include "locfuse/raster.h"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "test_util.h"

using namespace locfuse;
using locfuse::testing::StraightTrajectory;
using locfuse::testing::WanderingTrajectory;

namespace {

FloorplanRaster WhitePlan(int w, int h, const GeoRegistration& reg) {
  return FloorplanRaster(w, h, std::vector<Rgb>(static_cast<size_t>(w) * h, Rgb{255, 255, 255}),
                         DefaultLegend(), reg);
}

GeoRegistration Scale(double ppm) {
  GeoRegistration reg;
  reg.pixels_per_meter = ppm;
  return reg;
}

// Series sampled at `rate` Hz moving at `speed` m/s along x from `start`.
PositionSeries Line(double seconds, double rate, double speed, const Vec2& start) {
  PositionSeries s;
  const size_t n = static_cast<size_t>(std::llround(seconds * rate)) + 1;
  for (size_t i = 0; i < n; ++i) {
    const double t = i / rate;
    s.timestamps.push_back(t);
    s.positions.push_back(start + Vec2(speed * t, 0.0));
  }
  return s;
}

std::set<std::pair<int, int>> PlotPixels(const SegmentSample& s) {
  std::set<std::pair<int, int>> out;
  for (int r = 0; r < kSampleSize; ++r) {
    for (int c = 0; c < kSampleSize; ++c) {
      if (s.image.at(3, r, c) != 0.0f || s.image.at(4, r, c) != 0.0f ||
          s.image.at(5, r, c) != 0.0f) {
        out.insert({c, r});
      }
    }
  }
  return out;
}

// Cells within `radius` of floor(p), enumerated independently.
std::set<std::pair<int, int>> RefDisk(const Vec2& p, int radius) {
  std::set<std::pair<int, int>> out;
  const int cx = static_cast<int>(std::floor(p.x()));
  const int cy = static_cast<int>(std::floor(p.y()));
  for (int r = 0; r < kSampleSize; ++r) {
    for (int c = 0; c < kSampleSize; ++c) {
      if ((c - cx) * (c - cx) + (r - cy) * (r - cy) <= radius * radius) out.insert({c, r});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("eight-minute slow walk splits at 0, 3 and 6 minutes") {
  const PositionSeries s = Line(480.0, 1.0, 0.1, Vec2(10, 10));
  const std::vector<FrameRange> segs = SegmentTrajectory(s, Scale(1.0));
  REQUIRE(segs.size() == 3);
  CHECK(s.timestamps[segs[0].first] == 0.0);
  CHECK(s.timestamps[segs[1].first] == 180.0);
  CHECK(s.timestamps[segs[2].first] == 360.0);
  CHECK(s.timestamps[segs[0].last] == 240.0);
  CHECK(s.timestamps[segs[1].last] == 420.0);
  CHECK(segs[2].last == s.size() - 1);
}

TEST_CASE("short compact trajectory is one segment") {
  const PositionSeries s = Line(100.0, 50.0, 0.5, Vec2(10, 10));
  const std::vector<FrameRange> segs = SegmentTrajectory(s, Scale(2.5));
  REQUIRE(segs.size() == 1);
  CHECK(segs[0] == FrameRange{0, s.size() - 1});
}

TEST_CASE("stationary trajectory is capped at four minutes") {
  const PositionSeries s = Line(600.0, 2.0, 0.0, Vec2(50, 50));
  const std::vector<FrameRange> segs = SegmentTrajectory(s, Scale(2.5));
  REQUIRE(segs.size() >= 3);
  for (const FrameRange& r : segs) {
    CHECK(s.timestamps[r.last] - s.timestamps[r.first] <= 240.0 + 1e-9);
  }
  CHECK(s.timestamps[segs[0].last] == 240.0);
}

TEST_CASE("bounding box cap closes a segment early") {
  // 2 m/s at 5 px/m is 10 px/s, so 250 cells are crossed within 25 s.
  const PositionSeries s = Line(100.0, 10.0, 2.0, Vec2(1, 1));
  const std::vector<FrameRange> segs = SegmentTrajectory(s, Scale(5.0));
  REQUIRE(segs.size() > 1);
  for (const FrameRange& r : segs) {
    const std::span<const Vec2> w(s.positions.data() + r.first, r.size());
    std::vector<Vec2> px;
    for (const Vec2& p : w) px.push_back(p * 5.0);
    CHECK(CellBounds(px).FitsIn(kSampleSize));
    if (r.last + 1 < s.size()) {
      px.push_back(s.positions[r.last + 1] * 5.0);
      CHECK_FALSE(CellBounds(px).FitsIn(kSampleSize));
    }
  }
}

TEST_CASE("segments cover every frame and overlap by a quarter") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const InertialTrajectory traj = WanderingTrajectory(20000 + 1000 * seed, 0.03, seed);
    CorrectionParams p = CorrectionParams::Identity(traj);
    p.start_offset = Vec2(100, 100);
    const PositionSeries s = Integrate(traj, p);
    const std::vector<FrameRange> segs = SegmentTrajectory(s, Scale(2.5));
    CHECK(segs.front().first == 0);
    CHECK(segs.back().last == s.size() - 1);
    for (size_t k = 0; k + 1 < segs.size(); ++k) {
      const size_t len = segs[k].size();
      const size_t overlap = segs[k].last + 1 - segs[k + 1].first;
      CHECK(overlap == (len + 3) / 4);
    }
  }
}

TEST_CASE("crop offsets") {
  CellBox box{400, 300, 499, 349};
  // Centered inside a large plan.
  Vec2i off = CenteredCropOffset(box, 1000, 1000);
  CHECK(off.x() == 400 - 75);
  CHECK(off.y() == 300 - 100);
  // Symmetric: bbox centred on the plan centre gives a centred crop.
  box = CellBox{450, 450, 549, 549};
  off = CenteredCropOffset(box, 1000, 1000);
  CHECK(off.x() + 125 == 500);
  CHECK(off.y() + 125 == 500);
  // Near the corner the crop is clamped to the plan.
  box = CellBox{2, 3, 40, 50};
  off = CenteredCropOffset(box, 1000, 1000);
  CHECK(off == Vec2i(0, 0));
  box = CellBox{950, 960, 990, 999};
  off = CenteredCropOffset(box, 1000, 1000);
  CHECK(off == Vec2i(750, 750));
  // A 250-cell-wide box aligns with the crop.
  box = CellBox{100, 200, 349, 260};
  off = CenteredCropOffset(box, 1000, 1000);
  CHECK(off.x() == 100);
  // Too wide.
  box = CellBox{100, 200, 350, 260};
  CHECK_THROWS_AS(CenteredCropOffset(box, 1000, 1000), std::invalid_argument);
  // A small plan is centred and padded instead of clamped.
  box = CellBox{10, 10, 89, 89};
  off = CenteredCropOffset(box, 100, 100);
  CHECK(off == Vec2i(10 - 85, 10 - 85));
}

TEST_CASE("crop pads outside the plan with the background color") {
  const FloorplanRaster plan = WhitePlan(100, 100, Scale(1.0));
  const std::vector<Vec2> px{Vec2(20.5, 20.5), Vec2(60.5, 70.5)};
  const FloorplanCrop crop = CropFloorplan(plan, px);
  CHECK(crop.rgb.at(0, 0, 0) == doctest::Approx(48.0 / 255.0));
  const int c = 30 - crop.offset.x(), r = 30 - crop.offset.y();
  CHECK(crop.rgb.at(0, r, c) == 1.0f);
  CHECK(crop.rgb.at(2, r, c) == 1.0f);
}

TEST_CASE("rainbow colormap runs blue to red") {
  auto eq = [](std::array<float, 3> a, std::array<float, 3> b) {
    return std::abs(a[0] - b[0]) < 1e-6 && std::abs(a[1] - b[1]) < 1e-6 &&
           std::abs(a[2] - b[2]) < 1e-6;
  };
  CHECK(eq(RainbowColor(0.0), {0, 0, 1}));
  CHECK(eq(RainbowColor(0.5), {0, 1, 0}));
  CHECK(eq(RainbowColor(1.0), {1, 0, 0}));
  CHECK(eq(RainbowColor(-3.0), {0, 0, 1}));
  CHECK(eq(RainbowColor(0.25), {0, 1, 1}));
}

TEST_CASE("rasterize single frame and painter's order") {
  const FloorplanRaster plan = WhitePlan(300, 300, Scale(1.0));
  std::vector<Vec2> px{Vec2(100.5, 100.5)};
  std::vector<double> ts{0.0};
  FloorplanCrop crop = CropFloorplan(plan, px);
  SegmentSample s = RasterizeSegment(px, ts, FrameRange{0, 0}, crop);
  const Vec2 local = px[0] - crop.offset.cast<double>();
  CHECK(PlotPixels(s) == RefDisk(local, 3));
  const int c = static_cast<int>(local.x()), r = static_cast<int>(local.y());
  CHECK(s.image.at(3, r, c) == 0.0f);
  CHECK(s.image.at(5, r, c) == 1.0f);
  CHECK(s.span == 0.0);

  px = {Vec2(100.5, 100.5), Vec2(100.7, 100.2)};
  ts = {0.0, 1.0};
  crop = CropFloorplan(plan, px);
  s = RasterizeSegment(px, ts, FrameRange{0, 1}, crop);
  const Vec2 l2 = px[1] - crop.offset.cast<double>();
  CHECK(s.image.at(3, static_cast<int>(l2.y()), static_cast<int>(l2.x())) == 1.0f);
  CHECK(s.image.at(5, static_cast<int>(l2.y()), static_cast<int>(l2.x())) == 0.0f);
  // Floorplan channels copy the crop.
  CHECK(s.image.at(0, 0, 0) == crop.rgb.at(0, 0, 0));
}

TEST_CASE("disks clip at the image border") {
  std::vector<Vec2i> cells = DiskCells(Vec2(1.2, 1.7), 3, kSampleSize, kSampleSize);
  std::set<std::pair<int, int>> got;
  for (const Vec2i& c : cells) {
    CHECK(c.x() >= 0);
    CHECK(c.y() >= 0);
    got.insert({c.x(), c.y()});
  }
  CHECK(got == RefDisk(Vec2(1.2, 1.7), 3));
  cells = DiskCells(Vec2(249.9, 249.9), 3, kSampleSize, kSampleSize);
  for (const Vec2i& c : cells) {
    CHECK(c.x() < kSampleSize);
    CHECK(c.y() < kSampleSize);
  }
  CHECK(DiskCells(Vec2(0.5, 0.5), 3, kSampleSize, kSampleSize).size() == 11);
}

TEST_CASE("rasterized plot equals the union of disks") {
  const FloorplanRaster plan = WhitePlan(600, 600, Scale(2.5));
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const InertialTrajectory traj = WanderingTrajectory(3000, 0.03, seed);
    CorrectionParams p = CorrectionParams::Identity(traj);
    p.start_offset = Vec2(120, 120);
    const PositionSeries series = Integrate(traj, p);
    for (const SegmentSample& s : BuildSegmentSamples(series, plan)) {
      std::set<std::pair<int, int>> expected;
      for (const Vec2& fp : s.frame_pixels) {
        CHECK(fp.x() >= 0.0);
        CHECK(fp.y() >= 0.0);
        CHECK(fp.x() < kSampleSize);
        CHECK(fp.y() < kSampleSize);
        const auto d = RefDisk(fp, 3);
        expected.insert(d.begin(), d.end());
      }
      CHECK(PlotPixels(s) == expected);
      CHECK(s.frame_times.front() == 0.0);
      CHECK(s.span == doctest::Approx(s.frame_times.back()));
    }
  }
}

TEST_CASE("rasterize rejects frames outside the crop") {
  const FloorplanRaster plan = WhitePlan(600, 600, Scale(1.0));
  const std::vector<Vec2> px{Vec2(10, 10), Vec2(20, 20), Vec2(500, 500)};
  const std::vector<double> ts{0, 1, 2};
  const FloorplanCrop crop = CropFloorplan(plan, std::span<const Vec2>(px.data(), 2));
  CHECK_THROWS_AS(RasterizeSegment(px, ts, FrameRange{0, 2}, crop), std::invalid_argument);
}

namespace {

SegmentSample SampleAt(const std::vector<Vec2>& local) {
  SegmentSample s;
  s.image = Image(6, kSampleSize, kSampleSize);
  s.frames = FrameRange{0, local.size() - 1};
  s.frame_pixels = local;
  for (size_t i = 0; i < local.size(); ++i) s.frame_times.push_back(static_cast<double>(i));
  s.span = s.frame_times.back();
  return s;
}

}  // namespace

TEST_CASE("apply_flow examples") {
  const SegmentSample s = SampleAt({Vec2(50.5, 50.5), Vec2(60.2, 40.9), Vec2(200.1, 10.3)});
  const GeoRegistration reg = Scale(2.5);

  FlowField zero;
  std::vector<Vec2> disp(3, Vec2::Zero());
  zero = PaintFlow(s.frame_pixels, disp);
  for (const Vec2& c : ApplyFlow(s, zero, reg)) CHECK(c == Vec2::Zero());

  FlowField uniform;
  for (int r = 0; r < kSampleSize; ++r) {
    for (int c = 0; c < kSampleSize; ++c) {
      uniform.flow.at(0, r, c) = 5.0f;
      uniform.mask[static_cast<size_t>(r) * kSampleSize + c] = 1;
    }
  }
  for (const Vec2& c : ApplyFlow(s, uniform, reg)) CHECK((c - Vec2(2.0, 0.0)).norm() < 1e-12);

  GeoRegistration flipped = reg;
  flipped.flip_y = true;
  for (const Vec2& c : ApplyFlow(s, uniform, flipped)) CHECK((c - Vec2(2.0, 0.0)).norm() < 1e-12);

  FlowField empty;
  for (const Vec2& c : ApplyFlow(s, empty, reg)) CHECK(c == Vec2::Zero());
}

TEST_CASE("apply_flow falls back to the nearest masked cell within 3 pixels") {
  const SegmentSample s = SampleAt({Vec2(50.5, 50.5)});
  FlowField f;
  auto set = [&f](int c, int r, float x) {
    f.flow.at(0, r, c) = x;
    f.mask[static_cast<size_t>(r) * kSampleSize + c] = 1;
  };
  set(53, 50, 7.5f);  // distance 3
  set(52, 52, 2.5f);  // distance sqrt(8), nearer
  std::vector<Vec2> c = ApplyFlow(s, f, Scale(2.5));
  CHECK((c[0] - Vec2(1.0, 0.0)).norm() < 1e-12);

  FlowField far;
  far.flow.at(0, 50, 54) = 1.0f;
  far.mask[50 * kSampleSize + 54] = 1;
  c = ApplyFlow(s, far, Scale(2.5));
  CHECK(c[0] == Vec2::Zero());
}

TEST_CASE("apply_flow is linear in the flow") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(5, 245), d(-20, 20);
  std::vector<Vec2> px, disp;
  for (int i = 0; i < 300; ++i) {
    px.emplace_back(pos(rng), pos(rng));
    disp.emplace_back(d(rng), d(rng));
  }
  const SegmentSample s = SampleAt(px);
  GeoRegistration reg = Scale(2.5);
  reg.rotation = 0.4;
  const FlowField f = PaintFlow(px, disp);
  FlowField scaled = f;
  const float alpha = -1.75f;
  for (float& v : scaled.flow.data) v *= alpha;
  const std::vector<Vec2> a = ApplyFlow(s, f, reg);
  const std::vector<Vec2> b = ApplyFlow(s, scaled, reg);
  for (size_t i = 0; i < a.size(); ++i) CHECK((b[i] - alpha * a[i]).norm() < 1e-5);
}

TEST_CASE("stitch weight is the normal pdf with mean T/2 and sd T/4") {
  const double T = 120.0;
  for (double t : {0.0, 13.0, 60.0, 97.5, 120.0}) {
    const double sd = T / 4;
    const double ref =
        std::exp(-0.5 * std::pow((t - T / 2) / sd, 2)) / (sd * std::sqrt(2 * std::numbers::pi));
    CHECK(StitchWeight(t, T) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(StitchWeight(60.0, T) > StitchWeight(0.0, T));
  CHECK(StitchWeight(60.0, T) > StitchWeight(120.0, T));
  CHECK(StitchWeight(0.0, 0.0) == 1.0);
}

TEST_CASE("stitch examples") {
  // Segment A covers frames 0..10, B covers 5..15; frame times are indices.
  SegmentSample a, b;
  a.frames = {0, 10};
  b.frames = {5, 15};
  for (int i = 0; i <= 10; ++i) {
    a.frame_times.push_back(i);
    b.frame_times.push_back(i);
  }
  a.span = b.span = 10.0;
  std::vector<std::vector<Vec2>> corr{std::vector<Vec2>(11, Vec2(1, 0)),
                                      std::vector<Vec2>(11, Vec2(3, 2))};
  const std::vector<SegmentSample> segs{a, b};
  const std::vector<Vec2> out = Stitch(segs, corr, 16);
  CHECK(out[2] == Vec2(1, 0));
  CHECK(out[13] == Vec2(3, 2));
  // Frame 7.5 would be the midpoint; frames 7 and 8 are mirror images.
  const double wa7 = StitchWeight(7, 10), wb7 = StitchWeight(2, 10);
  CHECK((out[7] - (wa7 * Vec2(1, 0) + wb7 * Vec2(3, 2)) / (wa7 + wb7)).norm() < 1e-12);
  CHECK(((out[7] + out[8]) / 2 - Vec2(2, 1)).norm() < 1e-12);

  // Two identical segments give the arithmetic mean.
  const std::vector<SegmentSample> same{a, a};
  const std::vector<std::vector<Vec2>> two{std::vector<Vec2>(11, Vec2(1, 0)),
                                           std::vector<Vec2>(11, Vec2(3, 2))};
  const std::vector<Vec2> mean = Stitch(same, two, 11);
  CHECK((mean[5] - Vec2(2, 1)).norm() < 1e-12);

  CHECK_THROWS(Stitch(std::vector<SegmentSample>{a}, std::vector<std::vector<Vec2>>{corr[0]}, 12));
}

TEST_CASE("stitched corrections are convex combinations") {
  const FloorplanRaster plan = WhitePlan(800, 800, Scale(2.5));
  const InertialTrajectory traj = WanderingTrajectory(40000, 0.03, 77);
  CorrectionParams p = CorrectionParams::Identity(traj);
  p.start_offset = Vec2(160, 160);
  const PositionSeries series = Integrate(traj, p);
  const std::vector<SegmentSample> segs = BuildSegmentSamples(series, plan);
  REQUIRE(segs.size() > 2);
  // Constant per-segment corrections: output lies between the extremes.
  std::vector<std::vector<Vec2>> corr;
  for (size_t k = 0; k < segs.size(); ++k) {
    corr.emplace_back(segs[k].frames.size(), Vec2(static_cast<double>(k), 1.0));
  }
  const std::vector<Vec2> out = Stitch(segs, corr, series.size());
  for (size_t f = 0; f < series.size(); ++f) {
    double lo = 1e9, hi = -1e9;
    for (size_t k = 0; k < segs.size(); ++k) {
      if (f >= segs[k].frames.first && f <= segs[k].frames.last) {
        lo = std::min(lo, static_cast<double>(k));
        hi = std::max(hi, static_cast<double>(k));
      }
    }
    CHECK(out[f].x() >= lo - 1e-12);
    CHECK(out[f].x() <= hi + 1e-12);
    CHECK(std::abs(out[f].y() - 1.0) < 1e-12);
  }
}
