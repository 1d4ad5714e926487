#include "locfuse/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "locfuse/exchange.h"

namespace locfuse {

Rng MakeRng(uint64_t seed, std::string_view stream) {
  // FNV-1a over the stream name; stable across platforms, unlike std::hash.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
  return Rng(seq);
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// One coordinate of a natural cubic spline over knots u_0 < ... < u_n.
class NaturalSpline {
 public:
  NaturalSpline(std::vector<double> u, std::vector<double> y)
      : u_(std::move(u)), y_(std::move(y)), m_(u_.size(), 0.0) {
    const size_t n = u_.size() - 1;
    if (n < 2) return;  // two points: straight line, all M = 0
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    std::vector<double> a(n + 1), b(n + 1), c(n + 1), d(n + 1);
    for (size_t i = 1; i < n; ++i) {
      const double h0 = u_[i] - u_[i - 1];
      const double h1 = u_[i + 1] - u_[i];
      a[i] = h0;
      b[i] = 2.0 * (h0 + h1);
      c[i] = h1;
      d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (size_t i = 2; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (size_t i = n - 2; i >= 1; --i) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  }

  // Value and first derivative at local parameter s in [0, h] of segment k.
  double Value(size_t k, double s) const {
    const double h = u_[k + 1] - u_[k];
    const double t = h - s;
    return m_[k] * t * t * t / (6.0 * h) + m_[k + 1] * s * s * s / (6.0 * h) +
           (y_[k] / h - m_[k] * h / 6.0) * t + (y_[k + 1] / h - m_[k + 1] * h / 6.0) * s;
  }
  double Derivative(size_t k, double s) const {
    const double h = u_[k + 1] - u_[k];
    const double t = h - s;
    return -m_[k] * t * t / (2.0 * h) + m_[k + 1] * s * s / (2.0 * h) -
           (y_[k] / h - m_[k] * h / 6.0) + (y_[k + 1] / h - m_[k + 1] * h / 6.0);
  }

 private:
  std::vector<double> u_;
  std::vector<double> y_;
  std::vector<double> m_;
};

class PlanarSpline {
 public:
  explicit PlanarSpline(std::span<const Vec2> pts)
      : knots_(ChordKnots(pts)),
        x_(knots_, Coord(pts, 0)),
        y_(knots_, Coord(pts, 1)) {}

  size_t segments() const { return knots_.size() - 1; }
  double length(size_t k) const { return knots_[k + 1] - knots_[k]; }

  Vec2 Point(size_t k, double s) const { return Vec2(x_.Value(k, s), y_.Value(k, s)); }
  Vec2 Tangent(size_t k, double s) const {
    return Vec2(x_.Derivative(k, s), y_.Derivative(k, s));
  }
  double Speed(size_t k, double s) const { return Tangent(k, s).norm(); }

  // Arc length of segment k between parameters a and b (5-point
  // Gauss-Legendre over `pieces` equal pieces).
  double ArcLength(size_t k, double a, double b, int pieces = 1) const {
    static constexpr std::array<double, 5> kNodes = {
        0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
        0.9061798459386640};
    static constexpr std::array<double, 5> kWeights = {
        0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
        0.2369268850561891, 0.2369268850561891};
    double total = 0.0;
    const double step = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p) {
      const double lo = a + p * step;
      const double half = 0.5 * step;
      const double mid = lo + half;
      for (int i = 0; i < 5; ++i) total += kWeights[i] * half * Speed(k, mid + half * kNodes[i]);
    }
    return total;
  }

 private:
  static std::vector<double> ChordKnots(std::span<const Vec2> pts) {
    std::vector<double> u(pts.size(), 0.0);
    for (size_t i = 1; i < pts.size(); ++i) u[i] = u[i - 1] + (pts[i] - pts[i - 1]).norm();
    return u;
  }
  static std::vector<double> Coord(std::span<const Vec2> pts, int axis) {
    std::vector<double> v;
    v.reserve(pts.size());
    for (const Vec2& p : pts) v.push_back(p[axis]);
    return v;
  }

  std::vector<double> knots_;
  NaturalSpline x_;
  NaturalSpline y_;
};

}  // namespace

SplineTrajectory GenerateSplineTrajectory(std::span<const Vec2> waypoints,
                                          double speed, double rate,
                                          double max_duration) {
  if (waypoints.size() < 2) throw std::invalid_argument("need at least 2 waypoints");
  if (!(speed > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("speed and rate must be positive");
  }
  for (size_t i = 1; i < waypoints.size(); ++i) {
    if ((waypoints[i] - waypoints[i - 1]).norm() < 1e-9) {
      throw std::invalid_argument("coincident consecutive waypoints");
    }
  }
  const PlanarSpline spline(waypoints);
  std::vector<double> seg_end(spline.segments());
  double acc = 0.0;
  for (size_t k = 0; k < spline.segments(); ++k) {
    acc += spline.ArcLength(k, 0.0, spline.length(k), 64);
    seg_end[k] = acc;
  }
  const double total = acc;
  const double step = speed / rate;
  size_t frames = static_cast<size_t>(std::floor(total / step + 1e-9)) + 1;
  if (max_duration > 0.0) {
    frames = std::min(frames, static_cast<size_t>(std::floor(max_duration * rate + 1e-9)) + 1);
  }

  SplineTrajectory out;
  out.truth.timestamps.resize(frames);
  out.truth.positions.resize(frames);
  size_t seg = 0;
  double u = 0.0;
  double s = 0.0;
  for (size_t f = 0; f < frames; ++f) {
    const double target = static_cast<double>(f) * step;
    while (seg + 1 < spline.segments() && seg_end[seg] < target) {
      s = seg_end[seg];
      ++seg;
      u = 0.0;
    }
    const double h = spline.length(seg);
    double un = std::min(u + (target - s) / spline.Speed(seg, u), h);
    for (int it = 0; it < 8; ++it) {
      const double a = s + spline.ArcLength(seg, u, un, 2);
      const double next = std::clamp(un - (a - target) / spline.Speed(seg, un), 0.0, h);
      const bool done = std::abs(next - un) < 1e-13;
      un = next;
      if (done) break;
    }
    u = un;
    s = target;
    out.truth.timestamps[f] = static_cast<double>(f) / rate;
    out.truth.positions[f] = spline.Point(seg, u);
  }

  InertialTrajectory& in = out.inertial;
  in.timestamps = out.truth.timestamps;
  in.speeds.resize(frames);
  in.headings.resize(frames);
  const Vec2 t0 = spline.Tangent(0, 0.0);
  in.speeds[0] = 0.0;
  in.headings[0] = std::atan2(t0.y(), t0.x());
  for (size_t f = 1; f < frames; ++f) {
    const Vec2 d = out.truth.positions[f] - out.truth.positions[f - 1];
    in.speeds[f] = d.norm();
    in.headings[f] = std::atan2(d.y(), d.x());
  }
  return out;
}

CorruptionSpec RandomCorruption(uint64_t seed) {
  Rng rng = MakeRng(seed, "corruption");
  std::uniform_real_distribution<double> drift(-1.0, 1.0);
  std::uniform_real_distribution<double> scale(0.85, 1.2);
  CorruptionSpec spec;
  spec.heading_drift_rate = drift(rng) * kDeg;
  spec.scale_factor = scale(rng);
  spec.drift_walk_std = 0.05 * kDeg;
  spec.seed = seed;
  return spec;
}

InertialTrajectory Corrupt(const InertialTrajectory& traj, const CorruptionSpec& spec) {
  if (!(spec.scale_factor > 0.0)) throw std::invalid_argument("scale_factor must be > 0");
  InertialTrajectory out = traj;
  if (traj.empty()) return out;
  Rng rng = MakeRng(spec.seed, "drift_walk");
  std::normal_distribution<double> normal(0.0, 1.0);
  double walk = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    if (i > 0 && spec.drift_walk_std > 0.0) {
      const double dt = traj.timestamps[i] - traj.timestamps[i - 1];
      walk += spec.drift_walk_std * std::sqrt(dt) * normal(rng);
    }
    out.headings[i] += spec.heading_drift_rate * (traj.timestamps[i] - traj.timestamps[0]) + walk;
    out.speeds[i] *= spec.scale_factor;
  }
  return out;
}

std::vector<FlpFix> SimulateFlp(const PositionSeries& truth, double interval,
                                double noise_std, double reported_accuracy,
                                uint64_t seed) {
  if (!(interval > 0.0)) throw std::invalid_argument("fix interval must be > 0");
  if (truth.empty()) return {};
  Rng rng = MakeRng(seed, "flp");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FlpFix> fixes;
  const double t0 = truth.timestamps.front();
  const double t1 = truth.timestamps.back();
  for (size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * interval;
    if (t > t1 + 1e-9) break;
    FlpFix fix;
    fix.t = std::min(t, t1);
    fix.position = InterpolatePosition(truth, fix.t);
    if (noise_std > 0.0) {
      const double nx = normal(rng);
      const double ny = normal(rng);
      fix.position += noise_std * Vec2(nx, ny);
    }
    fix.accuracy = reported_accuracy;
    fixes.push_back(fix);
  }
  return fixes;
}

GeoRegistration GridPlanRegistration(const GridPlanSpec& spec) {
  GeoRegistration reg;
  reg.origin_world = Vec2(0.0, spec.size_m);
  reg.pixels_per_meter = spec.pixels_per_meter;
  reg.flip_y = true;
  return reg;
}

FloorplanRaster MakeGridFloorplan(const GridPlanSpec& spec) {
  const GeoRegistration reg = GridPlanRegistration(spec);
  const int size = static_cast<int>(std::lround(spec.size_m * spec.pixels_per_meter));
  const Legend legend = DefaultLegend();
  auto color = [&](PixelClass c) {
    for (const LegendEntry& e : legend) {
      if (e.cls == c) return e.color;
    }
    return kBackgroundRgb;
  };
  const double half = 0.5 * spec.corridor_width_m;
  const double door = 1.5;
  // Distance to the nearest corridor centerline along one axis, and the
  // position along the block side measured from the block's midpoint.
  auto axis = [&](double v, double* along_mid) {
    const double k = std::round(v / spec.spacing_m - 0.5);
    const double center = (k + 0.5) * spec.spacing_m;
    const double block_mid = std::floor(v / spec.spacing_m) * spec.spacing_m;
    if (along_mid != nullptr) *along_mid = std::abs(v - block_mid);
    return std::abs(v - center);
  };
  std::vector<Rgb> rgb(static_cast<size_t>(size) * size);
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      const Vec2 w = PixelToWorld(Vec2(col + 0.5, row + 0.5), reg);
      PixelClass cls = PixelClass::kRoom;
      if (w.x() < 1.0 || w.y() < 1.0 || w.x() > spec.size_m - 1.0 ||
          w.y() > spec.size_m - 1.0) {
        cls = PixelClass::kUnwalkable;
      } else {
        double mid_x = 0.0;
        double mid_y = 0.0;
        const double dx = axis(w.x(), &mid_x);
        const double dy = axis(w.y(), &mid_y);
        if (dx <= half || dy <= half) {
          cls = PixelClass::kCorridor;
        } else if (dx <= half + spec.wall_m) {
          cls = (mid_y < door) ? PixelClass::kOpenBoundary : PixelClass::kWall;
        } else if (dy <= half + spec.wall_m) {
          cls = (mid_x < door) ? PixelClass::kOpenBoundary : PixelClass::kWall;
        }
      }
      rgb[static_cast<size_t>(row) * size + col] = color(cls);
    }
  }
  return FloorplanRaster(size, size, std::move(rgb), legend, reg);
}

std::vector<Vec2> RandomGridWaypoints(const GridPlanSpec& spec, double path_length,
                                      uint64_t seed) {
  const int n = static_cast<int>(std::floor(spec.size_m / spec.spacing_m));
  if (n < 2) throw std::invalid_argument("grid needs at least 2 corridors per axis");
  Rng rng = MakeRng(seed, "waypoints");
  std::uniform_int_distribution<int> start(0, n - 1);
  auto node = [&](int i, int j) {
    return Vec2((i + 0.5) * spec.spacing_m, (j + 0.5) * spec.spacing_m);
  };
  int i = start(rng);
  int j = start(rng);
  int pi = -1;
  int pj = -1;
  std::vector<Vec2> pts = {node(i, j)};
  double length = 0.0;
  static constexpr std::array<std::array<int, 2>, 4> kMoves = {
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (length < path_length) {
    std::vector<std::array<int, 2>> options;
    for (const auto& m : kMoves) {
      const int ni = i + m[0];
      const int nj = j + m[1];
      if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
      if (ni == pi && nj == pj) continue;
      options.push_back({ni, nj});
    }
    std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
    const auto next = options[pick(rng)];
    pi = i;
    pj = j;
    i = next[0];
    j = next[1];
    pts.push_back(node(i, j));
    length += spec.spacing_m;
  }
  return pts;
}

std::vector<Vec2> DensifyWaypoints(std::span<const Vec2> waypoints, double max_spacing) {
  if (!(max_spacing > 0.0)) throw std::invalid_argument("max_spacing must be > 0");
  std::vector<Vec2> out;
  for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Vec2 d = waypoints[i + 1] - waypoints[i];
    const int parts = std::max(1, static_cast<int>(std::ceil(d.norm() / max_spacing - 1e-9)));
    for (int k = 0; k < parts; ++k) out.push_back(waypoints[i] + d * (static_cast<double>(k) / parts));
  }
  if (!waypoints.empty()) out.push_back(waypoints.back());
  return out;
}

SyntheticInstance MakeSyntheticInstance(const GridPlanSpec& plan, double duration_s,
                                        double rate_hz, double speed_mps,
                                        uint64_t seed) {
  SyntheticInstance inst;
  const std::vector<Vec2> waypoints = DensifyWaypoints(
      RandomGridWaypoints(plan, speed_mps * duration_s + 3.0 * plan.spacing_m, seed),
      kGridWaypointSpacing);
  inst.clean = GenerateSplineTrajectory(waypoints, speed_mps, rate_hz, duration_s);
  inst.corruption = RandomCorruption(seed);
  inst.corrupted = Corrupt(inst.clean.inertial, inst.corruption);
  return inst;
}

namespace {

// Similarity taking a0 -> b0 and a1 -> b1, as x -> scale_rot * (x - a0) + b0.
bool TwoPointSimilarity(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1,
                        Mat2* scale_rot) {
  const Vec2 da = a1 - a0;
  const Vec2 db = b1 - b0;
  const double n2 = da.squaredNorm();
  if (n2 < 1e-12) return false;
  // Complex division db / da.
  const double re = (db.x() * da.x() + db.y() * da.y()) / n2;
  const double im = (db.y() * da.x() - db.x() * da.y()) / n2;
  *scale_rot << re, -im, im, re;
  return true;
}

double MotionDirection(std::span<const Vec2> pts, size_t f) {
  const size_t a = (f + 1 < pts.size()) ? f : f - 1;
  const Vec2 d = pts[a + 1] - pts[a];
  return std::atan2(d.y(), d.x());
}

}  // namespace

bool BuildTrainingSample(const InertialTrajectory& traj, const PositionSeries& truth,
                         const FloorplanRaster& plan, size_t reference_frame,
                         const Vec2& first_noise, const Vec2& last_noise,
                         const SampleAugment& augment,
                         const TrainingSampleOptions& options, TrainingSample* out) {
  const size_t n = traj.size();
  if (n < 2 || truth.size() != n || reference_frame + 1 >= n) return false;
  const GeoRegistration& reg = plan.registration();

  // Geo-localize the inertial trajectory by matching position and motion
  // direction at the reference frame, in plan pixels.
  const PositionSeries raw = Integrate(traj, CorrectionParams::Identity(traj));
  std::vector<Vec2> raw_px(n);
  std::vector<Vec2> truth_px(n);
  for (size_t i = 0; i < n; ++i) {
    raw_px[i] = WorldToPixel(raw.positions[i], reg);
    truth_px[i] = WorldToPixel(truth.positions[i], reg);
  }
  const size_t r = reference_frame;
  const double rot = MotionDirection(truth_px, r) - MotionDirection(raw_px, r);
  Mat2 rmat;
  rmat << std::cos(rot), -std::sin(rot), std::sin(rot), std::cos(rot);
  auto aligned = [&](size_t i) { return Vec2(rmat * (raw_px[i] - raw_px[r]) + truth_px[r]); };

  // Follow the trajectory until the end or the border margin of the window
  // centered on the reference frame.
  const Vec2 center = truth_px[r];
  const double half = 0.5 * kSampleSize - options.border_margin_px;
  size_t last = r;
  while (last + 1 < n) {
    const Vec2 d = aligned(last + 1) - center;
    if (std::abs(d.x()) >= half || std::abs(d.y()) >= half) break;
    ++last;
  }
  if (last == r) return false;

  Mat2 warp;
  const Vec2 a0 = aligned(r);
  const Vec2 b0 = a0 + first_noise;
  if (!TwoPointSimilarity(a0, aligned(last), b0, aligned(last) + last_noise, &warp)) {
    return false;
  }
  std::vector<Vec2> warped;
  std::vector<Vec2> gt;
  for (size_t i = r; i <= last; ++i) {
    warped.push_back(warp * (aligned(i) - a0) + b0);
    gt.push_back(truth_px[i]);
  }
  const CellBox box = CellBounds(warped);
  if (!box.FitsIn(kSampleSize)) return false;
  const Vec2i offset = CenteredCropOffset(box, plan.width(), plan.height());

  // Sample frame: mirror then rotate about the window center.
  const Vec2 mid(0.5 * kSampleSize, 0.5 * kSampleSize);
  Mat2 mirror = Mat2::Identity();
  if (augment.flip) mirror(0, 0) = -1.0;
  Mat2 spin;
  spin << std::cos(augment.rotation), -std::sin(augment.rotation),
      std::sin(augment.rotation), std::cos(augment.rotation);
  const Mat2 lin = spin * mirror;
  const Mat2 lin_inv = lin.transpose();
  const Vec2 off = offset.cast<double>();
  auto to_sample = [&](const Vec2& plan_px) { return Vec2(mid + lin * (plan_px - off - mid)); };

  TrainingSample sample;
  std::vector<Vec2> displacements;
  for (size_t i = 0; i < warped.size(); ++i) {
    const Vec2 w = to_sample(warped[i]);
    if (w.x() < 0.0 || w.y() < 0.0 || w.x() >= kSampleSize || w.y() >= kSampleSize) {
      return false;
    }
    sample.warped_pixels.push_back(w);
    sample.truth_pixels.push_back(to_sample(gt[i]));
    displacements.push_back(lin * (gt[i] - warped[i]));
  }

  FloorplanCrop crop;
  crop.offset = Vec2i::Zero();
  crop.rgb = Image(3, kSampleSize, kSampleSize);
  for (int row = 0; row < kSampleSize; ++row) {
    for (int col = 0; col < kSampleSize; ++col) {
      const Vec2 p = off + mid + lin_inv * (Vec2(col + 0.5, row + 0.5) - mid);
      const Rgb c = plan.RgbAtOrBackground(static_cast<int>(std::floor(p.x())),
                                           static_cast<int>(std::floor(p.y())));
      for (int k = 0; k < 3; ++k) crop.rgb.at(k, row, col) = c[k] / 255.0f;
    }
  }
  std::vector<double> times(traj.timestamps.begin() + static_cast<std::ptrdiff_t>(r),
                            traj.timestamps.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  sample.input = RasterizeSegment(sample.warped_pixels, times,
                                  {0, sample.warped_pixels.size() - 1}, crop);
  sample.input.frames = {r, last};
  sample.input.crop_offset = offset;
  sample.target = PaintFlow(sample.warped_pixels, displacements);
  *out = std::move(sample);
  return true;
}

std::vector<TrainingSample> MakeTrainingSamples(const InertialTrajectory& traj,
                                                const PositionSeries& truth,
                                                const FloorplanRaster& plan,
                                                const TrainingSampleOptions& options,
                                                uint64_t seed) {
  if (options.count < 1) throw std::invalid_argument("sample count must be >= 1");
  const size_t usable = static_cast<size_t>(
      std::floor(options.reference_fraction * static_cast<double>(traj.size())));
  if (traj.size() < 2 || usable < 1) {
    throw std::invalid_argument("trajectory too short to crop");
  }
  Rng rng = MakeRng(seed, "training_samples");
  std::uniform_int_distribution<size_t> pick(0, std::min(usable, traj.size() - 1) - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution coin(0.5);

  std::vector<TrainingSample> samples;
  for (int k = 0; k < options.count; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < options.max_attempts_per_sample && !ok; ++attempt) {
      const size_t ref = pick(rng);
      const double n0 = normal(rng), n1 = normal(rng), n2 = normal(rng), n3 = normal(rng);
      SampleAugment aug;
      if (options.augment) {
        aug.flip = coin(rng);
        aug.rotation = angle(rng);
      }
      const double sd = options.perturbation_std_px;
      TrainingSample sample;
      ok = BuildTrainingSample(traj, truth, plan, ref, sd * Vec2(n0, n1),
                               sd * Vec2(n2, n3), aug, options, &sample);
      if (ok) samples.push_back(std::move(sample));
    }
    if (!ok) throw std::runtime_error("trajectory too short to crop a sample");
  }
  return samples;
}

size_t WriteTrainingSamples(const std::filesystem::path& dir,
                            std::span<const TrainingSample> samples,
                            size_t first_index) {
  std::filesystem::create_directories(dir);
  size_t k = first_index;
  for (const TrainingSample& s : samples) {
    WriteSampleInput(SampleInputPath(dir, k), s.input);
    WriteFlowFile(SampleTargetPath(dir, k), HeaderFor(s.input), s.target);
    ++k;
  }
  return k;
}

}  // namespace locfuse
