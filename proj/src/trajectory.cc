#include "locfuse/trajectory.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace locfuse {

void InertialTrajectory::Validate() const {
  if (speeds.size() != timestamps.size() ||
      headings.size() != timestamps.size()) {
    throw std::invalid_argument("trajectory arrays differ in length");
  }
  for (size_t i = 0; i < timestamps.size(); ++i) {
    if (!std::isfinite(timestamps[i]) || !std::isfinite(speeds[i]) ||
        !std::isfinite(headings[i])) {
      throw std::invalid_argument("non-finite value at frame " +
                                  std::to_string(i));
    }
    if (i > 0 && !(timestamps[i] > timestamps[i - 1])) {
      throw std::invalid_argument("timestamps not strictly increasing at frame " +
                                  std::to_string(i));
    }
    if (speeds[i] < 0.0) {
      throw std::invalid_argument("negative speed at frame " +
                                  std::to_string(i));
    }
  }
}

size_t KnotCount(double duration, double interval) {
  if (!(interval > 0.0)) throw std::invalid_argument("knot interval must be > 0");
  if (duration < 0.0) throw std::invalid_argument("negative duration");
  return static_cast<size_t>(std::ceil(duration / interval)) + 1;
}

KnotWeight LocateKnot(size_t knot_count, double interval, double t) {
  if (knot_count == 0) throw std::invalid_argument("empty knot array");
  if (t < 0.0) throw std::invalid_argument("time before the first knot");
  const double u = t / interval;
  const double last = static_cast<double>(knot_count - 1);
  if (u >= last) return {knot_count - 1, 0.0};
  const size_t k = static_cast<size_t>(std::floor(u));
  return {k, u - static_cast<double>(k)};
}

double InterpolateCorrection(std::span<const double> knots, double interval,
                             double t) {
  const KnotWeight w = LocateKnot(knots.size(), interval, t);
  if (w.alpha == 0.0) return knots[w.index];
  return (1.0 - w.alpha) * knots[w.index] + w.alpha * knots[w.index + 1];
}

CorrectionParams CorrectionParams::Identity(const InertialTrajectory& traj,
                                            double scale_interval,
                                            double angle_interval) {
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  CorrectionParams p;
  p.scale_interval = scale_interval;
  p.angle_interval = angle_interval;
  p.scale_knots.assign(KnotCount(traj.duration(), scale_interval), 1.0);
  p.angle_knots.assign(KnotCount(traj.duration(), angle_interval), 0.0);
  return p;
}

void CorrectionParams::ValidateFor(const InertialTrajectory& traj) const {
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  if (scale_knots.size() < KnotCount(traj.duration(), scale_interval) ||
      angle_knots.size() < KnotCount(traj.duration(), angle_interval)) {
    throw std::invalid_argument("correction knots do not cover the trajectory");
  }
  for (double s : scale_knots) {
    if (!(s > 0.0)) throw std::invalid_argument("scale knots must be positive");
  }
}

PositionSeries Integrate(const InertialTrajectory& traj,
                         const CorrectionParams& params) {
  traj.Validate();
  params.ValidateFor(traj);
  PositionSeries out;
  out.timestamps = traj.timestamps;
  out.positions.resize(traj.size());
  const double t0 = traj.start_time();
  Vec2 p = params.start_offset;
  for (size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.timestamps[i] - t0;
    const double ds =
        InterpolateCorrection(params.scale_knots, params.scale_interval, t);
    const double dh =
        InterpolateCorrection(params.angle_knots, params.angle_interval, t);
    const double heading = traj.headings[i] + dh;
    p += traj.speeds[i] * ds * Vec2(std::cos(heading), std::sin(heading));
    out.positions[i] = p;
  }
  return out;
}

std::vector<FlpFix> SubsampleConstraints(const PositionSeries& series,
                                         size_t stride, double radius) {
  if (series.empty()) throw std::invalid_argument("empty position series");
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  std::vector<FlpFix> fixes;
  fixes.reserve((series.size() - 1) / stride + 1);
  for (size_t f = 0; f < series.size(); f += stride) {
    fixes.push_back({series.timestamps[f], series.positions[f], radius});
  }
  return fixes;
}

size_t NearestFrame(std::span<const double> timestamps, double t) {
  if (timestamps.empty()) throw std::invalid_argument("empty timestamps");
  const auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
  if (it == timestamps.begin()) return 0;
  if (it == timestamps.end()) return timestamps.size() - 1;
  const size_t hi = static_cast<size_t>(it - timestamps.begin());
  const size_t lo = hi - 1;
  return (t - timestamps[lo] <= timestamps[hi] - t) ? lo : hi;
}

Vec2 InterpolatePosition(const PositionSeries& series, double t) {
  if (series.empty()) throw std::invalid_argument("empty position series");
  const auto& ts = series.timestamps;
  if (t <= ts.front()) return series.positions.front();
  if (t >= ts.back()) return series.positions.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const size_t hi = static_cast<size_t>(it - ts.begin());
  const size_t lo = hi - 1;
  const double a = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return (1.0 - a) * series.positions[lo] + a * series.positions[hi];
}

}  // namespace locfuse
