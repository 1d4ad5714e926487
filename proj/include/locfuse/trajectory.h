// Inertial trajectories, knot-based corrections and the corrected-position
// integration model.

#ifndef LOCFUSE_TRAJECTORY_H_
#define LOCFUSE_TRAJECTORY_H_

#include <cstddef>
#include <span>
#include <vector>

#include "locfuse/geo.h"

namespace locfuse {

// Per-frame speed and heading from an inertial navigation model. `speeds` is
// the per-frame displacement magnitude (meters per frame step), so positions
// are a plain cumulative sum with no dt factor.
struct InertialTrajectory {
  std::vector<double> timestamps;  // seconds, strictly increasing
  std::vector<double> speeds;      // meters per frame
  std::vector<double> headings;    // radians

  size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }
  double start_time() const { return timestamps.front(); }
  double duration() const { return timestamps.back() - timestamps.front(); }

  // Throws std::invalid_argument on length mismatch, non-increasing
  // timestamps or negative speeds.
  void Validate() const;
};

struct PositionSeries {
  std::vector<double> timestamps;
  std::vector<Vec2> positions;

  size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }
};

// A timestamped absolute position fix with an accuracy radius, in world
// meters.
struct FlpFix {
  double t = 0.0;
  Vec2 position = Vec2::Zero();
  double accuracy = 0.0;
};

inline constexpr double kDefaultScaleInterval = 100.0;
inline constexpr double kDefaultAngleInterval = 20.0;

// Number of knots needed to cover `duration` seconds: ceil(duration/interval)+1.
size_t KnotCount(double duration, double interval);

// Position of time `t` (seconds since the knot anchor) on a knot grid: the
// value is (1 - alpha) * knots[index] + alpha * knots[index + 1]. Past the last
// knot, index is the last knot and alpha is 0.
struct KnotWeight {
  size_t index = 0;
  double alpha = 0.0;
};
KnotWeight LocateKnot(size_t knot_count, double interval, double t);

// Linear interpolation between knots placed at k * interval; clamps to the
// last knot past the end. Throws on empty knots or negative t.
double InterpolateCorrection(std::span<const double> knots, double interval,
                             double t);

// Scale and heading corrections on knot grids anchored at the trajectory's
// first timestamp, plus the position of the trajectory start.
struct CorrectionParams {
  std::vector<double> scale_knots;
  std::vector<double> angle_knots;  // radians
  Vec2 start_offset = Vec2::Zero();
  double scale_interval = kDefaultScaleInterval;
  double angle_interval = kDefaultAngleInterval;

  // All scales 1, all angles 0, zero offset, sized to cover `traj`.
  static CorrectionParams Identity(const InertialTrajectory& traj,
                                   double scale_interval = kDefaultScaleInterval,
                                   double angle_interval = kDefaultAngleInterval);

  // Throws std::invalid_argument if the grids do not cover `traj` or a scale
  // knot is not positive.
  void ValidateFor(const InertialTrajectory& traj) const;
};

// P_f = start_offset + sum_{i <= f} s_i * ds(t_i) * [cos(h_i + dh(t_i)),
//                                                    sin(h_i + dh(t_i))].
// The sum includes frame 0's own step, so frame 0 sits at start_offset only
// when its speed is zero.
PositionSeries Integrate(const InertialTrajectory& traj,
                         const CorrectionParams& params);

// Fixes at frames 0, stride, 2 * stride, ... each carrying `radius`.
std::vector<FlpFix> SubsampleConstraints(const PositionSeries& series,
                                         size_t stride, double radius);

// Index of the frame temporally nearest to `t`; ties go to the earlier frame.
size_t NearestFrame(std::span<const double> timestamps, double t);

// Position at time `t` by linear interpolation between frames, clamped to the
// end frames.
Vec2 InterpolatePosition(const PositionSeries& series, double t);

}  // namespace locfuse

#endif  // LOCFUSE_TRAJECTORY_H_
