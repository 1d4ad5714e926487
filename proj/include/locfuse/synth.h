// Synthetic ground truth, inertial corruption, simulated position fixes and
// flow-network training samples.

#ifndef LOCFUSE_SYNTH_H_
#define LOCFUSE_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "locfuse/geo.h"
#include "locfuse/raster.h"
#include "locfuse/trajectory.h"

namespace locfuse {

using Rng = std::mt19937_64;

// Independent stream derived from a seed and a stream name, so adding a new
// consumer of randomness never shifts the draws of an existing one.
Rng MakeRng(uint64_t seed, std::string_view stream);

struct SplineTrajectory {
  InertialTrajectory inertial;
  PositionSeries truth;
};

// Natural cubic spline through the waypoints (chord-length parameterized),
// resampled at constant arc-length steps of speed / rate meters. Frame k > 0
// carries the displacement from frame k - 1 as (speed, heading); frame 0 has
// zero speed and the initial tangent heading, so integrating the emitted
// trajectory from truth[0] reproduces truth. When max_duration > 0 the output
// is truncated to that many seconds. Throws on fewer than two waypoints,
// coincident consecutive waypoints or a non-positive speed or rate.
SplineTrajectory GenerateSplineTrajectory(std::span<const Vec2> waypoints,
                                          double speed, double rate,
                                          double max_duration = 0.0);

struct CorruptionSpec {
  double heading_drift_rate = 0.0;  // rad/s
  double drift_walk_std = 0.0;      // rad/sqrt(s)
  double scale_factor = 1.0;
  uint64_t seed = 0;
};

// Uniform drift in [-1, 1] deg/s, walk 0.05 deg/sqrt(s), scale in
// [0.85, 1.2].
CorruptionSpec RandomCorruption(uint64_t seed);

// headings += drift * (t - t0) + random walk; speeds *= scale.
InertialTrajectory Corrupt(const InertialTrajectory& traj,
                           const CorruptionSpec& spec);

inline constexpr double kDefaultFlpNoiseStd = 5.0;
inline constexpr double kDefaultFlpAccuracy = 10.0;

// Fixes at t0, t0 + interval, ... up to and including the last timestamp,
// each the interpolated truth plus isotropic Gaussian noise.
std::vector<FlpFix> SimulateFlp(const PositionSeries& truth, double interval,
                                double noise_std, double reported_accuracy,
                                uint64_t seed);

// Synthetic mall-like floorplan: a square grid of corridors separated by
// walled room blocks. Corridor centerlines lie at (k + 0.5) * spacing meters.
struct GridPlanSpec {
  double size_m = 250.0;
  double spacing_m = 25.0;
  double corridor_width_m = 6.0;
  double wall_m = 0.8;
  double pixels_per_meter = 2.5;
};
// The registration maps world (0, size) to pixel (0, 0) with rows growing
// southward.
FloorplanRaster MakeGridFloorplan(const GridPlanSpec& spec);
GeoRegistration GridPlanRegistration(const GridPlanSpec& spec);

// Random walk over corridor intersections without immediate backtracking,
// long enough for `path_length` meters.
std::vector<Vec2> RandomGridWaypoints(const GridPlanSpec& spec,
                                      double path_length, uint64_t seed);

// Inserts evenly spaced points so no two consecutive waypoints are more than
// `max_spacing` apart. A spline through the result follows straight
// corridors and only rounds the turns.
std::vector<Vec2> DensifyWaypoints(std::span<const Vec2> waypoints, double max_spacing);
inline constexpr double kGridWaypointSpacing = 2.5;

// One benchmark instance: ground truth on the grid plan, its corrupted
// inertial version and the corruption used.
struct SyntheticInstance {
  SplineTrajectory clean;
  InertialTrajectory corrupted;
  CorruptionSpec corruption;
};
SyntheticInstance MakeSyntheticInstance(const GridPlanSpec& plan,
                                        double duration_s, double rate_hz,
                                        double speed_mps, uint64_t seed);

struct TrainingSampleOptions {
  int count = 20;
  double reference_fraction = 0.85;
  double border_margin_px = 5.0;
  double perturbation_std_px = 25.0;
  bool augment = true;
  int max_attempts_per_sample = 50;
};

// Shared geometric augmentation of one sample, applied about the window
// center: optional horizontal mirror, then rotation.
struct SampleAugment {
  bool flip = false;
  double rotation = 0.0;  // radians
};

struct TrainingSample {
  SegmentSample input;
  FlowField target;
  // Per-frame warped and ground-truth positions in sample pixels; target
  // displacement for frame i is truth_pixels[i] - warped_pixels[i].
  std::vector<Vec2> warped_pixels;
  std::vector<Vec2> truth_pixels;
};

// Builds one sample from a reference frame. `first_noise` and `last_noise`
// perturb the segment's end points (plan pixels). Returns false when the
// segment cannot be cropped or leaves the window after augmentation.
bool BuildTrainingSample(const InertialTrajectory& traj, const PositionSeries& truth,
                         const FloorplanRaster& plan, size_t reference_frame,
                         const Vec2& first_noise, const Vec2& last_noise,
                         const SampleAugment& augment,
                         const TrainingSampleOptions& options, TrainingSample* out);

std::vector<TrainingSample> MakeTrainingSamples(const InertialTrajectory& traj,
                                                const PositionSeries& truth,
                                                const FloorplanRaster& plan,
                                                const TrainingSampleOptions& options,
                                                uint64_t seed);

// Writes seg_<k>_input.bin and seg_<k>_target.bin for every sample, numbering
// from `first_index`. Returns the next free index.
size_t WriteTrainingSamples(const std::filesystem::path& dir,
                            std::span<const TrainingSample> samples,
                            size_t first_index = 0);

}  // namespace locfuse

#endif  // LOCFUSE_SYNTH_H_
