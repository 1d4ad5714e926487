// The two-pass fusion pipeline: align the inertial trajectory to position
// fixes, refine it with floorplan correction flows, then repeat with
// pseudo-fixes sampled from the refined history.

#ifndef LOCFUSE_PIPELINE_H_
#define LOCFUSE_PIPELINE_H_

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "locfuse/eval.h"
#include "locfuse/geo.h"
#include "locfuse/optimizer.h"
#include "locfuse/raster.h"
#include "locfuse/trajectory.h"

namespace locfuse {

// Failure classes the CLI maps to exit codes 2, 3 and 4.
class InputError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class BackendUnavailable : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FlowBackendKind { kNone, kOracle, kExternal };

FlowBackendKind FlowBackendFromName(const std::string& name);
const char* FlowBackendName(FlowBackendKind kind);

struct ExternalBackendConfig {
  // Run through the shell once per pass; "{dir}" is replaced by the exchange
  // directory. Empty: only wait for flow files to appear.
  std::string command;
  std::filesystem::path exchange_dir;  // default: <output>/segments
  double timeout_s = 600.0;
  double poll_interval_s = 0.25;
};

struct PipelineConfig {
  std::filesystem::path trajectory;
  std::filesystem::path fixes;
  std::filesystem::path floorplan_image;
  std::filesystem::path floorplan_config;
  std::filesystem::path ground_truth;  // optional
  std::filesystem::path model_checkpoint;  // optional, passed to the command
  std::filesystem::path output_dir = "out";

  OptimizerConfig optimizer;
  int iterations = 2;
  size_t self_constraint_stride = 200;
  double self_constraint_radius = 2.0;
  FlowBackendKind flow_backend = FlowBackendKind::kNone;
  ExternalBackendConfig external;
  bool write_segments = false;
  uint64_t seed = 0;

  void Validate() const;
};

// Relative paths resolve against the config file's directory.
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path);
PipelineConfig ParsePipelineConfig(const std::string& json_text,
                                   const std::filesystem::path& base_dir);
std::string PipelineConfigToJson(const PipelineConfig& config);

struct PipelineInputs {
  InertialTrajectory trajectory;
  std::vector<FlpFix> fixes;
  FloorplanRaster plan;
  std::optional<PositionSeries> truth;
};

// Reads and validates every input. Throws InputError with file and line on a
// schema violation; appends a warning for each timestamp gap above 1 s.
PipelineInputs Ingest(const PipelineConfig& config, std::vector<std::string>* warnings);

// Produces one flow field per segment sample.
class FlowBackend {
 public:
  virtual ~FlowBackend() = default;
  virtual std::vector<FlowField> Predict(std::span<const SegmentSample> segments,
                                         int pass) = 0;
};

// Flows that move every frame onto the supplied ground truth. `truth` must be
// frame-aligned with the series the segments are built from.
class OracleFlowBackend : public FlowBackend {
 public:
  OracleFlowBackend(PositionSeries truth, GeoRegistration reg)
      : truth_(std::move(truth)), reg_(reg) {}
  std::vector<FlowField> Predict(std::span<const SegmentSample> segments,
                                 int pass) override;

 private:
  PositionSeries truth_;
  GeoRegistration reg_;
};

// Writes seg_<k>_input.bin files, runs the configured command and waits for
// the matching seg_<k>_flow.bin files. Throws BackendUnavailable when the
// command fails or the timeout expires.
class ExternalFlowBackend : public FlowBackend {
 public:
  explicit ExternalFlowBackend(ExternalBackendConfig config) : config_(std::move(config)) {}
  std::vector<FlowField> Predict(std::span<const SegmentSample> segments,
                                 int pass) override;

 private:
  ExternalBackendConfig config_;
};

// Segments `estimate`, asks the backend for flows and returns the estimate
// moved by the stitched per-frame corrections.
PositionSeries ApplyFlowStep(const PositionSeries& estimate, const FloorplanRaster& plan,
                             FlowBackend& backend, int pass,
                             std::vector<SegmentSample>* segments = nullptr);

struct PassOutput {
  SolverReport report;
  CorrectionParams params;
  size_t constraint_count = 0;
  size_t segment_count = 0;
  PositionSeries optimized;
  PositionSeries refined;  // equal to `optimized` without a backend
};

struct PipelineResult {
  std::vector<PassOutput> passes;
  PositionSeries final_positions;
};

// Core loop on in-memory inputs. `backend` may be null (optimization only).
PipelineResult RunPipeline(const PipelineInputs& inputs, const PipelineConfig& config,
                           FlowBackend* backend);

// Error reports for the uncorrected, FLP polyline, optimized,
// optimized + flow and full two-pass variants against `gt`.
std::vector<NamedReport> CompareBaselines(const PipelineInputs& inputs,
                                          const PipelineResult& result,
                                          std::span<const GtPoint> gt);

// The inertial trajectory rigidly aligned to the fixes of its first minute.
PositionSeries UncorrectedBaseline(const InertialTrajectory& traj,
                                   std::span<const FlpFix> fixes,
                                   double window_s = 60.0);

struct RunSummary {
  PipelineResult result;
  std::vector<NamedReport> reports;
  std::vector<std::string> warnings;
};

// Ingest, run and write positions.csv, solver_iter<k>.json, report.json and
// segments/ under config.output_dir.
RunSummary RunPipelineFromConfig(const PipelineConfig& config);

}  // namespace locfuse

#endif  // LOCFUSE_PIPELINE_H_
