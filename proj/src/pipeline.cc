#include "locfuse/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "locfuse/csv_io.h"
#include "locfuse/exchange.h"

namespace locfuse {

using nlohmann::ordered_json;

FlowBackendKind FlowBackendFromName(const std::string& name) {
  if (name == "none") return FlowBackendKind::kNone;
  if (name == "oracle") return FlowBackendKind::kOracle;
  if (name == "external" || name == "external-exchange") return FlowBackendKind::kExternal;
  throw std::invalid_argument("unknown flow backend: " + name);
}

const char* FlowBackendName(FlowBackendKind kind) {
  switch (kind) {
    case FlowBackendKind::kNone:
      return "none";
    case FlowBackendKind::kOracle:
      return "oracle";
    case FlowBackendKind::kExternal:
      return "external";
  }
  return "none";
}

void PipelineConfig::Validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (self_constraint_stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (self_constraint_radius < 0.0) {
    throw std::invalid_argument("self-constraint radius must be >= 0");
  }
  optimizer.Validate();
}

namespace {

std::filesystem::path Resolve(const std::filesystem::path& base, const ordered_json& j,
                              const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  const std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_absolute() || base.empty() ? p : base / p;
}

OptimizerConfig ParseOptimizer(const ordered_json& j) {
  OptimizerConfig c;
  c.w1 = j.value("w1", c.w1);
  c.w2 = j.value("w2", c.w2);
  c.second_order_gain = j.value("second_order_gain", c.second_order_gain);
  c.scale_interval = j.value("scale_interval", c.scale_interval);
  c.angle_interval = j.value("angle_interval", c.angle_interval);
  c.scale_lower_bound = j.value("scale_lower_bound", c.scale_lower_bound);
  c.scale_upper_bound = j.value("scale_upper_bound", c.scale_upper_bound);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
  c.initial_damping = j.value("initial_damping", c.initial_damping);
  return c;
}

}  // namespace

PipelineConfig ParsePipelineConfig(const std::string& json_text,
                                   const std::filesystem::path& base_dir) {
  const ordered_json j = ordered_json::parse(json_text);
  PipelineConfig c;
  c.trajectory = Resolve(base_dir, j, "trajectory");
  c.fixes = Resolve(base_dir, j, "fixes");
  c.floorplan_image = Resolve(base_dir, j, "floorplan_image");
  c.floorplan_config = Resolve(base_dir, j, "floorplan_config");
  c.ground_truth = Resolve(base_dir, j, "ground_truth");
  c.model_checkpoint = Resolve(base_dir, j, "model_checkpoint");
  if (j.contains("output_dir")) c.output_dir = Resolve(base_dir, j, "output_dir");
  if (j.contains("optimizer")) c.optimizer = ParseOptimizer(j.at("optimizer"));
  c.iterations = j.value("iterations", c.iterations);
  c.self_constraint_stride = j.value("self_constraint_stride", c.self_constraint_stride);
  c.self_constraint_radius = j.value("self_constraint_radius", c.self_constraint_radius);
  c.flow_backend = FlowBackendFromName(j.value("flow_backend", std::string("none")));
  c.write_segments = j.value("write_segments", c.write_segments);
  c.seed = j.value("seed", c.seed);
  if (j.contains("external")) {
    const ordered_json& e = j.at("external");
    c.external.command = e.value("command", std::string());
    c.external.exchange_dir = Resolve(base_dir, e, "exchange_dir");
    c.external.timeout_s = e.value("timeout_s", c.external.timeout_s);
    c.external.poll_interval_s = e.value("poll_interval_s", c.external.poll_interval_s);
  }
  c.Validate();
  return c;
}

PipelineConfig LoadPipelineConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return ParsePipelineConfig(buffer.str(), path.parent_path());
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string PipelineConfigToJson(const PipelineConfig& c) {
  ordered_json j;
  j["trajectory"] = c.trajectory.string();
  j["fixes"] = c.fixes.string();
  j["floorplan_image"] = c.floorplan_image.string();
  j["floorplan_config"] = c.floorplan_config.string();
  if (!c.ground_truth.empty()) j["ground_truth"] = c.ground_truth.string();
  if (!c.model_checkpoint.empty()) j["model_checkpoint"] = c.model_checkpoint.string();
  j["output_dir"] = c.output_dir.string();
  ordered_json o;
  o["w1"] = c.optimizer.w1;
  o["w2"] = c.optimizer.w2;
  o["second_order_gain"] = c.optimizer.second_order_gain;
  o["scale_interval"] = c.optimizer.scale_interval;
  o["angle_interval"] = c.optimizer.angle_interval;
  o["scale_lower_bound"] = c.optimizer.scale_lower_bound;
  o["scale_upper_bound"] = c.optimizer.scale_upper_bound;
  o["max_iterations"] = c.optimizer.max_iterations;
  o["convergence_tol"] = c.optimizer.convergence_tol;
  o["initial_damping"] = c.optimizer.initial_damping;
  j["optimizer"] = o;
  j["iterations"] = c.iterations;
  j["self_constraint_stride"] = c.self_constraint_stride;
  j["self_constraint_radius"] = c.self_constraint_radius;
  j["flow_backend"] = FlowBackendName(c.flow_backend);
  j["write_segments"] = c.write_segments;
  j["seed"] = c.seed;
  if (c.flow_backend == FlowBackendKind::kExternal) {
    ordered_json e;
    e["command"] = c.external.command;
    if (!c.external.exchange_dir.empty()) e["exchange_dir"] = c.external.exchange_dir.string();
    e["timeout_s"] = c.external.timeout_s;
    e["poll_interval_s"] = c.external.poll_interval_s;
    j["external"] = e;
  }
  return j.dump(2);
}

PipelineInputs Ingest(const PipelineConfig& config, std::vector<std::string>* warnings) {
  auto require = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) throw InputError(std::string("missing ") + what + " path");
    if (!std::filesystem::exists(p)) {
      throw InputError(std::string(what) + " not found: " + p.string());
    }
  };
  require(config.trajectory, "trajectory");
  require(config.fixes, "fixes");
  require(config.floorplan_image, "floorplan image");
  require(config.floorplan_config, "floorplan config");

  PipelineInputs in;
  try {
    in.trajectory = ReadTrajectoryCsv(config.trajectory);
    in.trajectory.Validate();
    in.fixes = ReadFixesCsv(config.fixes);
    const FloorplanConfig fc = LoadFloorplanConfig(config.floorplan_config);
    in.plan = LoadFloorplan(config.floorplan_image, fc.legend, fc.registration, fc.threshold);
    if (!config.ground_truth.empty()) {
      require(config.ground_truth, "ground truth");
      in.truth = ReadPositionsCsv(config.ground_truth);
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  if (in.trajectory.size() < 2) {
    throw InputError(config.trajectory.string() + ": need at least 2 frames");
  }
  if (in.fixes.empty()) throw InputError(config.fixes.string() + ": no fixes");

  if (warnings != nullptr) {
    const auto& ts = in.trajectory.timestamps;
    for (size_t i = 1; i < ts.size(); ++i) {
      if (ts[i] - ts[i - 1] > 1.0) {
        warnings->push_back(config.trajectory.string() + ": gap of " +
                            std::to_string(ts[i] - ts[i - 1]) + " s before frame " +
                            std::to_string(i));
      }
    }
    const int64_t background = in.plan.background_count();
    if (background > 0) {
      warnings->push_back(config.floorplan_image.string() + ": " +
                          std::to_string(background) +
                          " pixels matched no legend color (background)");
    }
  }
  return in;
}

std::vector<FlowField> OracleFlowBackend::Predict(std::span<const SegmentSample> segments,
                                                  int /*pass*/) {
  std::vector<FlowField> flows;
  flows.reserve(segments.size());
  for (const SegmentSample& seg : segments) {
    if (seg.frames.last >= truth_.size()) {
      throw BackendUnavailable("oracle ground truth does not cover the segments");
    }
    const Vec2 offset = seg.crop_offset.cast<double>();
    std::vector<Vec2> disp(seg.frames.size());
    for (size_t i = 0; i < seg.frames.size(); ++i) {
      const Vec2 gt = WorldToPixel(truth_.positions[seg.frames.first + i], reg_) - offset;
      disp[i] = gt - seg.frame_pixels[i];
    }
    flows.push_back(PaintFlow(seg.frame_pixels, disp));
  }
  return flows;
}

std::vector<FlowField> ExternalFlowBackend::Predict(std::span<const SegmentSample> segments,
                                                    int pass) {
  namespace fs = std::filesystem;
  const fs::path dir = config_.exchange_dir / ("pass" + std::to_string(pass));
  fs::create_directories(dir);
  for (size_t k = 0; k < segments.size(); ++k) {
    fs::remove(SampleFlowPath(dir, k));
    WriteSampleInput(SampleInputPath(dir, k), segments[k]);
  }
  if (!config_.command.empty()) {
    std::string cmd = config_.command;
    for (size_t at = cmd.find("{dir}"); at != std::string::npos; at = cmd.find("{dir}")) {
      cmd.replace(at, 5, dir.string());
    }
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      throw BackendUnavailable("flow command failed (status " + std::to_string(status) +
                               "): " + cmd);
    }
  }
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(config_.timeout_s);
  while (true) {
    bool all = true;
    for (size_t k = 0; k < segments.size() && all; ++k) {
      all = fs::exists(SampleFlowPath(dir, k));
    }
    if (all) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      throw BackendUnavailable("timed out waiting for flow files in " + dir.string());
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(config_.poll_interval_s));
  }
  std::vector<FlowField> flows;
  for (size_t k = 0; k < segments.size(); ++k) {
    ExchangeHeader header;
    try {
      flows.push_back(ReadFlowFile(SampleFlowPath(dir, k), &header));
    } catch (const std::exception& e) {
      throw BackendUnavailable(e.what());
    }
    if (!(header.frame_range == segments[k].frames)) {
      throw BackendUnavailable(SampleFlowPath(dir, k).string() +
                               ": frame range does not match its input");
    }
  }
  return flows;
}

PositionSeries ApplyFlowStep(const PositionSeries& estimate, const FloorplanRaster& plan,
                             FlowBackend& backend, int pass,
                             std::vector<SegmentSample>* segments_out) {
  std::vector<SegmentSample> segments = BuildSegmentSamples(estimate, plan);
  const std::vector<FlowField> flows = backend.Predict(segments, pass);
  if (flows.size() != segments.size()) {
    throw BackendUnavailable("flow backend returned the wrong number of flows");
  }
  std::vector<std::vector<Vec2>> corrections(segments.size());
  for (size_t k = 0; k < segments.size(); ++k) {
    corrections[k] = ApplyFlow(segments[k], flows[k], plan.registration());
  }
  const std::vector<Vec2> stitched = Stitch(segments, corrections, estimate.size());
  PositionSeries refined = estimate;
  for (size_t f = 0; f < refined.size(); ++f) refined.positions[f] += stitched[f];
  if (segments_out != nullptr) *segments_out = std::move(segments);
  return refined;
}

PipelineResult RunPipeline(const PipelineInputs& inputs, const PipelineConfig& config,
                           FlowBackend* backend) {
  config.Validate();
  PipelineResult result;
  std::vector<FlpFix> constraints = inputs.fixes;
  for (int pass = 1; pass <= config.iterations; ++pass) {
    PassOutput out;
    out.constraint_count = constraints.size();
    try {
      const CorrectionParams init =
          pass == 1 ? ProgressiveInitialParams(inputs.trajectory, constraints, config.optimizer)
                    : result.passes.back().params;
      SolveResult solved = Solve(inputs.trajectory, constraints, config.optimizer, init);
      out.params = std::move(solved.params);
      out.report = solved.report;
    } catch (const std::invalid_argument& e) {
      throw SolverError(e.what());
    }
    if (!std::isfinite(out.report.final_cost)) {
      throw SolverError("pass " + std::to_string(pass) + " ended with a non-finite cost");
    }
    out.optimized = Integrate(inputs.trajectory, out.params);
    if (backend != nullptr) {
      std::vector<SegmentSample> segments;
      out.refined = ApplyFlowStep(out.optimized, inputs.plan, *backend, pass, &segments);
      out.segment_count = segments.size();
    } else {
      out.refined = out.optimized;
    }
    constraints = SubsampleConstraints(out.refined, config.self_constraint_stride,
                                       config.self_constraint_radius);
    result.passes.push_back(std::move(out));
  }
  result.final_positions = result.passes.back().refined;
  return result;
}

PositionSeries UncorrectedBaseline(const InertialTrajectory& traj,
                                   std::span<const FlpFix> fixes, double window_s) {
  if (fixes.empty()) throw std::invalid_argument("no fixes");
  std::vector<FlpFix> early;
  for (const FlpFix& f : fixes) {
    if (f.t <= traj.start_time() + window_s + 1e-9) early.push_back(f);
  }
  if (early.empty()) early.push_back(fixes.front());
  PositionSeries raw = Integrate(traj, CorrectionParams::Identity(traj));
  const RigidTransform2 rigid = InitialAlignment(raw, early);
  for (Vec2& p : raw.positions) p = rigid(p);
  return raw;
}

std::vector<NamedReport> CompareBaselines(const PipelineInputs& inputs,
                                          const PipelineResult& result,
                                          std::span<const GtPoint> gt) {
  std::vector<NamedReport> rows;
  rows.push_back({"uncorrected",
                  ComputeErrors(UncorrectedBaseline(inputs.trajectory, inputs.fixes), gt)});
  rows.push_back({"flp_polyline",
                  ComputeErrors(FlpPolyline(inputs.fixes, inputs.trajectory.timestamps), gt)});
  const PassOutput& first = result.passes.front();
  rows.push_back({"optimized", ComputeErrors(first.optimized, gt)});
  rows.push_back({"optimized_flow", ComputeErrors(first.refined, gt)});
  if (result.passes.size() > 1) {
    rows.push_back({"two_pass", ComputeErrors(result.final_positions, gt)});
  }
  return rows;
}

namespace {

std::string SegmentManifest(std::span<const SegmentSample> segments) {
  ordered_json j = ordered_json::array();
  for (size_t k = 0; k < segments.size(); ++k) {
    ordered_json s;
    s["index"] = k;
    s["frame_range"] = {segments[k].frames.first, segments[k].frames.last};
    s["crop_offset"] = {segments[k].crop_offset.x(), segments[k].crop_offset.y()};
    s["span_s"] = segments[k].span;
    j.push_back(s);
  }
  return j.dump(2);
}

// Records the segments of every pass for the output directory.
class RecordingBackend : public FlowBackend {
 public:
  RecordingBackend(FlowBackend* inner, std::filesystem::path dir, bool write_bins)
      : inner_(inner), dir_(std::move(dir)), write_bins_(write_bins) {}
  std::vector<FlowField> Predict(std::span<const SegmentSample> segments,
                                 int pass) override {
    const std::filesystem::path pass_dir = dir_ / ("pass" + std::to_string(pass));
    std::filesystem::create_directories(pass_dir);
    WriteFileAtomic(pass_dir / "segments.json", SegmentManifest(segments));
    if (write_bins_) {
      for (size_t k = 0; k < segments.size(); ++k) {
        WriteSampleInput(SampleInputPath(pass_dir, k), segments[k]);
      }
    }
    return inner_->Predict(segments, pass);
  }

 private:
  FlowBackend* inner_;
  std::filesystem::path dir_;
  bool write_bins_;
};

PositionSeries ResampleAt(const PositionSeries& series, std::span<const double> timestamps) {
  PositionSeries out;
  out.timestamps.assign(timestamps.begin(), timestamps.end());
  for (double t : timestamps) out.positions.push_back(InterpolatePosition(series, t));
  return out;
}

}  // namespace

RunSummary RunPipelineFromConfig(const PipelineConfig& config) {
  namespace fs = std::filesystem;
  RunSummary summary;
  const PipelineInputs inputs = Ingest(config, &summary.warnings);
  fs::create_directories(config.output_dir);
  const fs::path segment_dir = config.output_dir / "segments";

  std::unique_ptr<FlowBackend> backend;
  switch (config.flow_backend) {
    case FlowBackendKind::kNone:
      break;
    case FlowBackendKind::kOracle:
      if (!inputs.truth) {
        throw BackendUnavailable("the oracle flow backend needs ground_truth");
      }
      backend = std::make_unique<OracleFlowBackend>(
          ResampleAt(*inputs.truth, inputs.trajectory.timestamps),
          inputs.plan.registration());
      break;
    case FlowBackendKind::kExternal: {
      ExternalBackendConfig ext = config.external;
      if (ext.exchange_dir.empty()) ext.exchange_dir = segment_dir;
      if (!config.model_checkpoint.empty()) {
        for (size_t at = ext.command.find("{ckpt}"); at != std::string::npos;
             at = ext.command.find("{ckpt}")) {
          ext.command.replace(at, 6, config.model_checkpoint.string());
        }
      }
      backend = std::make_unique<ExternalFlowBackend>(ext);
      break;
    }
  }
  std::unique_ptr<FlowBackend> recording;
  if (backend) {
    recording = std::make_unique<RecordingBackend>(
        backend.get(), segment_dir,
        config.write_segments && config.flow_backend != FlowBackendKind::kExternal);
  }

  summary.result = RunPipeline(inputs, config, recording.get());

  WritePositionsCsv(config.output_dir / "positions.csv", summary.result.final_positions);
  for (size_t k = 0; k < summary.result.passes.size(); ++k) {
    WriteFileAtomic(config.output_dir / ("solver_iter" + std::to_string(k + 1) + ".json"),
                    SolverReportToJson(summary.result.passes[k].report) + "\n");
  }

  ordered_json report;
  report["flow_backend"] = FlowBackendName(config.flow_backend);
  ordered_json passes = ordered_json::array();
  for (const PassOutput& p : summary.result.passes) {
    ordered_json j;
    j["constraints"] = p.constraint_count;
    j["segments"] = p.segment_count;
    j["converged"] = p.report.converged;
    j["final_cost"] = p.report.final_cost;
    passes.push_back(j);
  }
  report["passes"] = passes;
  if (inputs.truth) {
    const std::vector<GtPoint> gt = SubsampleGroundTruth(*inputs.truth, 1.0);
    summary.reports = CompareBaselines(inputs, summary.result, gt);
    report["errors"] = ordered_json::parse(ComparisonJson(summary.reports));
  }
  report["warnings"] = summary.warnings;
  WriteFileAtomic(config.output_dir / "report.json", report.dump(2) + "\n");
  return summary;
}

}  // namespace locfuse
