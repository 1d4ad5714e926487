// locfuse command-line entry point.
//
//   locfuse run --config run.json
//   locfuse synth {floorplan,trajectory,corrupt,flp,samples,scenario} ...
//   locfuse eval --estimate positions.csv --gt truth.csv [--plot out.png ...]
//   locfuse plot --positions positions.csv --floorplan-image plan.png ...
//
// Exit codes: 0 success, 1 usage or unexpected error, 2 bad input, 3 solver
// failure, 4 flow backend unavailable.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include "CLI11.hpp"
#include "locfuse/csv_io.h"
#include "locfuse/exchange.h"
#include "locfuse/eval.h"
#include "locfuse/geo.h"
#include "locfuse/pipeline.h"
#include "locfuse/plot.h"
#include "locfuse/png_io.h"
#include "locfuse/synth.h"

namespace fs = std::filesystem;
using namespace locfuse;

namespace {

struct Globals {
  std::string config;
  uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
};

// Reader failures on user-supplied files are input errors.
template <typename F>
auto AsInput(F&& read) {
  try {
    return read();
  } catch (const InputError&) {
    throw;
  } catch (const std::runtime_error& ex) {
    throw InputError(ex.what());
  }
}

FloorplanRaster LoadPlan(const std::string& image, const std::string& config) {
  return AsInput([&] {
    const FloorplanConfig fc = LoadFloorplanConfig(config);
    return LoadFloorplan(image, fc.legend, fc.registration, fc.threshold);
  });
}

PositionSeries ReadPositions(const std::string& path) {
  return AsInput([&] { return ReadPositionsCsv(path); });
}

InertialTrajectory ReadTrajectory(const std::string& path) {
  return AsInput([&] { return ReadTrajectoryCsv(path); });
}

void WritePlan(const GridPlanSpec& spec, const fs::path& image, const fs::path& config) {
  WritePng(image, FloorplanImage(MakeGridFloorplan(spec)));
  FloorplanConfig fc;
  fc.registration = GridPlanRegistration(spec);
  fc.legend = DefaultLegend();
  WriteFileAtomic(config, FloorplanConfigToJson(fc) + "\n");
}

void EnsureParent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Per-subcommand option state; CLI11 binds to these by reference.
struct RunArgs {
  std::string out;
  std::string backend;
  int iterations = 0;
};

struct SynthArgs {
  std::string out_image = "plan.png", out_plan_config = "plan.json";
  double duration = 600.0, rate = 50.0, speed = 1.2;
  std::string out_truth = "truth.csv", out_trajectory = "trajectory.csv";
  std::string in, out;
  double drift_deg = NAN, walk_deg = NAN, scale = NAN;
  std::string truth;
  double interval = 60.0, noise = kDefaultFlpNoiseStd, accuracy = kDefaultFlpAccuracy;
  std::string trajectory, plan_image, plan_config;
  int count = 20;
  bool no_augment = false;
  std::string backend = "none";
};

struct EvalArgs {
  std::string estimate, gt, json, plot, plan_image, plan_config;
  bool sparse = false;
};

int DoRun(const Globals& g, const RunArgs& a) {
  if (g.config.empty()) throw InputError("run needs --config");
  PipelineConfig config = LoadPipelineConfig(g.config);
  if (!a.out.empty()) config.output_dir = a.out;
  if (!a.backend.empty()) config.flow_backend = FlowBackendFromName(a.backend);
  if (a.iterations > 0) config.iterations = a.iterations;
  if (g.seed_set) config.seed = g.seed;
  const RunSummary summary = RunPipelineFromConfig(config);
  for (const std::string& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  if (g.verbose) {
    for (size_t k = 0; k < summary.result.passes.size(); ++k) {
      const PassOutput& p = summary.result.passes[k];
      std::cerr << "pass " << k + 1 << ": " << p.constraint_count << " constraints, "
                << p.report.iterations << " iterations, cost " << p.report.initial_cost
                << " -> " << p.report.final_cost << " (" << p.report.termination << "), "
                << p.segment_count << " segments\n";
    }
  }
  if (!summary.reports.empty()) std::cout << ComparisonTable(summary.reports);
  std::cout << "wrote " << (config.output_dir / "positions.csv").string() << "\n";
  return 0;
}

int DoScenario(const Globals& g, const SynthArgs& a) {
  const fs::path dir = a.out.empty() ? fs::path("scenario") : fs::path(a.out);
  fs::create_directories(dir);
  const GridPlanSpec spec;
  WritePlan(spec, dir / "plan.png", dir / "plan.json");
  const SyntheticInstance inst = MakeSyntheticInstance(spec, a.duration, a.rate, a.speed, g.seed);
  WritePositionsCsv(dir / "truth.csv", inst.clean.truth);
  WriteTrajectoryCsv(dir / "trajectory.csv", inst.corrupted);
  WriteFixesCsv(dir / "fixes.csv",
                SimulateFlp(inst.clean.truth, a.interval, a.noise, a.accuracy, g.seed));
  PipelineConfig config;
  config.trajectory = "trajectory.csv";
  config.fixes = "fixes.csv";
  config.floorplan_image = "plan.png";
  config.floorplan_config = "plan.json";
  config.ground_truth = "truth.csv";
  config.output_dir = "out";
  config.flow_backend = FlowBackendFromName(a.backend);
  config.seed = g.seed;
  WriteFileAtomic(dir / "config.json", PipelineConfigToJson(config) + "\n");
  std::cout << "wrote scenario to " << dir.string() << "\n";
  return 0;
}

int DoEval(const EvalArgs& a) {
  const PositionSeries estimate = ReadPositions(a.estimate);
  const PositionSeries truth = ReadPositions(a.gt);
  const std::vector<GtPoint> gt = a.sparse ? ToGtPoints(truth) : SubsampleGroundTruth(truth);
  std::vector<NamedReport> rows{{"estimate", ComputeErrors(estimate, gt)}};
  std::cout << ComparisonTable(rows);
  if (!a.json.empty()) {
    EnsureParent(a.json);
    WriteFileAtomic(a.json, ErrorReportToJson(rows.front().report, true) + "\n");
  }
  if (!a.plot.empty()) {
    if (a.plan_image.empty() || a.plan_config.empty()) {
      throw InputError("--plot needs --floorplan-image and --floorplan-config");
    }
    EnsureParent(a.plot);
    WritePng(a.plot, RenderTrajectoryPlot(LoadPlan(a.plan_image, a.plan_config), estimate, gt));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inertial trajectory geo-localization with position fixes and floorplans"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config JSON");
  CLI::Option* seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run the fusion pipeline");
  run->add_option("--out", run_args.out, "Override the output directory");
  run->add_option("--backend", run_args.backend, "Override the flow backend (none, oracle, external)");
  run->add_option("--iterations", run_args.iterations, "Override the pass count");

  SynthArgs s;
  CLI::App* synth = app.add_subcommand("synth", "Synthetic data generation");
  synth->require_subcommand(1);

  CLI::App* s_plan = synth->add_subcommand("floorplan", "Write the grid floorplan and its config");
  s_plan->add_option("--out-image", s.out_image);
  s_plan->add_option("--out-config", s.out_plan_config);

  CLI::App* s_traj = synth->add_subcommand("trajectory", "Spline ground truth on the grid plan");
  s_traj->add_option("--duration", s.duration, "Seconds");
  s_traj->add_option("--rate", s.rate, "Frames per second");
  s_traj->add_option("--speed", s.speed, "Walking speed, m/s");
  s_traj->add_option("--out-truth", s.out_truth);
  s_traj->add_option("--out-trajectory", s.out_trajectory, "Clean inertial trajectory");

  CLI::App* s_corrupt = synth->add_subcommand("corrupt", "Add heading drift and scale error");
  s_corrupt->add_option("--in", s.in)->required();
  s_corrupt->add_option("--out", s.out)->required();
  s_corrupt->add_option("--drift", s.drift_deg, "Heading drift, deg/s (default random)");
  s_corrupt->add_option("--walk", s.walk_deg, "Drift walk, deg/sqrt(s) (default 0.05)");
  s_corrupt->add_option("--scale", s.scale, "Speed scale factor (default random)");

  CLI::App* s_flp = synth->add_subcommand("flp", "Simulated position fixes");
  s_flp->add_option("--truth", s.truth)->required();
  s_flp->add_option("--out", s.out)->required();
  s_flp->add_option("--interval", s.interval, "Seconds between fixes");
  s_flp->add_option("--noise", s.noise, "Noise std, m");
  s_flp->add_option("--accuracy", s.accuracy, "Reported accuracy, m");

  CLI::App* s_samples = synth->add_subcommand("samples", "Flow training samples");
  s_samples->add_option("--trajectory", s.trajectory)->required();
  s_samples->add_option("--truth", s.truth)->required();
  s_samples->add_option("--floorplan-image", s.plan_image)->required();
  s_samples->add_option("--floorplan-config", s.plan_config)->required();
  s_samples->add_option("--out", s.out)->required();
  s_samples->add_option("--count", s.count);
  s_samples->add_flag("--no-augment", s.no_augment);

  CLI::App* s_scenario =
      synth->add_subcommand("scenario", "Plan, truth, corrupted trajectory, fixes and config");
  s_scenario->add_option("--out", s.out, "Directory (default scenario)");
  s_scenario->add_option("--duration", s.duration);
  s_scenario->add_option("--rate", s.rate);
  s_scenario->add_option("--speed", s.speed);
  s_scenario->add_option("--interval", s.interval);
  s_scenario->add_option("--noise", s.noise);
  s_scenario->add_option("--accuracy", s.accuracy);
  s_scenario->add_option("--backend", s.backend, "Flow backend written to config.json");

  EvalArgs e;
  CLI::App* eval = app.add_subcommand("eval", "Error report of an estimate against ground truth");
  eval->add_option("--estimate", e.estimate)->required();
  eval->add_option("--gt", e.gt)->required();
  eval->add_flag("--sparse", e.sparse, "Use every gt row instead of 1 Hz subsampling");
  eval->add_option("--json", e.json, "Write the report JSON");
  eval->add_option("--plot", e.plot, "Write a PNG over the floorplan");
  eval->add_option("--floorplan-image", e.plan_image);
  eval->add_option("--floorplan-config", e.plan_config);

  EvalArgs p;
  CLI::App* plot = app.add_subcommand("plot", "Render positions over the floorplan");
  plot->add_option("--positions", p.estimate)->required();
  plot->add_option("--floorplan-image", p.plan_image)->required();
  plot->add_option("--floorplan-config", p.plan_config)->required();
  plot->add_option("--gt", p.gt);
  plot->add_option("--out", p.plot)->required();

  for (CLI::App* sub : {run, synth, s_plan, s_traj, s_corrupt, s_flp, s_samples, s_scenario,
                        eval, plot}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*run) return DoRun(g, run_args);
    if (*s_plan) {
      WritePlan(GridPlanSpec{}, s.out_image, s.out_plan_config);
      return 0;
    }
    if (*s_traj) {
      const GridPlanSpec spec;
      const std::vector<Vec2> wps = DensifyWaypoints(
          RandomGridWaypoints(spec, s.speed * s.duration + 3.0 * spec.spacing_m, g.seed),
          kGridWaypointSpacing);
      const SplineTrajectory traj = GenerateSplineTrajectory(wps, s.speed, s.rate, s.duration);
      WritePositionsCsv(s.out_truth, traj.truth);
      WriteTrajectoryCsv(s.out_trajectory, traj.inertial);
      return 0;
    }
    if (*s_corrupt) {
      CorruptionSpec spec = RandomCorruption(g.seed);
      const double deg = std::numbers::pi / 180.0;
      if (!std::isnan(s.drift_deg)) spec.heading_drift_rate = s.drift_deg * deg;
      if (!std::isnan(s.walk_deg)) spec.drift_walk_std = s.walk_deg * deg;
      if (!std::isnan(s.scale)) spec.scale_factor = s.scale;
      WriteTrajectoryCsv(s.out, Corrupt(ReadTrajectory(s.in), spec));
      return 0;
    }
    if (*s_flp) {
      WriteFixesCsv(s.out, SimulateFlp(ReadPositions(s.truth), s.interval, s.noise,
                                       s.accuracy, g.seed));
      return 0;
    }
    if (*s_samples) {
      TrainingSampleOptions options;
      options.count = s.count;
      options.augment = !s.no_augment;
      const std::vector<TrainingSample> samples =
          MakeTrainingSamples(ReadTrajectory(s.trajectory), ReadPositions(s.truth),
                              LoadPlan(s.plan_image, s.plan_config), options, g.seed);
      fs::create_directories(s.out);
      WriteTrainingSamples(s.out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << s.out << "\n";
      return 0;
    }
    if (*s_scenario) return DoScenario(g, s);
    if (*eval) return DoEval(e);
    if (*plot) {
      std::vector<GtPoint> gt;
      if (!p.gt.empty()) gt = SubsampleGroundTruth(ReadPositions(p.gt));
      EnsureParent(p.plot);
      WritePng(p.plot, RenderTrajectoryPlot(LoadPlan(p.plan_image, p.plan_config),
                                            ReadPositions(p.estimate), gt));
      return 0;
    }
  } catch (const InputError& ex) {
    std::cerr << "input error: " << ex.what() << "\n";
    return 2;
  } catch (const SolverError& ex) {
    std::cerr << "solver error: " << ex.what() << "\n";
    return 3;
  } catch (const BackendUnavailable& ex) {
    std::cerr << "flow backend unavailable: " << ex.what() << "\n";
    return 4;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
