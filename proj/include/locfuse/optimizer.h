// Geo-localization of an inertial trajectory against sparse position fixes.
//
// The unknowns are the knot values of a CorrectionParams: scale knots, heading
// knots and the start offset. The stacked residual vector is
//
//   [ hinge fix residuals | scale regularizer | heading smoothness ]
//
// and the solver minimizes its squared norm with a box-bounded
// Levenberg-Marquardt iteration. Cost values reported here are plain sums of
// squared residuals.
//
// Inside the solver each fix contributes the 2-vector d * (1 - r / |d|),
// where d is the position error and r the fix accuracy, or zero when
// |d| <= r. Its norm is the scalar hinge max(|d| - r, 0), so the cost is the
// same, but unlike |d| it stays differentiable at d = 0.

#ifndef LOCFUSE_OPTIMIZER_H_
#define LOCFUSE_OPTIMIZER_H_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "locfuse/trajectory.h"

namespace locfuse {

struct OptimizerConfig {
  double w1 = 10.0;   // scale regularizer weight
  double w2 = 200.0;  // heading smoothness weight
  double second_order_gain = 1.5;
  double scale_interval = kDefaultScaleInterval;
  double angle_interval = kDefaultAngleInterval;
  double scale_lower_bound = 0.1;
  double scale_upper_bound = 10.0;
  int max_iterations = 200;
  double convergence_tol = 1e-8;
  double initial_damping = 1e-3;

  void Validate() const;
};

struct RigidTransform2 {
  double rotation = 0.0;
  Vec2 translation = Vec2::Zero();

  Vec2 operator()(const Vec2& p) const;
};

// Frame index matched to each fix (temporally nearest, ties to the earlier
// frame).
std::vector<size_t> MatchFixes(std::span<const double> timestamps,
                               std::span<const FlpFix> fixes);

// Least-squares rotation + translation (no scale) taking the matched
// trajectory positions onto the fixes. A single fix, or fixes that all
// coincide, give a translation-only alignment. Throws on an empty fix list.
RigidTransform2 InitialAlignment(const PositionSeries& positions,
                                 std::span<const FlpFix> fixes);

// Seeds every heading knot with the rigid rotation, the start offset with the
// rigid translation and every scale knot with 1.
CorrectionParams InitialParams(const InertialTrajectory& traj,
                               std::span<const FlpFix> fixes,
                               const OptimizerConfig& config);

// Initial guess robust to large heading drift: rigid alignment to the first
// fixes, then solves over a growing time horizon, one more fix per stage,
// with knots past the horizon extrapolated (heading linearly, scale as a
// constant) before each stage.
CorrectionParams ProgressiveInitialParams(const InertialTrajectory& traj,
                                          std::span<const FlpFix> fixes,
                                          const OptimizerConfig& config);

// max(|P_f - fix| - accuracy, 0) per fix.
Eigen::VectorXd FlpResiduals(const PositionSeries& positions,
                             std::span<const FlpFix> fixes);
// sqrt(w1) * max(ds, 1/ds) per scale knot. Throws on a non-positive knot.
Eigen::VectorXd ScaleResiduals(const CorrectionParams& params, double w1);
// First differences scaled by sqrt(w2), followed by second differences
// scaled by sqrt(w2 * gain).
Eigen::VectorXd AngleResiduals(const CorrectionParams& params, double w2,
                               double gain);

struct CostBreakdown {
  double flp = 0.0;
  double scale = 0.0;
  double angle = 0.0;
  double total() const { return flp + scale + angle; }
};

// The least-squares problem for one trajectory and fix set. Parameters are
// packed as [scale knots | angle knots | start offset x, y].
class AlignmentProblem {
 public:
  AlignmentProblem(const InertialTrajectory& traj, std::span<const FlpFix> fixes,
                   const OptimizerConfig& config, size_t scale_knots,
                   size_t angle_knots);

  int num_params() const { return num_scale_ + num_angle_ + 2; }
  int num_residuals() const;

  Eigen::VectorXd Pack(const CorrectionParams& params) const;
  CorrectionParams Unpack(const Eigen::VectorXd& x) const;

  // Residuals and, when `jacobian` is non-null, the analytic Jacobian.
  void Evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* residuals,
                Eigen::MatrixXd* jacobian) const;
  CostBreakdown Cost(const Eigen::VectorXd& x) const;

  // Clamps the scale block into the configured bounds.
  void Project(Eigen::VectorXd* x) const;

 private:
  const InertialTrajectory& traj_;
  std::vector<FlpFix> fixes_;
  std::vector<size_t> fix_frames_;
  OptimizerConfig config_;
  int num_scale_;
  int num_angle_;
};

struct SolverReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  CostBreakdown initial_breakdown;
  CostBreakdown final_breakdown;
  bool converged = false;
  std::string termination;
};

struct SolveResult {
  CorrectionParams params;
  SolverReport report;
};

// Box-bounded Levenberg-Marquardt from `init`. Never returns a cost above the
// initial cost. Hitting max_iterations returns the best iterate with
// report.converged = false. Throws std::invalid_argument on an empty fix
// list or invalid init.
SolveResult Solve(const InertialTrajectory& traj, std::span<const FlpFix> fixes,
                  const OptimizerConfig& config, const CorrectionParams& init);

std::string SolverReportToJson(const SolverReport& report);

}  // namespace locfuse

#endif  // LOCFUSE_OPTIMIZER_H_
