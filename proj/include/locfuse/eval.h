// Localization error metrics and baseline comparisons.

#ifndef LOCFUSE_EVAL_H_
#define LOCFUSE_EVAL_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locfuse/trajectory.h"

namespace locfuse {

struct GtPoint {
  double t = 0.0;
  Vec2 position = Vec2::Zero();
};

struct ErrorReport {
  double mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double rmse = 0.0;
  std::vector<std::pair<double, double>> per_gt_errors;  // (t, meters)
  size_t count = 0;
};

// Quantile by linear interpolation between order statistics at position
// q * (n - 1). Throws on empty input.
double Quantile(std::vector<double> values, double q);

// Error per ground-truth point against the time-interpolated estimate. Every
// gt timestamp must lie within the estimate's time range widened by one
// frame period; otherwise std::out_of_range.
ErrorReport ComputeErrors(const PositionSeries& estimate, std::span<const GtPoint> gt);

// Ground-truth points from a dense series, one per `period` seconds.
std::vector<GtPoint> SubsampleGroundTruth(const PositionSeries& truth, double period = 1.0);

// Piecewise-linear polyline through the fixes evaluated at `timestamps`
// (clamped to the first/last fix outside their span).
PositionSeries FlpPolyline(std::span<const FlpFix> fixes, std::span<const double> timestamps);

std::string ErrorReportToJson(const ErrorReport& report, bool include_points = false);

struct NamedReport {
  std::string name;
  ErrorReport report;
};

std::string ComparisonTable(std::span<const NamedReport> rows);
std::string ComparisonJson(std::span<const NamedReport> rows);

}  // namespace locfuse

#endif  // LOCFUSE_EVAL_H_
