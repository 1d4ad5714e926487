#include "locfuse/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace locfuse {

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ErrorReport ComputeErrors(const PositionSeries& estimate, std::span<const GtPoint> gt) {
  if (gt.empty()) throw std::invalid_argument("no ground-truth points");
  if (estimate.empty()) throw std::invalid_argument("empty estimate");
  const auto& ts = estimate.timestamps;
  const double frame = ts.size() > 1 ? (ts.back() - ts.front()) / (ts.size() - 1) : 0.0;
  ErrorReport report;
  std::vector<double> errors;
  errors.reserve(gt.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const GtPoint& p : gt) {
    if (p.t < ts.front() - frame - 1e-9 || p.t > ts.back() + frame + 1e-9) {
      throw std::out_of_range("ground-truth time " + std::to_string(p.t) +
                              " outside the estimate's range");
    }
    const double e = (InterpolatePosition(estimate, p.t) - p.position).norm();
    errors.push_back(e);
    report.per_gt_errors.emplace_back(p.t, e);
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(errors.size());
  report.count = errors.size();
  report.mean = sum / n;
  report.rmse = std::sqrt(sum_sq / n);
  report.q1 = Quantile(errors, 0.25);
  report.q3 = Quantile(errors, 0.75);
  return report;
}

std::vector<GtPoint> SubsampleGroundTruth(const PositionSeries& truth, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("period must be > 0");
  std::vector<GtPoint> out;
  if (truth.empty()) return out;
  const double t0 = truth.timestamps.front();
  for (size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * period;
    if (t > truth.timestamps.back() + 1e-9) break;
    out.push_back({t, InterpolatePosition(truth, t)});
  }
  return out;
}

PositionSeries FlpPolyline(std::span<const FlpFix> fixes, std::span<const double> timestamps) {
  if (fixes.empty()) throw std::invalid_argument("no fixes");
  PositionSeries knots;
  for (const FlpFix& f : fixes) {
    knots.timestamps.push_back(f.t);
    knots.positions.push_back(f.position);
  }
  PositionSeries out;
  out.timestamps.assign(timestamps.begin(), timestamps.end());
  for (double t : timestamps) out.positions.push_back(InterpolatePosition(knots, t));
  return out;
}

std::string ErrorReportToJson(const ErrorReport& report, bool include_points) {
  nlohmann::ordered_json j;
  j["mean"] = report.mean;
  j["q1"] = report.q1;
  j["q3"] = report.q3;
  j["rmse"] = report.rmse;
  j["count"] = report.count;
  if (include_points) {
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& [t, e] : report.per_gt_errors) pts.push_back({t, e});
    j["per_gt_errors"] = pts;
  }
  return j.dump(2);
}

std::string ComparisonTable(std::span<const NamedReport> rows) {
  size_t width = 7;
  for (const NamedReport& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "variant" << std::right
      << std::setw(10) << "mean" << std::setw(10) << "q1" << std::setw(10) << "q3"
      << std::setw(10) << "rmse" << std::setw(8) << "n" << "\n";
  out << std::fixed << std::setprecision(3);
  for (const NamedReport& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << std::right
        << std::setw(10) << r.report.mean << std::setw(10) << r.report.q1
        << std::setw(10) << r.report.q3 << std::setw(10) << r.report.rmse
        << std::setw(8) << r.report.count << "\n";
  }
  return out.str();
}

std::string ComparisonJson(std::span<const NamedReport> rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const NamedReport& r : rows) {
    j[r.name] = nlohmann::ordered_json::parse(ErrorReportToJson(r.report));
  }
  return j.dump(2);
}

}  // namespace locfuse
