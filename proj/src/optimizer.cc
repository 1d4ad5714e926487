#include "locfuse/optimizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "json.hpp"

namespace locfuse {

void OptimizerConfig::Validate() const {
  if (w1 < 0.0 || w2 < 0.0 || second_order_gain < 0.0) {
    throw std::invalid_argument("optimizer weights must be >= 0");
  }
  if (!(scale_interval > 0.0) || !(angle_interval > 0.0)) {
    throw std::invalid_argument("knot intervals must be > 0");
  }
  if (!(scale_lower_bound > 0.0) || !(scale_upper_bound > scale_lower_bound)) {
    throw std::invalid_argument("invalid scale bounds");
  }
  if (max_iterations < 0) {
    throw std::invalid_argument("max_iterations must be >= 0");
  }
}

Vec2 RigidTransform2::operator()(const Vec2& p) const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  return Vec2(c * p.x() - s * p.y(), s * p.x() + c * p.y()) + translation;
}

std::vector<size_t> MatchFixes(std::span<const double> timestamps,
                               std::span<const FlpFix> fixes) {
  std::vector<size_t> frames;
  frames.reserve(fixes.size());
  for (const FlpFix& fix : fixes) frames.push_back(NearestFrame(timestamps, fix.t));
  return frames;
}

RigidTransform2 InitialAlignment(const PositionSeries& positions,
                                 std::span<const FlpFix> fixes) {
  if (fixes.empty()) throw std::invalid_argument("no fixes to align to");
  const std::vector<size_t> frames = MatchFixes(positions.timestamps, fixes);

  Vec2 src_mean = Vec2::Zero();
  Vec2 dst_mean = Vec2::Zero();
  for (size_t i = 0; i < fixes.size(); ++i) {
    src_mean += positions.positions[frames[i]];
    dst_mean += fixes[i].position;
  }
  src_mean /= static_cast<double>(fixes.size());
  dst_mean /= static_cast<double>(fixes.size());

  double dot = 0.0;
  double cross = 0.0;
  double spread = 0.0;
  for (size_t i = 0; i < fixes.size(); ++i) {
    const Vec2 a = positions.positions[frames[i]] - src_mean;
    const Vec2 b = fixes[i].position - dst_mean;
    dot += a.dot(b);
    cross += a.x() * b.y() - a.y() * b.x();
    spread += b.squaredNorm();
  }

  RigidTransform2 out;
  if (fixes.size() >= 2 && spread > 0.0 && (dot != 0.0 || cross != 0.0)) {
    out.rotation = std::atan2(cross, dot);
  }
  const double c = std::cos(out.rotation);
  const double s = std::sin(out.rotation);
  out.translation =
      dst_mean - Vec2(c * src_mean.x() - s * src_mean.y(),
                      s * src_mean.x() + c * src_mean.y());
  return out;
}

CorrectionParams InitialParams(const InertialTrajectory& traj,
                               std::span<const FlpFix> fixes,
                               const OptimizerConfig& config) {
  CorrectionParams params = CorrectionParams::Identity(
      traj, config.scale_interval, config.angle_interval);
  const RigidTransform2 rigid = InitialAlignment(Integrate(traj, params), fixes);
  std::fill(params.angle_knots.begin(), params.angle_knots.end(),
            rigid.rotation);
  params.start_offset = rigid.translation;
  return params;
}

namespace {

// Overwrites knots whose time is past `horizon` (seconds since the anchor).
void ExtrapolateKnots(double horizon, CorrectionParams* p) {
  const auto last_inside = [horizon](double interval, size_t n) {
    const size_t k = static_cast<size_t>(std::floor(horizon / interval));
    return std::min(k, n - 1);
  };
  const size_t ks = last_inside(p->scale_interval, p->scale_knots.size());
  for (size_t k = ks + 1; k < p->scale_knots.size(); ++k) {
    p->scale_knots[k] = p->scale_knots[ks];
  }
  const size_t ka = last_inside(p->angle_interval, p->angle_knots.size());
  // The knot just past the horizon is constrained by frames before it, so
  // the slope uses it when it exists.
  const size_t anchor = std::min(ka + 1, p->angle_knots.size() - 1);
  if (anchor == 0) return;
  const double slope = p->angle_knots[anchor] - p->angle_knots[anchor - 1];
  for (size_t k = anchor + 1; k < p->angle_knots.size(); ++k) {
    p->angle_knots[k] = p->angle_knots[k - 1] + slope;
  }
}

}  // namespace

CorrectionParams ProgressiveInitialParams(const InertialTrajectory& traj,
                                          std::span<const FlpFix> fixes,
                                          const OptimizerConfig& config) {
  if (fixes.empty()) throw std::invalid_argument("no fixes to align to");
  std::vector<FlpFix> sorted(fixes.begin(), fixes.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const FlpFix& a, const FlpFix& b) { return a.t < b.t; });
  const size_t first = std::min<size_t>(2, sorted.size());
  CorrectionParams params = InitialParams(
      traj, std::span<const FlpFix>(sorted.data(), first), config);
  const double t0 = traj.start_time();
  for (size_t k = first; k <= sorted.size(); ++k) {
    const std::span<const FlpFix> active(sorted.data(), k);
    ExtrapolateKnots(std::max(active.back().t - t0, 0.0), &params);
    params = Solve(traj, active, config, params).params;
  }
  return params;
}

Eigen::VectorXd FlpResiduals(const PositionSeries& positions,
                             std::span<const FlpFix> fixes) {
  const std::vector<size_t> frames = MatchFixes(positions.timestamps, fixes);
  Eigen::VectorXd r(static_cast<Eigen::Index>(fixes.size()));
  for (size_t i = 0; i < fixes.size(); ++i) {
    const double dist = (positions.positions[frames[i]] - fixes[i].position).norm();
    r[static_cast<Eigen::Index>(i)] = std::max(dist - fixes[i].accuracy, 0.0);
  }
  return r;
}

Eigen::VectorXd ScaleResiduals(const CorrectionParams& params, double w1) {
  const double sw = std::sqrt(w1);
  Eigen::VectorXd r(static_cast<Eigen::Index>(params.scale_knots.size()));
  for (size_t k = 0; k < params.scale_knots.size(); ++k) {
    const double s = params.scale_knots[k];
    if (!(s > 0.0)) throw std::invalid_argument("scale knots must be positive");
    r[static_cast<Eigen::Index>(k)] = sw * std::max(s, 1.0 / s);
  }
  return r;
}

namespace {

size_t FirstOrderCount(size_t n) { return n >= 2 ? n - 1 : 0; }
size_t SecondOrderCount(size_t n) { return n >= 3 ? n - 2 : 0; }

}  // namespace

Eigen::VectorXd AngleResiduals(const CorrectionParams& params, double w2,
                               double gain) {
  const auto& a = params.angle_knots;
  const size_t n1 = FirstOrderCount(a.size());
  const size_t n2 = SecondOrderCount(a.size());
  Eigen::VectorXd r(static_cast<Eigen::Index>(n1 + n2));
  const double s1 = std::sqrt(w2);
  const double s2 = std::sqrt(w2 * gain);
  for (size_t k = 0; k < n1; ++k) {
    r[static_cast<Eigen::Index>(k)] = s1 * (a[k + 1] - a[k]);
  }
  for (size_t k = 0; k < n2; ++k) {
    r[static_cast<Eigen::Index>(n1 + k)] = s2 * (a[k + 2] - 2.0 * a[k + 1] + a[k]);
  }
  return r;
}

AlignmentProblem::AlignmentProblem(const InertialTrajectory& traj,
                                   std::span<const FlpFix> fixes,
                                   const OptimizerConfig& config,
                                   size_t scale_knots, size_t angle_knots)
    : traj_(traj),
      fixes_(fixes.begin(), fixes.end()),
      fix_frames_(MatchFixes(traj.timestamps, fixes)),
      config_(config),
      num_scale_(static_cast<int>(scale_knots)),
      num_angle_(static_cast<int>(angle_knots)) {}

int AlignmentProblem::num_residuals() const {
  return 2 * static_cast<int>(fixes_.size()) + num_scale_ +
         static_cast<int>(FirstOrderCount(num_angle_) +
                          SecondOrderCount(num_angle_));
}

Eigen::VectorXd AlignmentProblem::Pack(const CorrectionParams& params) const {
  if (static_cast<int>(params.scale_knots.size()) != num_scale_ ||
      static_cast<int>(params.angle_knots.size()) != num_angle_) {
    throw std::invalid_argument("parameter layout mismatch");
  }
  Eigen::VectorXd x(num_params());
  for (int k = 0; k < num_scale_; ++k) x[k] = params.scale_knots[k];
  for (int k = 0; k < num_angle_; ++k) x[num_scale_ + k] = params.angle_knots[k];
  x[num_scale_ + num_angle_] = params.start_offset.x();
  x[num_scale_ + num_angle_ + 1] = params.start_offset.y();
  return x;
}

CorrectionParams AlignmentProblem::Unpack(const Eigen::VectorXd& x) const {
  CorrectionParams p;
  p.scale_interval = config_.scale_interval;
  p.angle_interval = config_.angle_interval;
  p.scale_knots.assign(x.data(), x.data() + num_scale_);
  p.angle_knots.assign(x.data() + num_scale_, x.data() + num_scale_ + num_angle_);
  p.start_offset = Vec2(x[num_scale_ + num_angle_], x[num_scale_ + num_angle_ + 1]);
  return p;
}

void AlignmentProblem::Project(Eigen::VectorXd* x) const {
  for (int k = 0; k < num_scale_; ++k) {
    (*x)[k] = std::clamp((*x)[k], config_.scale_lower_bound,
                         config_.scale_upper_bound);
  }
}

void AlignmentProblem::Evaluate(const Eigen::VectorXd& x,
                                Eigen::VectorXd* residuals,
                                Eigen::MatrixXd* jacobian) const {
  const int n = num_params();
  const int m = num_residuals();
  const int off_x = num_scale_ + num_angle_;
  residuals->setZero(m);
  if (jacobian != nullptr) jacobian->setZero(m, n);

  // Fixes sorted by matched frame so one forward pass visits them in order.
  std::vector<size_t> order(fixes_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return fix_frames_[a] < fix_frames_[b];
  });

  // Running position and its derivative with respect to every knot. A frame
  // touches at most two scale and two angle knots, so each step is O(1);
  // copying the derivative out happens only at fix frames.
  Vec2 pos(x[off_x], x[off_x + 1]);
  Eigen::Matrix<double, 2, Eigen::Dynamic> dpos;
  if (jacobian != nullptr) dpos.setZero(2, n);

  const double t0 = traj_.start_time();
  size_t next = 0;
  for (size_t f = 0; f < traj_.size() && next < order.size(); ++f) {
    const double t = traj_.timestamps[f] - t0;
    const KnotWeight ws = LocateKnot(num_scale_, config_.scale_interval, t);
    const KnotWeight wa = LocateKnot(num_angle_, config_.angle_interval, t);
    double ds = x[ws.index];
    if (ws.alpha != 0.0) ds = (1.0 - ws.alpha) * ds + ws.alpha * x[ws.index + 1];
    double dh = x[num_scale_ + wa.index];
    if (wa.alpha != 0.0) {
      dh = (1.0 - wa.alpha) * dh + wa.alpha * x[num_scale_ + wa.index + 1];
    }
    const double heading = traj_.headings[f] + dh;
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    const double speed = traj_.speeds[f];
    pos += speed * ds * Vec2(c, s);

    if (jacobian != nullptr && speed != 0.0) {
      const Vec2 d_scale = speed * Vec2(c, s);
      const Vec2 d_angle = speed * ds * Vec2(-s, c);
      dpos.col(ws.index) += (1.0 - ws.alpha) * d_scale;
      if (ws.alpha != 0.0) dpos.col(ws.index + 1) += ws.alpha * d_scale;
      dpos.col(num_scale_ + wa.index) += (1.0 - wa.alpha) * d_angle;
      if (wa.alpha != 0.0) dpos.col(num_scale_ + wa.index + 1) += wa.alpha * d_angle;
    }

    while (next < order.size() && fix_frames_[order[next]] == f) {
      const size_t i = order[next++];
      const Vec2 d = pos - fixes_[i].position;
      const double dist = d.norm();
      const double acc = fixes_[i].accuracy;
      if (dist > acc) {
        // e = d * (1 - acc / |d|): |e| is the hinge excess, and e is smooth
        // at d = 0 when acc = 0.
        const double shrink = 1.0 - acc / dist;
        const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
        residuals->segment<2>(row) = shrink * d;
        if (jacobian != nullptr) {
          const Mat2 de = shrink * Mat2::Identity() +
                          (acc / (dist * dist * dist)) * d * d.transpose();
          jacobian->middleRows<2>(row).noalias() = de * dpos;
          jacobian->block<2, 2>(row, off_x) += de;
        }
      }
    }
  }

  int row = 2 * static_cast<int>(fixes_.size());
  const double sw1 = std::sqrt(config_.w1);
  for (int k = 0; k < num_scale_; ++k, ++row) {
    const double s = x[k];
    if (s >= 1.0) {
      (*residuals)[row] = sw1 * s;
      if (jacobian != nullptr) (*jacobian)(row, k) = sw1;
    } else {
      (*residuals)[row] = sw1 / s;
      if (jacobian != nullptr) (*jacobian)(row, k) = -sw1 / (s * s);
    }
  }

  const double s1 = std::sqrt(config_.w2);
  const double s2 = std::sqrt(config_.w2 * config_.second_order_gain);
  const int a0 = num_scale_;
  for (int k = 0; k + 1 < num_angle_; ++k, ++row) {
    (*residuals)[row] = s1 * (x[a0 + k + 1] - x[a0 + k]);
    if (jacobian != nullptr) {
      (*jacobian)(row, a0 + k) = -s1;
      (*jacobian)(row, a0 + k + 1) = s1;
    }
  }
  for (int k = 0; k + 2 < num_angle_; ++k, ++row) {
    (*residuals)[row] = s2 * (x[a0 + k + 2] - 2.0 * x[a0 + k + 1] + x[a0 + k]);
    if (jacobian != nullptr) {
      (*jacobian)(row, a0 + k) = s2;
      (*jacobian)(row, a0 + k + 1) = -2.0 * s2;
      (*jacobian)(row, a0 + k + 2) = s2;
    }
  }
}

CostBreakdown AlignmentProblem::Cost(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  Evaluate(x, &r, nullptr);
  const int nf = 2 * static_cast<int>(fixes_.size());
  const int na = num_residuals() - nf - num_scale_;
  CostBreakdown c;
  c.flp = r.head(nf).squaredNorm();
  c.scale = r.segment(nf, num_scale_).squaredNorm();
  c.angle = r.tail(na).squaredNorm();
  return c;
}

SolveResult Solve(const InertialTrajectory& traj, std::span<const FlpFix> fixes,
                  const OptimizerConfig& config, const CorrectionParams& init) {
  if (fixes.empty()) throw std::invalid_argument("no position fixes");
  for (const FlpFix& f : fixes) {
    if (!f.position.allFinite() || !std::isfinite(f.accuracy)) {
      throw std::invalid_argument("non-finite position fix at t=" + std::to_string(f.t));
    }
  }
  config.Validate();
  traj.Validate();
  init.ValidateFor(traj);
  if (init.scale_interval != config.scale_interval ||
      init.angle_interval != config.angle_interval) {
    throw std::invalid_argument("init knot intervals differ from the config");
  }

  const AlignmentProblem problem(traj, fixes, config, init.scale_knots.size(),
                                 init.angle_knots.size());
  Eigen::VectorXd x = problem.Pack(init);
  problem.Project(&x);

  SolveResult result;
  SolverReport& report = result.report;
  report.initial_breakdown = problem.Cost(problem.Pack(init));
  report.initial_cost = report.initial_breakdown.total();

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.Evaluate(x, &r, &jac);
  double cost = r.squaredNorm();
  // Projection can only matter for an out-of-bounds init; keep the better.
  if (cost > report.initial_cost) {
    x = problem.Pack(init);
    problem.Evaluate(x, &r, &jac);
    cost = r.squaredNorm();
  }

  double lambda = config.initial_damping;
  report.termination = "max_iterations";
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (2.0 * grad.lpNorm<Eigen::Infinity>() < config.convergence_tol) {
      report.converged = true;
      report.termination = "gradient_tolerance";
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      Eigen::VectorXd step = a.ldlt().solve(-grad);
      Eigen::VectorXd trial = x + step;
      problem.Project(&trial);
      if ((trial - x).norm() <= 1e-14 * (x.norm() + 1e-14)) {
        stalled = true;
        break;
      }
      Eigen::VectorXd trial_r;
      problem.Evaluate(trial, &trial_r, nullptr);
      const double trial_cost = trial_r.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        x = std::move(trial);
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        problem.Evaluate(x, &r, &jac);
        if (rel < config.convergence_tol) {
          report.converged = true;
          report.termination = "relative_cost_decrease";
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      // No descent direction survives damping: x is a (possibly non-smooth)
      // local minimum to working precision.
      report.converged = true;
      report.termination = "step_tolerance";
      break;
    }
    if (report.converged) {
      ++it;
      break;
    }
  }
  report.iterations = it;
  result.params = problem.Unpack(x);
  report.final_breakdown = problem.Cost(x);
  report.final_cost = report.final_breakdown.total();
  return result;
}

std::string SolverReportToJson(const SolverReport& report) {
  auto breakdown = [](const CostBreakdown& c) {
    nlohmann::ordered_json j;
    j["flp"] = c.flp;
    j["scale"] = c.scale;
    j["angle"] = c.angle;
    j["total"] = c.total();
    return j;
  };
  nlohmann::ordered_json j;
  j["iterations"] = report.iterations;
  j["initial_cost"] = report.initial_cost;
  j["final_cost"] = report.final_cost;
  j["initial_breakdown"] = breakdown(report.initial_breakdown);
  j["final_breakdown"] = breakdown(report.final_breakdown);
  j["converged"] = report.converged;
  j["termination"] = report.termination;
  return j.dump(2);
}

}  // namespace locfuse
