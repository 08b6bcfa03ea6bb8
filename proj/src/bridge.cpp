#include "dbc/bridge.hpp"

#include <cmath>
#include <stdexcept>

namespace dbc {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("time outside [0,1]");
}

}  // namespace

void ThetaSchedule::validate() const {
  if (!(theta_min > 0.0)) throw std::invalid_argument("theta_min must be > 0");
  if (!(theta_max >= theta_min)) throw std::invalid_argument("theta_max must be >= theta_min");
  if (!(theta_const > 0.0)) throw std::invalid_argument("theta_const must be > 0");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Cosine: return "cosine";
  }
  throw std::invalid_argument("unknown schedule kind");
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

ThetaSchedule schedule_from_json(const nlohmann::json& j) {
  ThetaSchedule s;
  s.kind = schedule_kind_from_string(j.at("kind").get<std::string>());
  s.theta_min = j.value("theta_min", s.theta_min);
  s.theta_max = j.value("theta_max", s.theta_max);
  s.theta_const = j.value("theta_const", s.theta_const);
  s.validate();
  return s;
}

nlohmann::json schedule_to_json(const ThetaSchedule& s) {
  return {{"kind", to_string(s.kind)},
          {"theta_min", s.theta_min},
          {"theta_max", s.theta_max},
          {"theta_const", s.theta_const}};
}

double theta_at(const ThetaSchedule& s, double t) {
  check_time(t);
  switch (s.kind) {
    case ScheduleKind::Constant: return s.theta_const;
    case ScheduleKind::Linear: return s.theta_min + (s.theta_max - s.theta_min) * t;
    case ScheduleKind::Cosine:
      return s.theta_min + 0.5 * (s.theta_max - s.theta_min) * (1.0 - std::cos(kPi * t));
  }
  throw std::invalid_argument("unknown schedule kind");
}

double theta_bar(const ThetaSchedule& sch, double s, double t) {
  check_time(s);
  check_time(t);
  if (s > t) throw std::domain_error("theta_bar requires s <= t");
  switch (sch.kind) {
    case ScheduleKind::Constant: return sch.theta_const * (t - s);
    case ScheduleKind::Linear:
      return sch.theta_min * (t - s) + 0.5 * (sch.theta_max - sch.theta_min) * (t * t - s * s);
    case ScheduleKind::Cosine:
      return sch.theta_min * (t - s) +
             0.5 * (sch.theta_max - sch.theta_min) *
                 ((t - s) - (std::sin(kPi * t) - std::sin(kPi * s)) / kPi);
  }
  throw std::invalid_argument("unknown schedule kind");
}

void BridgeParams::validate() const {
  schedule.validate();
  if (!(lambda2 > 0.0)) throw std::invalid_argument("lambda2 must be > 0");
}

double sigma2_bar(const BridgeParams& p, double s, double t) {
  return p.lambda2 * (1.0 - std::exp(-2.0 * theta_bar(p.schedule, s, t)));
}

// xi and velocity_coeff share this decomposition. Computing θ̄_{0:1} as the
// sum tb_0t + tb_t1 (instead of a third closed-form evaluation) makes the
// endpoints exact: at t=0 numerator and denominator are the same double, at
// t=1 the numerator is exactly zero.
namespace {
struct BarSplit {
  double tb_0t, tb_t1, tb_01;
};
BarSplit split_bars(const ThetaSchedule& s, double t) {
  BarSplit b;
  b.tb_0t = theta_bar(s, 0.0, t);
  b.tb_t1 = theta_bar(s, t, 1.0);
  b.tb_01 = b.tb_0t + b.tb_t1;
  return b;
}
}  // namespace

double xi(const BridgeParams& p, double t) {
  const BarSplit b = split_bars(p.schedule, t);
  // λ² cancels between σ̄²_{t:1} and σ̄²_{0:1}.
  return std::exp(-b.tb_0t) * (1.0 - std::exp(-2.0 * b.tb_t1)) /
         (1.0 - std::exp(-2.0 * b.tb_01));
}

double velocity_coeff(const BridgeParams& p, double t) {
  const BarSplit b = split_bars(p.schedule, t);
  return theta_at(p.schedule, t) * std::exp(-b.tb_0t) * (1.0 + std::exp(-2.0 * b.tb_t1)) /
         (1.0 - std::exp(-2.0 * b.tb_01));
}

double ctilde(const BridgeParams& p, double t_lo, double t_hi) {
  if (t_lo > t_hi) throw std::domain_error("ctilde requires t_lo <= t_hi");
  return xi(p, t_lo) - xi(p, t_hi);
}

double interpolate(double z_start, double z_end, const BridgeParams& p, double t) {
  const double w = xi(p, t);
  return w * z_start + (1.0 - w) * z_end;
}

TimeGrid TimeGrid::uniform(int steps) {
  if (steps < 1) throw std::invalid_argument("step count must be >= 1");
  TimeGrid g;
  g.points.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) g.points[i] = static_cast<double>(i) / steps;
  g.points.back() = 1.0;
  return g;
}

void TimeGrid::validate() const {
  if (points.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (points.front() != 0.0 || points.back() != 1.0)
    throw std::invalid_argument("grid must span [0,1]");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1])) throw std::invalid_argument("grid must strictly increase");
}

std::vector<double> interval_weights(const BridgeParams& p, const TimeGrid& grid) {
  grid.validate();
  std::vector<double> w(grid.intervals());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = ctilde(p, grid.points[i], grid.points[i + 1]);
  return w;
}

double euler_endpoint_error_pct(const BridgeParams& p, int steps, EulerRule rule) {
  if (steps < 1) throw std::invalid_argument("step count must be >= 1");
  double sum = 0.0;
  for (int i = 0; i < steps; ++i) {
    const int k = rule == EulerRule::RightEndpoint ? i + 1 : i;
    sum += velocity_coeff(p, static_cast<double>(k) / steps);
  }
  return std::abs(1.0 - sum / steps) * 100.0;
}

std::vector<BiasTableRow> bias_table(EulerRule rule, std::span<const int> step_counts,
                                     double theta_min, double theta_max, double theta_const) {
  BridgeParams base;
  base.schedule.theta_min = theta_min;
  base.schedule.theta_max = theta_max;
  base.schedule.theta_const = theta_const;
  base.validate();

  std::vector<BiasTableRow> rows;
  rows.reserve(step_counts.size());
  for (int m : step_counts) {
    BiasTableRow row;
    row.steps = m;
    BridgeParams p = base;
    p.schedule.kind = ScheduleKind::Constant;
    row.constant_pct = euler_endpoint_error_pct(p, m, rule);
    p.schedule.kind = ScheduleKind::Linear;
    row.linear_pct = euler_endpoint_error_pct(p, m, rule);
    p.schedule.kind = ScheduleKind::Cosine;
    row.cosine_pct = euler_endpoint_error_pct(p, m, rule);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dbc
