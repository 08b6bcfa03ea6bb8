#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dbc {

// Mean-reversion schedule θ(t) on t ∈ [0,1] for the bridge process.
// theta_bar integrates it in closed form so downstream coefficients carry no
// quadrature error.
enum class ScheduleKind { Constant, Linear, Cosine };

struct ThetaSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double theta_min = 0.1;
  double theta_max = 5.0;
  double theta_const = 1.0;

  void validate() const;  // throws std::invalid_argument
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

ThetaSchedule schedule_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const ThetaSchedule& s);

// θ(t); throws std::domain_error outside [0,1].
double theta_at(const ThetaSchedule& s, double t);

// θ̄_{s:t} = ∫_s^t θ(u) du, exact antiderivative, requires 0 ≤ s ≤ t ≤ 1.
double theta_bar(const ThetaSchedule& sch, double s, double t);

struct BridgeParams {
  ThetaSchedule schedule;
  double lambda2 = 1.0;  // stationary variance λ²; cancels in xi and velocity

  void validate() const;
};

// Accumulated noise variance σ̄²_{s:t} = λ²(1 − e^{−2θ̄_{s:t}}).
double sigma2_bar(const BridgeParams& p, double s, double t);

// Bridge interpolation weight ξ(t) = e^{−θ̄_{0:t}} σ̄²_{t:1} / σ̄²_{0:1}.
// Decreases from ξ(0)=1 to ξ(1)=0 (both exact by construction here).
double xi(const BridgeParams& p, double t);

// Velocity coefficient c(t) = θ(t) e^{−θ̄_{0:t}} (1+e^{−2θ̄_{t:1}}) / (1−e^{−2θ̄_{0:1}}).
// Equals −dξ/dt, so ∫₀¹ c dt = 1: a sampler stepping z by c·Δt·(ẑ−z_start)
// lands exactly on ẑ only in the continuous limit — hence ctilde below.
double velocity_coeff(const BridgeParams& p, double t);

// Exact integral of the velocity coefficient over [t_lo, t_hi]:
// ∫ c dt = ξ(t_lo) − ξ(t_hi). Using these as discrete step weights makes the
// sampler's endpoint exact for any step count (the sum telescopes to 1).
double ctilde(const BridgeParams& p, double t_lo, double t_hi);

// Deterministic interpolant z_t = ξ(t)·z_start + (1−ξ(t))·z_end.
double interpolate(double z_start, double z_end, const BridgeParams& p, double t);

// Partition 0 = t_0 < t_1 < … < t_M = 1.
struct TimeGrid {
  std::vector<double> points;

  static TimeGrid uniform(int steps);
  std::size_t intervals() const { return points.empty() ? 0 : points.size() - 1; }
  void validate() const;
};

// ctilde for every interval of the grid; sums to 1 up to rounding.
std::vector<double> interval_weights(const BridgeParams& p, const TimeGrid& grid);

// Endpoint bias of plain Euler steps c(t_eval)·Δt on a uniform M-grid,
// as a percentage: |1 − (1/M) Σ c(t_eval)|·100. RightEndpoint evaluates at
// interval right ends t=(i+1)/M, LeftEndpoint at t=i/M.
enum class EulerRule { LeftEndpoint, RightEndpoint };

double euler_endpoint_error_pct(const BridgeParams& p, int steps, EulerRule rule);

struct BiasTableRow {
  int steps = 0;
  double constant_pct = 0.0;
  double linear_pct = 0.0;
  double cosine_pct = 0.0;
};

// Euler endpoint bias across the three schedule kinds (shared theta bounds)
// for each step count.
std::vector<BiasTableRow> bias_table(EulerRule rule, std::span<const int> step_counts,
                                     double theta_min = 0.1, double theta_max = 5.0,
                                     double theta_const = 1.0);

}  // namespace dbc
