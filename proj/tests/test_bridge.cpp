#include <doctest.h>

#include <cmath>

#include "dbc/bridge.hpp"
#include "dbc/props.hpp"

using namespace dbc;

namespace {

BridgeParams make_params(ScheduleKind kind) {
  BridgeParams p;
  p.schedule.kind = kind;
  return p;
}

}  // namespace

TEST_CASE("theta integrals match closed forms") {
  ThetaSchedule s;
  s.kind = ScheduleKind::Constant;
  CHECK(theta_bar(s, 0.2, 0.7) == doctest::Approx(0.5).epsilon(1e-14));
  s.kind = ScheduleKind::Linear;
  CHECK(theta_bar(s, 0.2, 0.7) == doctest::Approx(1.1525).epsilon(1e-14));
  s.kind = ScheduleKind::Cosine;
  CHECK(theta_bar(s, 0.2, 0.7) == doctest::Approx(1.10247038592584).epsilon(1e-13));
  CHECK(theta_bar(s, 0.4, 0.4) == 0.0);
  CHECK_THROWS_AS(theta_bar(s, 0.7, 0.2), std::domain_error);
  CHECK_THROWS_AS(theta_at(s, 1.5), std::domain_error);
}

TEST_CASE("xi spot values against high-precision references") {
  const BridgeParams c = make_params(ScheduleKind::Constant);
  CHECK(xi(c, 0.5) == doctest::Approx(0.443409441985037).epsilon(1e-13));
  CHECK(xi(c, 0.25) == doctest::Approx(0.699724214358712).epsilon(1e-13));
  CHECK(xi(c, 0.75) == doctest::Approx(0.214952399788605).epsilon(1e-13));

  const BridgeParams l = make_params(ScheduleKind::Linear);
  CHECK(xi(l, 0.25) == doctest::Approx(0.834640948763043).epsilon(1e-13));
  CHECK(xi(l, 0.75) == doctest::Approx(0.209040388285118).epsilon(1e-13));

  const BridgeParams k = make_params(ScheduleKind::Cosine);
  CHECK(xi(k, 0.25) == doctest::Approx(0.916485545485952).epsilon(1e-13));
  CHECK(xi(k, 0.75) == doctest::Approx(0.234037480900655).epsilon(1e-13));
}

TEST_CASE("xi endpoints are exact, not merely close") {
  for (ScheduleKind kind :
       {ScheduleKind::Constant, ScheduleKind::Linear, ScheduleKind::Cosine}) {
    const BridgeParams p = make_params(kind);
    CHECK(xi(p, 0.0) == 1.0);
    CHECK(xi(p, 1.0) == 0.0);
  }
}

TEST_CASE("velocity coefficient spot values") {
  const BridgeParams c = make_params(ScheduleKind::Constant);
  CHECK(velocity_coeff(c, 0.0) == doctest::Approx(1.313035285499331).epsilon(1e-13));
  CHECK(velocity_coeff(c, 1.0) == doctest::Approx(0.850918128239322).epsilon(1e-13));
  const BridgeParams l = make_params(ScheduleKind::Linear);
  CHECK(velocity_coeff(l, 1.0) == doctest::Approx(0.785606302538380).epsilon(1e-13));
}

TEST_CASE("sigma2_bar closed form") {
  const BridgeParams c = make_params(ScheduleKind::Constant);
  CHECK(sigma2_bar(c, 0.0, 1.0) == doctest::Approx(0.864664716763387).epsilon(1e-13));
  BridgeParams scaled = c;
  scaled.lambda2 = 3.0;
  CHECK(sigma2_bar(scaled, 0.0, 1.0) ==
        doctest::Approx(3.0 * 0.864664716763387).epsilon(1e-13));
  CHECK(sigma2_bar(c, 0.3, 0.3) == 0.0);
}

TEST_CASE("ctilde equals the xi increment and interpolate is affine") {
  const BridgeParams p = make_params(ScheduleKind::Linear);
  CHECK(ctilde(p, 0.2, 0.7) == doctest::Approx(xi(p, 0.2) - xi(p, 0.7)));
  CHECK(interpolate(2.0, -1.0, p, 0.0) == doctest::Approx(2.0));
  CHECK(interpolate(2.0, -1.0, p, 1.0) == doctest::Approx(-1.0));
  const double t = 0.4;
  CHECK(interpolate(2.0, -1.0, p, t) ==
        doctest::Approx(xi(p, t) * 2.0 + (1.0 - xi(p, t)) * -1.0));
}

TEST_CASE("time grids validate and uniform grids hit exact endpoints") {
  const TimeGrid g = TimeGrid::uniform(4);
  REQUIRE(g.points.size() == 5);
  CHECK(g.points.front() == 0.0);
  CHECK(g.points.back() == 1.0);
  CHECK(g.intervals() == 4);
  CHECK_THROWS_AS(TimeGrid::uniform(0), std::invalid_argument);
  TimeGrid bad;
  bad.points = {0.0, 0.5, 0.5, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("euler endpoint error reproduces published cells") {
  const BridgeParams c = make_params(ScheduleKind::Constant);
  CHECK(euler_endpoint_error_pct(c, 1, EulerRule::RightEndpoint) ==
        doctest::Approx(14.91).epsilon(0.004));
  // Left endpoint at M=1 is |1 − c(0)| = 31.30…%: the published table cannot
  // come from the left rule.
  CHECK(euler_endpoint_error_pct(c, 1, EulerRule::LeftEndpoint) ==
        doctest::Approx(31.3035285499331).epsilon(1e-10));

  const BridgeParams l = make_params(ScheduleKind::Linear);
  CHECK(euler_endpoint_error_pct(l, 2, EulerRule::RightEndpoint) ==
        doctest::Approx(6.93).epsilon(0.008));
  const BridgeParams k = make_params(ScheduleKind::Cosine);
  CHECK(euler_endpoint_error_pct(k, 5, EulerRule::RightEndpoint) ==
        doctest::Approx(6.85).epsilon(0.008));
}

TEST_CASE("bias table covers all schedules per step count") {
  const std::vector<int> steps = {1, 1000};
  const auto rows = bias_table(EulerRule::RightEndpoint, steps);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].steps == 1);
  CHECK(rows[0].constant_pct == doctest::Approx(14.91).epsilon(0.004));
  CHECK(rows[1].constant_pct <= 0.03 + 0.05);
  CHECK(rows[1].linear_pct <= 0.03 + 0.05);
  CHECK(rows[1].cosine_pct <= 0.03 + 0.05);
}

TEST_CASE("schedule json round trip") {
  ThetaSchedule s;
  s.kind = ScheduleKind::Cosine;
  s.theta_min = 0.2;
  s.theta_max = 4.0;
  const ThetaSchedule back = schedule_from_json(schedule_to_json(s));
  CHECK(back.kind == s.kind);
  CHECK(back.theta_min == s.theta_min);
  CHECK(back.theta_max == s.theta_max);
  CHECK(back.theta_const == s.theta_const);
  CHECK_THROWS_AS(schedule_kind_from_string("sigmoid"), std::invalid_argument);
}

TEST_CASE("bridge property suite") {
  const auto results = run_bridge_props();
  for (const PropResult& r : results) {
    INFO(r.name, ": observed ", r.observed, " bound ", r.bound, " ", r.detail);
    CHECK(r.pass);
  }
}
