#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dbc/envs.hpp"
#include "dbc/props.hpp"

using namespace dbc;

TEST_CASE("drift pushforward stays an analytic mixture") {
  const DriftTask task;  // defaults: N(±2, 0.3) halves, r = 1, gamma = 0.9
  const auto k0 = drift_true_distribution(task, 0);
  REQUIRE(k0.size() == 2);
  CHECK(k0[0].mean == doctest::Approx(-2.0));
  CHECK(k0[1].std == doctest::Approx(0.3));

  const auto k1 = drift_true_distribution(task, 1);
  CHECK(k1[0].mean == doctest::Approx(-0.8));
  CHECK(k1[1].mean == doctest::Approx(2.8));
  CHECK(k1[0].std == doctest::Approx(0.27));

  const auto k5 = drift_true_distribution(task, 5);
  CHECK(k5[0].mean == doctest::Approx(2.91412).epsilon(1e-9));
  CHECK(k5[1].mean == doctest::Approx(5.27608).epsilon(1e-9));
  CHECK(k5[0].std == doctest::Approx(0.177147).epsilon(1e-9));
  CHECK(k5[0].weight == doctest::Approx(0.5));
}

TEST_CASE("drift sample target is the elementwise affine map") {
  ParticleSet p;
  p.atoms = {1.0, 2.0, -3.0};
  const ParticleSet y = drift_sample_target(p, 0.5, 0.9);
  CHECK(y.atoms[0] == doctest::Approx(1.4));
  CHECK(y.atoms[1] == doctest::Approx(2.3));
  CHECK(y.atoms[2] == doctest::Approx(-2.2));
}

TEST_CASE("mixture sampling is seed-deterministic and mode-independent") {
  const DriftTask task;
  const ParticleSet a = sample_mixture(task.init, 512, 77);
  const ParticleSet b = sample_mixture(task.init, 512, 77);
  const ParticleSet c = sample_mixture(task.init, 512, 77, ExecMode::Serial);
  const ParticleSet d = sample_mixture(task.init, 512, 78);
  REQUIRE(a.size() == 512);
  bool same_seed_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.atoms[i] == b.atoms[i]);
    REQUIRE(a.atoms[i] == c.atoms[i]);
    same_seed_differs = same_seed_differs || a.atoms[i] != d.atoms[i];
  }
  CHECK(same_seed_differs);
  // Empirical halves should land near the two component means.
  int low = 0;
  for (double v : a.atoms)
    if (v < 0.0) ++low;
  CHECK(low > 180);
  CHECK(low < 330);
}

TEST_CASE("mixture mass and quantiles against closed forms") {
  const DriftTask task;
  CHECK(mixture_mass(task.init, -100.0, 100.0) == doctest::Approx(1.0));
  CHECK(mixture_mass(task.init, 0.0, 100.0) == doctest::Approx(0.5));

  const std::vector<GaussComponent> unit = {{1.0, 0.0, 1.0}};
  const ParticleSet q = mixture_quantiles(unit, 2);
  REQUIRE(q.size() == 2);
  CHECK(q.atoms[0] == doctest::Approx(-0.674489750196082).epsilon(1e-9));
  CHECK(q.atoms[1] == doctest::Approx(0.674489750196082).epsilon(1e-9));

  const ParticleSet med = mixture_quantiles(unit, 1);
  CHECK(med.atoms[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bimodality gap separates bimodal from collapsed samples") {
  ParticleSet bimodal;
  bimodal.atoms = {-2.0, -2.1, 1.9, 2.0};
  CHECK(bimodality_gap(bimodal, -2.0, 2.0, 0.5) == doctest::Approx(1.0));
  ParticleSet collapsed;
  collapsed.atoms = {0.0, 0.1, -0.1};
  CHECK(bimodality_gap(collapsed, -2.0, 2.0, 0.5) == doctest::Approx(-1.0));
}

TEST_CASE("drift task json round trip and validation") {
  DriftTask t;
  t.reward = 0.25;
  t.iterations = 3;
  t.init[0].mean = -1.5;
  const DriftTask back = drift_task_from_json(drift_task_to_json(t));
  CHECK(back.reward == 0.25);
  CHECK(back.iterations == 3);
  CHECK(back.init[0].mean == -1.5);
  CHECK(back.init[1].std == t.init[1].std);

  DriftTask bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = DriftTask{};
  bad.init.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = DriftTask{};
  bad.init[0].std = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("desk mdps validate and expose the advertised structure") {
  const TabularMdp coin = make_coin_bandit();
  CHECK(coin.n_states == 2);
  CHECK(coin.n_actions == 1);
  CHECK(coin.absorbing[1] == 1);
  CHECK(coin.max_reward_abs() == doctest::Approx(1.0));

  const TabularMdp chain = make_bimodal_chain();
  CHECK(chain.n_states == 3);
  CHECK(chain.p(0, 0, 1) == 1.0);
  CHECK(chain.p(1, 1, 2) == 1.0);
  CHECK(chain.pi(1, 0) == doctest::Approx(0.6));

  const TabularMdp loop = make_loop5();
  CHECK(loop.n_states == 5);
  CHECK(loop.p(4, 0, 0) == 1.0);  // wraps around
  CHECK(loop.p(3, 1, 0) == 1.0);
  for (auto flag : loop.absorbing) CHECK(flag == 0);

  CHECK(mdp_by_name("loop5").name == "loop5");
  CHECK_THROWS_AS(mdp_by_name("gridworld"), std::invalid_argument);

  TabularMdp broken = make_coin_bandit();
  broken.transition[0] = 0.3;  // row no longer sums to one
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("mdp json round trip preserves dynamics, rewards and policy") {
  const TabularMdp chain = make_bimodal_chain();
  const TabularMdp back = mdp_from_json(mdp_to_json(chain));
  CHECK(back.n_states == chain.n_states);
  CHECK(back.n_actions == chain.n_actions);
  CHECK(back.gamma == chain.gamma);
  CHECK(back.horizon_cap == chain.horizon_cap);
  for (std::size_t i = 0; i < chain.transition.size(); ++i)
    CHECK(back.transition[i] == chain.transition[i]);
  for (std::size_t i = 0; i < chain.policy.size(); ++i)
    CHECK(back.policy[i] == chain.policy[i]);
  REQUIRE(back.rewards.size() == chain.rewards.size());
  for (std::size_t i = 0; i < chain.rewards.size(); ++i) {
    REQUIRE(back.rewards[i].size() == chain.rewards[i].size());
    for (std::size_t j = 0; j < chain.rewards[i].size(); ++j) {
      CHECK(back.rewards[i][j].value == chain.rewards[i][j].value);
      CHECK(back.rewards[i][j].prob == chain.rewards[i][j].prob);
    }
  }
  CHECK(back.absorbing == chain.absorbing);
}

TEST_CASE("one hot encoding") {
  const std::vector<double> v = one_hot(2, 4);
  CHECK(v == std::vector<double>{0.0, 0.0, 1.0, 0.0});
  CHECK_THROWS_AS(one_hot(4, 4), std::invalid_argument);
}

TEST_CASE("transition sampling masks absorbing successors") {
  const TabularMdp chain = make_bimodal_chain();
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    const Transition from0 = mdp_sample_transition(chain, 0, rng);
    CHECK(from0.mask == 1.0);  // 0 always steps to the live state 1
    CHECK(from0.next_state == one_hot(1, 3));
    const int a_next =
        from0.next_action[0] == 1.0 ? 0 : 1;
    CHECK(from0.log_pi_next == doctest::Approx(std::log(chain.pi(1, a_next))));
    const Transition from1 = mdp_sample_transition(chain, 1, rng);
    CHECK(from1.mask == 0.0);  // 1 steps into the absorbing tail
    CHECK(from1.next_state == one_hot(2, 3));
    CHECK(from1.next_action == one_hot(0, 2));
    CHECK(from1.log_pi_next == 0.0);
    CHECK((from1.reward == 0.0 || from1.reward == 2.0 || from1.reward == 0.5 ||
           from1.reward == 1.5));
  }
  // Forced-action overload pins the first action.
  const Transition forced = mdp_sample_transition(chain, 0, 1, rng);
  CHECK(forced.action == one_hot(1, 2));
  CHECK((forced.reward == 0.5 || forced.reward == 3.5));
}

TEST_CASE("truncation horizon: capped for absorbing chains, full for loops") {
  CHECK(truncation_horizon(make_bimodal_chain()) == 8);
  CHECK(truncation_horizon(make_loop5()) == 153);
  CHECK(truncation_horizon(make_coin_bandit()) == 8);
}

TEST_CASE("exact oracle enumerates the chain return law") {
  const TabularMdp chain = make_bimodal_chain();
  const ReturnOracle o = oracle_exact(chain, 0, 0);
  REQUIRE(o.mode == OracleMode::Exact);
  const std::vector<double> atoms = {0.0, 0.45, 1.35, 1.8, 4.0, 4.45, 5.35, 5.8};
  const std::vector<double> probs = {0.15, 0.1, 0.1, 0.15, 0.15, 0.1, 0.1, 0.15};
  REQUIRE(o.atoms.size() == atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    CHECK(o.atoms[i] == doctest::Approx(atoms[i]).epsilon(1e-12));
    CHECK(o.weights[i] == doctest::Approx(probs[i]).epsilon(1e-12));
  }
  CHECK(o.mean == doctest::Approx(2.9).epsilon(1e-12));
  CHECK(o.iqr == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(o.quantile(0.25) == doctest::Approx(0.45));
  CHECK(o.quantile(0.75) == doctest::Approx(4.45));
}

TEST_CASE("bandit oracles") {
  const ReturnOracle coin = oracle_exact(make_coin_bandit(), 0, 0);
  REQUIRE(coin.atoms.size() == 2);
  CHECK(coin.atoms[0] == 0.0);
  CHECK(coin.atoms[1] == 1.0);
  CHECK(coin.mean == doctest::Approx(0.5));
  CHECK(coin.iqr == doctest::Approx(1.0));

  const ReturnOracle point = oracle_exact(make_point_bandit(0.7), 0, 0);
  REQUIRE(point.atoms.size() == 1);
  CHECK(point.atoms[0] == doctest::Approx(0.7));
  CHECK(point.iqr == 0.0);
}

TEST_CASE("loop mdp falls back to monte carlo") {
  const TabularMdp loop = make_loop5();
  CHECK_THROWS_AS(oracle_exact(loop, 0, 0), std::runtime_error);
  const ReturnOracle o = oracle_return_distribution(loop, 0, 0, 2000, 5);
  CHECK(o.mode == OracleMode::MonteCarlo);
  REQUIRE(o.atoms.size() == 2000);
  CHECK(o.sample_size == 2000);
  for (std::size_t i = 1; i < o.atoms.size(); ++i) CHECK(o.atoms[i - 1] <= o.atoms[i]);
  // Returns live inside [min_r, max_r]/(1-gamma) = [-7.5, 10].
  CHECK(o.atoms.front() >= -7.5);
  CHECK(o.atoms.back() <= 10.0);
  const ReturnOracle rerun = oracle_return_distribution(loop, 0, 0, 2000, 5);
  for (std::size_t i = 0; i < o.atoms.size(); ++i) CHECK(o.atoms[i] == rerun.atoms[i]);
  const ReturnOracle serial = oracle_monte_carlo(loop, 0, 0, 2000, 5, ExecMode::Serial);
  for (std::size_t i = 0; i < o.atoms.size(); ++i) CHECK(o.atoms[i] == serial.atoms[i]);
}

TEST_CASE("oracle w1 of the oracle's own atoms is zero") {
  const ReturnOracle o = oracle_exact(make_bimodal_chain(), 0, 0);
  ParticleSet learned;
  for (int i = 0; i < 400; ++i)
    learned.atoms.push_back(o.quantile((i + 0.5) / 400.0));
  CHECK(oracle_w1(o, learned) < 0.02);
}

TEST_CASE("oracle save/load round trip") {
  const ReturnOracle o = oracle_exact(make_bimodal_chain(), 0, 1);
  const std::string prefix = "oracle_roundtrip_tmp";
  save_oracle(o, prefix);
  const ReturnOracle back = load_oracle(prefix);
  CHECK(back.mode == o.mode);
  REQUIRE(back.atoms.size() == o.atoms.size());
  for (std::size_t i = 0; i < o.atoms.size(); ++i) {
    CHECK(back.atoms[i] == o.atoms[i]);
    CHECK(back.weights[i] == o.weights[i]);
  }
  CHECK(back.mean == o.mean);
  CHECK(back.mean_abs == o.mean_abs);
  CHECK(back.iqr == o.iqr);
  std::remove((prefix + ".json").c_str());
  std::remove((prefix + ".bin").c_str());
}

TEST_CASE("envs property suite") {
  const auto results = run_envs_props();
  for (const PropResult& r : results) {
    INFO(r.name, ": observed ", r.observed, " bound ", r.bound, " ", r.detail);
    CHECK(r.pass);
  }
}
