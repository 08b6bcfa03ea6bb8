#include <doctest.h>

#include <cmath>
#include <vector>

#include "dbc/critic.hpp"
#include "dbc/envs.hpp"
#include "dbc/props.hpp"

using namespace dbc;

namespace {

DbcConfig small_config() {
  DbcConfig c;
  c.gamma = 0.9;
  c.kappa = 0.0;
  c.k_target = 16;
  c.k_online = 8;
  c.flow_steps = 3;
  c.heads = 2;
  c.net.hidden = {8, 8};
  c.net.embed_dim = 4;
  return c;
}

// Zero every weight and set the head bias so the net outputs a constant;
// the sampler then telescopes to exactly that value at t = 1.
void make_constant(CriticNet& net, double value) {
  std::fill(net.params.begin(), net.params.end(), 0.0);
  net.params[net.trunk.back().b_off] = value;
}

}  // namespace

TEST_CASE("quantile loss term matches the worked single-prediction example") {
  // One prediction 1.0 at tau .5 against targets {0, 2}, pinball:
  // (0.5*1 + 0.5*1)/2 = 0.5
  const std::vector<double> preds = {1.0};
  const std::vector<double> taus = {0.5};
  const std::vector<double> targets = {0.0, 2.0};
  CHECK(quantile_loss_term(preds, taus, targets, 0.0) == doctest::Approx(0.5));
  // tau .9: residuals y - pred are -1 (weight .1) and +1 (weight .9)
  const std::vector<double> taus9 = {0.9};
  CHECK(quantile_loss_term(preds, taus9, targets, 0.0) == doctest::Approx(0.5));
  const std::vector<double> taus75 = {0.75};
  CHECK(quantile_loss_term(preds, taus75, targets, 0.0) == doctest::Approx(0.5));
  // Asymmetry shows once the prediction moves off-center.
  const std::vector<double> low = {0.0};
  CHECK(quantile_loss_term(low, taus9, targets, 0.0) == doctest::Approx(0.9));
}

TEST_CASE("anchor loss term pins predictions to target order statistics") {
  const std::vector<double> sorted = {0.0, 2.0};
  const std::vector<double> taus = {0.5};
  std::vector<double> preds = {1.0};
  // sample_quantile({0,2}, .5) = 0, residual 1: |1| with kappa 0, 0.5 with kappa 1
  CHECK(anchor_loss_term(preds, taus, sorted, 0.0) == doctest::Approx(1.0));
  CHECK(anchor_loss_term(preds, taus, sorted, 1.0) == doctest::Approx(0.5));
  preds[0] = 0.0;
  CHECK(anchor_loss_term(preds, taus, sorted, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("config json round trip keeps every field") {
  DbcConfig c = small_config();
  c.anchor_weight = 0.07;
  c.quantile_weight = 0.5;
  c.drop_count = 3;
  c.entropy_alpha = 0.2;
  c.bridge.schedule.kind = ScheduleKind::Cosine;
  c.adam.lr = 1e-3;
  const DbcConfig back = dbc_config_from_json(dbc_config_to_json(c));
  CHECK(back.gamma == c.gamma);
  CHECK(back.kappa == c.kappa);
  CHECK(back.anchor_weight == c.anchor_weight);
  CHECK(back.quantile_weight == c.quantile_weight);
  CHECK(back.k_target == c.k_target);
  CHECK(back.k_online == c.k_online);
  CHECK(back.flow_steps == c.flow_steps);
  CHECK(back.heads == c.heads);
  CHECK(back.drop_count == c.drop_count);
  CHECK(back.tau_target == c.tau_target);
  CHECK(back.entropy_alpha == c.entropy_alpha);
  CHECK(back.bridge.schedule.kind == ScheduleKind::Cosine);
  CHECK(back.adam.lr == 1e-3);
  CHECK(back.net.hidden == c.net.hidden);
}

TEST_CASE("config validation rejects inconsistent settings") {
  DbcConfig c = small_config();
  c.k_online = c.k_target + 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.drop_count = c.k_target * c.heads;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.quantile_weight = 0.0;
  c.anchor_weight = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("sampler telescopes exactly for constant nets") {
  Rng rng(3);
  CriticEnsemble ens = CriticEnsemble::make(small_config(), 2, 1, rng);
  make_constant(ens.online[0], 1.75);
  const std::vector<double> s = {0.2, -0.4};
  const std::vector<double> a = {1.0};
  // z_end = tau + (sum of weights)*(1.75 - tau) and the weights sum to 1.
  const double z = sample_return_atom(ens.online[0], s, a, 0.3, ens.grid.points,
                                      ens.weights);
  CHECK(z == doctest::Approx(1.75).epsilon(1e-14));
}

TEST_CASE("per-head and stacked sampling agree") {
  Rng rng(11);
  CriticEnsemble ens = CriticEnsemble::make(small_config(), 2, 1, rng);
  const std::vector<double> s = {0.1, 0.9};
  const std::vector<double> a = {0.0};
  const QuantileLevels levels = QuantileLevels::midpoints(5);
  const auto per_head = sample_returns(ens, HeadSide::Online, s, a, levels);
  REQUIRE(per_head.size() == 2);
  REQUIRE(per_head[0].size() == 5);
  const ParticleSet stacked =
      sample_returns_stacked(ens, HeadSide::Online, s, a, levels);
  REQUIRE(stacked.size() == 10);
  for (int h = 0; h < 2; ++h)
    for (int i = 0; i < 5; ++i)
      CHECK(stacked.atoms[h * 5 + i] == per_head[h].atoms[i]);
}

TEST_CASE("build_targets applies reward, discount, mask and entropy") {
  Rng rng(5);
  DbcConfig cfg = small_config();
  CriticEnsemble ens = CriticEnsemble::make(cfg, 2, 1, rng);
  make_constant(ens.target[0], 2.0);
  make_constant(ens.target[1], 2.0);

  Transition tr;
  tr.state = {0.0, 0.0};
  tr.action = {0.0};
  tr.next_state = {1.0, 0.0};
  tr.next_action = {1.0};
  tr.reward = 0.5;

  SUBCASE("bootstrapped") {
    tr.mask = 1.0;
    const ParticleSet y = build_targets(ens, tr, 99);
    REQUIRE(y.size() == static_cast<std::size_t>(cfg.heads * cfg.k_target));
    for (double v : y.atoms) CHECK(v == doctest::Approx(0.5 + 0.9 * 2.0).epsilon(1e-13));
  }
  SUBCASE("terminal cuts the bootstrap") {
    tr.mask = 0.0;
    const ParticleSet y = build_targets(ens, tr, 99);
    for (double v : y.atoms) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("entropy correction shifts by alpha log pi") {
    tr.mask = 1.0;
    tr.log_pi_next = -0.7;
    ens.config.entropy_alpha = 0.5;
    const ParticleSet y = build_targets(ens, tr, 99);
    for (double v : y.atoms)
      CHECK(v == doctest::Approx(0.5 + 0.9 * (2.0 - 0.5 * -0.7)).epsilon(1e-13));
  }
}

TEST_CASE("build_targets is sorted and deterministic in the seed") {
  Rng rng(17);
  CriticEnsemble ens = CriticEnsemble::make(small_config(), 1, 1, rng);
  Transition tr;
  tr.state = {0.4};
  tr.action = {1.0};
  tr.next_state = {-0.2};
  tr.next_action = {0.0};
  tr.reward = 1.0;
  const ParticleSet a = build_targets(ens, tr, 123);
  const ParticleSet b = build_targets(ens, tr, 123);
  const ParticleSet c = build_targets(ens, tr, 124);
  REQUIRE(a.size() == b.size());
  bool all_equal_ab = true, all_equal_ac = a.size() == c.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal_ab = all_equal_ab && a.atoms[i] == b.atoms[i];
    if (i + 1 < a.size()) CHECK(a.atoms[i] <= a.atoms[i + 1]);
    if (all_equal_ac) all_equal_ac = a.atoms[i] == c.atoms[i];
  }
  CHECK(all_equal_ab);
  CHECK_FALSE(all_equal_ac);
}

TEST_CASE("train_step reduces loss on a repeated transition") {
  Rng rng(29);
  DbcConfig cfg = small_config();
  cfg.adam.lr = 3e-3;
  CriticEnsemble ens = CriticEnsemble::make(cfg, 1, 1, rng);
  Transition tr;
  tr.state = {1.0};
  tr.action = {0.0};
  tr.next_state = {1.0};
  tr.next_action = {0.0};
  tr.reward = 1.0;
  tr.mask = 0.0;  // fixed-point target: all mass at 1.0

  double first = 0.0, last = 0.0;
  for (int k = 0; k < 400; ++k) {
    const StepReport rep = train_step(ens, tr, 1000 + k);
    REQUIRE(rep.finite);
    if (k == 0) first = rep.total;
    last = rep.total;
  }
  CHECK(last < 0.5 * first);
  // After fitting a point mass the mean of sampled returns should sit near 1.
  const double q = q_value(ens, tr.state, tr.action, 7, 512);
  CHECK(q == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("train_step_on_targets is deterministic and mode-independent") {
  Rng rng_a(31);
  Rng rng_b(31);
  CriticEnsemble a = CriticEnsemble::make(small_config(), 1, 1, rng_a);
  CriticEnsemble b = CriticEnsemble::make(small_config(), 1, 1, rng_b);
  ParticleSet targets;
  targets.atoms = {-1.0, -0.25, 0.5, 2.0};
  const std::vector<double> s = {0.3};
  const std::vector<double> act = {1.0};
  const StepReport ra =
      train_step_on_targets(a, s, act, targets, 555, true, ExecMode::Serial);
  const StepReport rb =
      train_step_on_targets(b, s, act, targets, 555, true, ExecMode::Parallel);
  CHECK(ra.total == rb.total);
  CHECK(ra.grad_norm == rb.grad_norm);
  for (int h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < a.online[h].params.size(); ++i) {
      REQUIRE(a.online[h].params[i] == b.online[h].params[i]);
      REQUIRE(a.target[h].params[i] == b.target[h].params[i]);
    }
}

TEST_CASE("train_step_batch of one matches train_step bitwise") {
  Rng rng_a(37);
  Rng rng_b(37);
  CriticEnsemble a = CriticEnsemble::make(small_config(), 2, 1, rng_a);
  CriticEnsemble b = CriticEnsemble::make(small_config(), 2, 1, rng_b);
  Transition tr;
  tr.state = {1.0, 0.0};
  tr.action = {1.0};
  tr.next_state = {0.0, 1.0};
  tr.next_action = {1.0};
  tr.reward = 0.5;
  tr.mask = 1.0;

  const StepReport ra = train_step(a, tr, 909);
  const std::vector<Transition> batch = {tr};
  const StepReport rb = train_step_batch(b, batch, 909);
  CHECK(ra.total == rb.total);
  CHECK(ra.quantile_loss == rb.quantile_loss);
  CHECK(ra.anchor_loss == rb.anchor_loss);
  CHECK(ra.grad_norm == rb.grad_norm);
  for (int h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < a.online[h].params.size(); ++i) {
      REQUIRE(a.online[h].params[i] == b.online[h].params[i]);
      REQUIRE(a.target[h].params[i] == b.target[h].params[i]);
    }
}

TEST_CASE("train_step_batch is deterministic and mode-independent") {
  Rng rng_a(41);
  Rng rng_b(41);
  CriticEnsemble a = CriticEnsemble::make(small_config(), 2, 1, rng_a);
  CriticEnsemble b = CriticEnsemble::make(small_config(), 2, 1, rng_b);
  std::vector<Transition> batch(3);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].state = {1.0, 0.0};
    batch[i].action = {1.0};
    batch[i].next_state = {0.0, 1.0};
    batch[i].next_action = {1.0};
    batch[i].reward = static_cast<double>(i);
    batch[i].mask = i == 2 ? 0.0 : 1.0;
  }
  const StepReport ra = train_step_batch(a, batch, 808, ExecMode::Serial);
  const StepReport rb = train_step_batch(b, batch, 808, ExecMode::Parallel);
  CHECK(ra.total == rb.total);
  CHECK(ra.grad_norm == rb.grad_norm);
  CHECK(ra.finite);
  for (int h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < a.online[h].params.size(); ++i)
      REQUIRE(a.online[h].params[i] == b.online[h].params[i]);
  CHECK_THROWS_AS(train_step_batch(a, {}, 1), std::invalid_argument);
}

TEST_CASE("flow baseline fits a shifted point mass") {
  FlowConfig fc;
  fc.hidden = {16, 16};
  fc.embed_dim = 4;
  fc.adam.lr = 5e-3;
  Rng rng(41);
  FlowBaseline fm = FlowBaseline::make(fc, rng);
  const std::vector<double> targets(64, 2.0);
  double mse = 0.0;
  for (int k = 0; k < 300; ++k) mse = fm_train_step(fm, targets, 900 + k);
  CHECK(mse < 0.2);
  const ParticleSet z = fm_sample(fm, 256, 32, 12345);
  REQUIRE(z.size() == 256);
  CHECK(z.mean() == doctest::Approx(2.0).epsilon(0.2));

  const ParticleSet z2 = fm_sample(fm, 256, 32, 12345);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.atoms[i] == z2.atoms[i]);
  const ParticleSet serial = fm_sample(fm, 256, 32, 12345, ExecMode::Serial);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.atoms[i] == serial.atoms[i]);
}

TEST_CASE("flow config json round trip") {
  FlowConfig fc;
  fc.hidden = {5, 6};
  fc.embed_dim = 7;
  fc.embed_projection = false;
  fc.sample_steps = 42;
  fc.adam.lr = 2.5e-4;
  const FlowConfig back = flow_config_from_json(flow_config_to_json(fc));
  CHECK(back.hidden == fc.hidden);
  CHECK(back.embed_dim == 7);
  CHECK(back.embed_projection == false);
  CHECK(back.sample_steps == 42);
  CHECK(back.adam.lr == 2.5e-4);
}

TEST_CASE("critic property suite") {
  const auto results = run_critic_props();
  for (const PropResult& r : results) {
    INFO(r.name, ": observed ", r.observed, " bound ", r.bound, " ", r.detail);
    CHECK(r.pass);
  }
}
