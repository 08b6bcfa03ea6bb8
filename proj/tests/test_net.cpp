#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "dbc/net.hpp"
#include "dbc/props.hpp"
#include "dbc/rng.hpp"

using namespace dbc;

TEST_CASE("cosine embedding frequencies") {
  std::vector<double> out(4);
  cosine_embedding(0.0, 4, out);
  for (double v : out) CHECK(v == doctest::Approx(1.0));
  cosine_embedding(1.0, 4, out);
  CHECK(out[0] == doctest::Approx(-1.0));
  CHECK(out[1] == doctest::Approx(1.0));
  CHECK(out[2] == doctest::Approx(-1.0));
  CHECK(out[3] == doctest::Approx(1.0));
  cosine_embedding(0.5, 4, out);
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[1] == doctest::Approx(-1.0));
}

TEST_CASE("parameter count for a small projected spec") {
  CriticNetSpec spec;
  spec.state_dim = 3;
  spec.action_dim = 2;
  spec.hidden = {4};
  spec.embed_dim = 2;
  spec.embed_projection = true;
  spec.tau_input = true;
  Rng rng(1);
  const CriticNet net = CriticNet::make(spec, rng);
  // two 2→2 projections (6 each) + 10→4 trunk (44) + 4→1 head (5)
  CHECK(net.param_count() == 61);
  CHECK(spec.trunk_input_dim() == 10);
}

TEST_CASE("forward matches a hand computation on a two-weight net") {
  CriticNetSpec spec;
  spec.state_dim = 0;
  spec.action_dim = 0;
  spec.hidden = {1};
  spec.embed_dim = 1;
  spec.embed_projection = false;
  spec.tau_input = false;
  Rng rng(7);
  CriticNet net = CriticNet::make(spec, rng);
  REQUIRE(net.param_count() == 5);
  // trunk input is [z, cos(pi t)]; wire out = 3*relu(z + 2 cos(pi t) + 0.5) - 1
  net.params = {1.0, 2.0, 0.5, 3.0, -1.0};

  NetTrace trace;
  const double out = critic_forward(net, {}, {}, 0.25, 0.5, 0.0, trace);
  CHECK(out == doctest::Approx(1.25).epsilon(1e-12));

  std::vector<double> dparams(net.param_count(), 0.0);
  const double dz = critic_backward(net, trace, 2.0, dparams);
  CHECK(dz == doctest::Approx(6.0).epsilon(1e-12));   // 2 * 3 * 1
  CHECK(dparams[4] == doctest::Approx(2.0));          // head bias
  CHECK(dparams[3] == doctest::Approx(2.0 * 0.75));   // head weight * relu out
  CHECK(dparams[2] == doctest::Approx(6.0));          // hidden bias: 2*3
  CHECK(dparams[0] == doctest::Approx(6.0 * 0.25));   // dL/dw_z

  // Same point with the ReLU dead: gradient through the hidden unit vanishes.
  net.params[2] = -10.0;
  std::fill(dparams.begin(), dparams.end(), 0.0);
  const double out2 = critic_forward(net, {}, {}, 0.25, 0.5, 0.0, trace);
  CHECK(out2 == doctest::Approx(-1.0));
  CHECK(critic_backward(net, trace, 1.0, dparams) == 0.0);
  CHECK(dparams[0] == 0.0);
  CHECK(dparams[4] == doctest::Approx(1.0));
}

TEST_CASE("forward rejects mismatched state size") {
  CriticNetSpec spec;
  spec.state_dim = 2;
  spec.action_dim = 0;
  spec.hidden = {4};
  spec.embed_dim = 2;
  Rng rng(3);
  CriticNet net = CriticNet::make(spec, rng);
  NetTrace trace;
  const std::vector<double> wrong = {1.0};
  CHECK_THROWS_AS(critic_forward(net, wrong, {}, 0.0, 0.5, 0.5, trace),
                  std::invalid_argument);
}

TEST_CASE("adam step on one parameter") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState st = AdamState::make(cfg, 1);
  std::vector<double> params = {1.0};
  std::vector<double> grads = {2.0};
  adam_step(st, params, grads);
  // bias-corrected mhat = 2, vhat = 4: step = lr * 2 / (2 + eps)
  CHECK(params[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + cfg.eps)).epsilon(1e-12));
  CHECK(st.step == 1);

  AdamState st0 = AdamState::make(cfg, 1);
  std::vector<double> frozen = {0.75};
  std::vector<double> zero = {0.0};
  adam_step(st0, frozen, zero);
  CHECK(frozen[0] == 0.75);
}

TEST_CASE("gradient clipping rescales only above the threshold") {
  std::vector<double> grads = {3.0, 4.0};
  CHECK(clip_grad_norm(grads, 1.0) == doctest::Approx(5.0));
  CHECK(grads[0] == doctest::Approx(0.6));
  CHECK(grads[1] == doctest::Approx(0.8));
  std::vector<double> small = {3.0, 4.0};
  CHECK(clip_grad_norm(small, 10.0) == doctest::Approx(5.0));
  CHECK(small[0] == 3.0);
  CHECK(small[1] == 4.0);
}

TEST_CASE("polyak update moves the target a fixed fraction") {
  std::vector<double> online = {1.0, -2.0};
  std::vector<double> target = {0.0, 0.0};
  polyak_update(online, target, 0.25);
  CHECK(target[0] == doctest::Approx(0.25));
  CHECK(target[1] == doctest::Approx(-0.5));
  polyak_update(online, target, 1.0);
  CHECK(target[0] == 1.0);
  CHECK(target[1] == -2.0);
}

TEST_CASE("checkpoint round trip is bitwise") {
  CriticNetSpec spec;
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.hidden = {6, 3};
  spec.embed_dim = 4;
  Rng rng(42);
  const CriticNet net = CriticNet::make(spec, rng);
  const std::string prefix = "net_roundtrip_tmp";
  save_net(net, prefix);
  const CriticNet back = load_net(prefix);
  REQUIRE(back.param_count() == net.param_count());
  for (std::size_t i = 0; i < net.params.size(); ++i)
    CHECK(back.params[i] == net.params[i]);
  CHECK(back.spec.hidden == spec.hidden);
  CHECK(back.spec.embed_dim == spec.embed_dim);

  NetTrace ta, tb;
  const std::vector<double> s = {0.3, -0.8};
  const std::vector<double> a = {1.0};
  CHECK(critic_forward(net, s, a, 0.1, 0.4, 0.6, ta) ==
        critic_forward(back, s, a, 0.1, 0.4, 0.6, tb));
  std::remove((prefix + ".json").c_str());
  std::remove((prefix + ".bin").c_str());
}

TEST_CASE("net spec json round trip and validation") {
  CriticNetSpec spec;
  spec.state_dim = 5;
  spec.hidden = {8};
  spec.embed_dim = 3;
  spec.tau_input = false;
  const CriticNetSpec back = net_spec_from_json(net_spec_to_json(spec));
  CHECK(back.state_dim == 5);
  CHECK(back.hidden == std::vector<int>{8});
  CHECK(back.tau_input == false);

  CriticNetSpec bad;
  bad.hidden = {};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.hidden = {0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("net property suite") {
  const auto results = run_net_props();
  for (const PropResult& r : results) {
    INFO(r.name, ": observed ", r.observed, " bound ", r.bound, " ", r.detail);
    CHECK(r.pass);
  }
}
