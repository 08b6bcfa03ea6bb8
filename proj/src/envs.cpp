#include "dbc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace dbc {

// ---- Drift task ------------------------------------------------------------

void DriftTask::validate() const {
  if (init.empty()) throw std::invalid_argument("drift task needs mixture components");
  double total = 0.0;
  for (const GaussComponent& c : init) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("component weight must be > 0");
    if (!(c.std > 0.0)) throw std::invalid_argument("component std must be > 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("component weights must sum to 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma outside [0,1)");
  if (iterations < 0 || inner_steps < 1 || init_steps < 1)
    throw std::invalid_argument("invalid drift step counts");
}

DriftTask drift_task_from_json(const nlohmann::json& j) {
  DriftTask t;
  if (j.contains("mixture")) {
    t.init.clear();
    for (const auto& c : j.at("mixture"))
      t.init.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(),
                        c.at("std").get<double>()});
  }
  t.reward = j.value("reward", t.reward);
  t.gamma = j.value("gamma", t.gamma);
  t.iterations = j.value("iterations", t.iterations);
  t.inner_steps = j.value("inner_steps", t.inner_steps);
  t.init_steps = j.value("init_steps", t.init_steps);
  t.validate();
  return t;
}

nlohmann::json drift_task_to_json(const DriftTask& t) {
  nlohmann::json mix = nlohmann::json::array();
  for (const GaussComponent& c : t.init)
    mix.push_back({{"weight", c.weight}, {"mean", c.mean}, {"std", c.std}});
  return {{"mixture", mix},           {"reward", t.reward},
          {"gamma", t.gamma},         {"iterations", t.iterations},
          {"inner_steps", t.inner_steps}, {"init_steps", t.init_steps}};
}

std::vector<GaussComponent> drift_true_distribution(const DriftTask& t, int k) {
  if (k < 0 || k > t.iterations) throw std::domain_error("iteration outside [0,K]");
  const double gk = std::pow(t.gamma, k);
  const double shift = t.reward * (1.0 - gk) / (1.0 - t.gamma);
  std::vector<GaussComponent> out = t.init;
  for (GaussComponent& c : out) {
    c.mean = shift + gk * c.mean;
    c.std = gk * c.std;
  }
  return out;
}

ParticleSet drift_sample_target(const ParticleSet& samples, double r, double gamma) {
  if (samples.empty()) throw std::invalid_argument("drift target of empty set");
  ParticleSet out = samples;
  for (double& z : out.atoms) z = r + gamma * z;
  return out;
}

ParticleSet sample_mixture(std::span<const GaussComponent> comps, int n, std::uint64_t seed,
                           ExecMode mode) {
  if (comps.empty() || n < 1) throw std::invalid_argument("sample_mixture needs components, n >= 1");
  const Rng root(seed);
  ParticleSet out;
  out.atoms.resize(n);
  for_each_index(static_cast<std::size_t>(n), mode, [&](std::size_t i) {
    Rng rng = root.stream(i);
    double u = rng.uniform01();
    std::size_t c = 0;
    for (; c + 1 < comps.size(); ++c) {
      if (u <= comps[c].weight) break;
      u -= comps[c].weight;
    }
    out.atoms[i] = comps[c].mean + comps[c].std * rng.normal();
  });
  return out;
}

double mixture_mass(std::span<const GaussComponent> comps, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("mixture_mass needs lo <= hi");
  double mass = 0.0;
  for (const GaussComponent& c : comps)
    mass += c.weight * (normal_cdf((hi - c.mean) / c.std) - normal_cdf((lo - c.mean) / c.std));
  return mass;
}

namespace {
double mixture_cdf(std::span<const GaussComponent> comps, double x) {
  double f = 0.0;
  for (const GaussComponent& c : comps) f += c.weight * normal_cdf((x - c.mean) / c.std);
  return f;
}
}  // namespace

ParticleSet mixture_quantiles(std::span<const GaussComponent> comps, int n) {
  if (comps.empty() || n < 1) throw std::invalid_argument("mixture_quantiles needs components");
  double lo = comps[0].mean, hi = comps[0].mean;
  for (const GaussComponent& c : comps) {
    lo = std::min(lo, c.mean - 12.0 * c.std);
    hi = std::max(hi, c.mean + 12.0 * c.std);
  }
  ParticleSet out;
  out.atoms.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) / n;
    double a = lo, b = hi;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (a + b);
      (mixture_cdf(comps, mid) < u ? a : b) = mid;
    }
    out.atoms[i] = 0.5 * (a + b);
  }
  return out;
}

double bimodality_gap(const ParticleSet& samples, double mode_lo, double mode_hi,
                      double half_width) {
  if (samples.empty()) throw std::invalid_argument("bimodality_gap of empty set");
  if (!(mode_lo < mode_hi)) throw std::invalid_argument("need mode_lo < mode_hi");
  if (!(half_width > 0.0)) throw std::invalid_argument("need half_width > 0");
  const double mid = 0.5 * (mode_lo + mode_hi);
  auto mass = [&](double center) {
    std::size_t hits = 0;
    for (double x : samples.atoms)
      if (std::abs(x - center) <= half_width) ++hits;
    return static_cast<double>(hits) / samples.size();
  };
  return mass(mode_lo) + mass(mode_hi) - mass(mid);
}

// ---- Tabular MDPs ----------------------------------------------------------

double TabularMdp::max_reward_abs() const {
  double r = 0.0;
  for (const auto& atoms : rewards)
    for (const RewardAtom& a : atoms) r = std::max(r, std::abs(a.value));
  return r;
}

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("mdp needs states and actions");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma outside [0,1)");
  if (horizon_cap < 1) throw std::invalid_argument("horizon_cap must be >= 1");
  if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
      rewards.size() != static_cast<std::size_t>(n_states) * n_actions ||
      policy.size() != static_cast<std::size_t>(n_states) * n_actions ||
      absorbing.size() != static_cast<std::size_t>(n_states))
    throw std::invalid_argument("mdp table sizes inconsistent");
  for (int s = 0; s < n_states; ++s) {
    double pi_sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (pi(s, a) < 0.0) throw std::invalid_argument("negative policy probability");
      pi_sum += pi(s, a);
      double p_sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        if (p(s, a, s2) < 0.0) throw std::invalid_argument("negative transition probability");
        p_sum += p(s, a, s2);
      }
      if (std::abs(p_sum - 1.0) > 1e-9)
        throw std::invalid_argument("transition row does not sum to 1");
      double r_sum = 0.0;
      for (const RewardAtom& at : reward_atoms(s, a)) {
        if (!(at.prob > 0.0)) throw std::invalid_argument("reward atom prob must be > 0");
        r_sum += at.prob;
      }
      if (std::abs(r_sum - 1.0) > 1e-9)
        throw std::invalid_argument("reward atom probs do not sum to 1");
    }
    if (std::abs(pi_sum - 1.0) > 1e-9) throw std::invalid_argument("policy row does not sum to 1");
  }
}

nlohmann::json mdp_to_json(const TabularMdp& m) {
  nlohmann::json tr = nlohmann::json::array();
  nlohmann::json rw = nlohmann::json::array();
  nlohmann::json po = nlohmann::json::array();
  for (int s = 0; s < m.n_states; ++s) {
    nlohmann::json tr_s = nlohmann::json::array();
    nlohmann::json rw_s = nlohmann::json::array();
    nlohmann::json po_s = nlohmann::json::array();
    for (int a = 0; a < m.n_actions; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int s2 = 0; s2 < m.n_states; ++s2) row.push_back(m.p(s, a, s2));
      tr_s.push_back(row);
      nlohmann::json atoms = nlohmann::json::array();
      for (const RewardAtom& at : m.reward_atoms(s, a))
        atoms.push_back({at.value, at.prob});
      rw_s.push_back(atoms);
      po_s.push_back(m.pi(s, a));
    }
    tr.push_back(tr_s);
    rw.push_back(rw_s);
    po.push_back(po_s);
  }
  nlohmann::json abs_states = nlohmann::json::array();
  for (int s = 0; s < m.n_states; ++s)
    if (m.absorbing[s]) abs_states.push_back(s);
  return {{"name", m.name},       {"n_states", m.n_states}, {"n_actions", m.n_actions},
          {"gamma", m.gamma},     {"horizon_cap", m.horizon_cap}, {"absorbing", abs_states},
          {"transition", tr},     {"rewards", rw},          {"policy", po}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
  TabularMdp m;
  m.name = j.value("name", std::string("mdp"));
  m.n_states = j.at("n_states").get<int>();
  m.n_actions = j.at("n_actions").get<int>();
  m.gamma = j.at("gamma").get<double>();
  m.horizon_cap = j.value("horizon_cap", m.horizon_cap);
  m.transition.assign(static_cast<std::size_t>(m.n_states) * m.n_actions * m.n_states, 0.0);
  m.rewards.resize(static_cast<std::size_t>(m.n_states) * m.n_actions);
  m.policy.assign(static_cast<std::size_t>(m.n_states) * m.n_actions, 0.0);
  m.absorbing.assign(m.n_states, 0);
  for (int s : j.at("absorbing").get<std::vector<int>>()) {
    if (s < 0 || s >= m.n_states) throw std::invalid_argument("absorbing state out of range");
    m.absorbing[s] = 1;
  }
  const auto& tr = j.at("transition");
  const auto& rw = j.at("rewards");
  const auto& po = j.at("policy");
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a) {
      for (int s2 = 0; s2 < m.n_states; ++s2)
        m.transition[(s * m.n_actions + a) * m.n_states + s2] = tr.at(s).at(a).at(s2);
      for (const auto& atom : rw.at(s).at(a))
        m.rewards[s * m.n_actions + a].push_back({atom.at(0).get<double>(),
                                                  atom.at(1).get<double>()});
      m.policy[s * m.n_actions + a] = po.at(s).at(a);
    }
  m.validate();
  return m;
}

namespace {

TabularMdp bandit_skeleton(std::vector<RewardAtom> arm_rewards, const std::string& name) {
  TabularMdp m;
  m.name = name;
  m.n_states = 2;  // 0 = start, 1 = absorbing sink
  m.n_actions = 1;
  m.gamma = 0.99;
  m.horizon_cap = 8;
  m.transition = {0, 1, 0, 1};  // both states step into the sink
  m.rewards = {std::move(arm_rewards), {{0.0, 1.0}}};
  m.policy = {1.0, 1.0};
  m.absorbing = {0, 1};
  m.validate();
  return m;
}

}  // namespace

TabularMdp make_coin_bandit() {
  return bandit_skeleton({{0.0, 0.5}, {1.0, 0.5}}, "coin_bandit");
}

TabularMdp make_point_bandit(double value) {
  return bandit_skeleton({{value, 1.0}}, "point_bandit");
}

TabularMdp make_bimodal_chain() {
  TabularMdp m;
  m.name = "bimodal_chain";
  m.n_states = 3;  // 0 → 1 → 2 (absorbing)
  m.n_actions = 2;
  m.gamma = 0.9;
  m.horizon_cap = 8;
  m.transition.assign(3 * 2 * 3, 0.0);
  for (int a = 0; a < 2; ++a) {
    m.transition[(0 * 2 + a) * 3 + 1] = 1.0;
    m.transition[(1 * 2 + a) * 3 + 2] = 1.0;
    m.transition[(2 * 2 + a) * 3 + 2] = 1.0;
  }
  m.rewards = {{{0.0, 0.5}, {4.0, 0.5}},  // (0,0): the bimodal split
               {{0.5, 0.5}, {3.5, 0.5}},  // (0,1)
               {{0.0, 0.5}, {2.0, 0.5}},  // (1,0)
               {{0.5, 0.5}, {1.5, 0.5}},  // (1,1)
               {{0.0, 1.0}},
               {{0.0, 1.0}}};
  m.policy = {0.5, 0.5, 0.6, 0.4, 1.0, 0.0};
  m.absorbing = {0, 0, 1};
  m.validate();
  return m;
}

TabularMdp make_loop5() {
  TabularMdp m;
  m.name = "loop5";
  m.n_states = 5;  // a=0 advances one step, a=1 skips two; never terminates
  m.n_actions = 2;
  m.gamma = 0.9;
  m.horizon_cap = 200;
  m.transition.assign(5 * 2 * 5, 0.0);
  for (int s = 0; s < 5; ++s) {
    m.transition[(s * 2 + 0) * 5 + (s + 1) % 5] = 1.0;
    m.transition[(s * 2 + 1) * 5 + (s + 2) % 5] = 1.0;
  }
  for (int s = 0; s < 5; ++s) {
    // Centered so discounted returns sit near zero; keeps the learning
    // problem well-conditioned without changing the loop structure.
    const double base = 0.25 * s - 0.75;
    for (int a = 0; a < 2; ++a)
      m.rewards.push_back({{base, 0.5}, {base + 0.5 + 0.25 * a, 0.5}});
  }
  m.policy.assign(5 * 2, 0.0);
  for (int s = 0; s < 5; ++s) {
    m.policy[s * 2 + 0] = 0.8;
    m.policy[s * 2 + 1] = 0.2;
  }
  m.absorbing.assign(5, 0);
  m.validate();
  return m;
}

TabularMdp mdp_by_name(const std::string& name) {
  if (name == "coin_bandit") return make_coin_bandit();
  if (name == "point_bandit") return make_point_bandit();
  if (name == "bimodal_chain") return make_bimodal_chain();
  if (name == "loop5") return make_loop5();
  throw std::invalid_argument("unknown mdp name: " + name);
}

std::vector<double> one_hot(int idx, int n) {
  if (idx < 0 || idx >= n) throw std::invalid_argument("one_hot index out of range");
  std::vector<double> v(n, 0.0);
  v[idx] = 1.0;
  return v;
}

namespace {

int pick_cumulative(std::span<const double> probs, double u) {
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u <= probs[i]) return static_cast<int>(i);
    u -= probs[i];
  }
  return static_cast<int>(probs.size()) - 1;
}

double sample_reward(const TabularMdp& m, int s, int a, Rng& rng) {
  const auto& atoms = m.reward_atoms(s, a);
  double u = rng.uniform01();
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    if (u <= atoms[i].prob) return atoms[i].value;
    u -= atoms[i].prob;
  }
  return atoms.back().value;
}

int sample_next_state(const TabularMdp& m, int s, int a, Rng& rng) {
  return pick_cumulative(
      std::span<const double>(m.transition.data() + (s * m.n_actions + a) * m.n_states,
                              m.n_states),
      rng.uniform01());
}

}  // namespace

int sample_policy_action(const TabularMdp& m, int s, Rng& rng) {
  return pick_cumulative(
      std::span<const double>(m.policy.data() + s * m.n_actions, m.n_actions), rng.uniform01());
}

Transition mdp_sample_transition(const TabularMdp& m, int s, int a, Rng& rng) {
  if (s < 0 || s >= m.n_states) throw std::invalid_argument("state index out of range");
  if (a < 0 || a >= m.n_actions) throw std::invalid_argument("action index out of range");
  Transition tr;
  tr.state = one_hot(s, m.n_states);
  tr.action = one_hot(a, m.n_actions);
  tr.reward = sample_reward(m, s, a, rng);
  const int s2 = sample_next_state(m, s, a, rng);
  tr.next_state = one_hot(s2, m.n_states);
  if (m.absorbing[s2]) {
    tr.next_action = one_hot(0, m.n_actions);
    tr.mask = 0.0;
    tr.log_pi_next = 0.0;
  } else {
    const int a2 = sample_policy_action(m, s2, rng);
    tr.next_action = one_hot(a2, m.n_actions);
    tr.mask = 1.0;
    tr.log_pi_next = std::log(m.pi(s2, a2));
  }
  return tr;
}

Transition mdp_sample_transition(const TabularMdp& m, int s, Rng& rng) {
  if (s < 0 || s >= m.n_states) throw std::invalid_argument("state index out of range");
  const int a = sample_policy_action(m, s, rng);
  return mdp_sample_transition(m, s, a, rng);
}

int truncation_horizon(const TabularMdp& m, double tol) {
  const double r_max = m.max_reward_abs();
  if (m.gamma == 0.0 || r_max == 0.0) return 1;
  const double bound = tol * (1.0 - m.gamma) / r_max;
  int t = static_cast<int>(std::ceil(std::log(bound) / std::log(m.gamma)));
  if (t > 1000000) throw std::runtime_error("horizon-tolerance violation: truncation too long");
  t = std::max(t, 1);
  const bool has_sink =
      std::find(m.absorbing.begin(), m.absorbing.end(), std::uint8_t{1}) != m.absorbing.end();
  return has_sink ? std::min(t, m.horizon_cap) : t;
}

// ---- Oracles ---------------------------------------------------------------

namespace {

void finalize_oracle(ReturnOracle& o) {
  if (o.weights.empty()) {
    o.mean = mean_of(o.atoms);
    double ma = 0.0;
    for (double x : o.atoms) ma += std::abs(x);
    o.mean_abs = ma / o.atoms.size();
  } else {
    o.mean = 0.0;
    o.mean_abs = 0.0;
    for (std::size_t i = 0; i < o.atoms.size(); ++i) {
      o.mean += o.atoms[i] * o.weights[i];
      o.mean_abs += std::abs(o.atoms[i]) * o.weights[i];
    }
  }
  o.iqr = o.quantile(0.75) - o.quantile(0.25);
}

struct EnumState {
  const TabularMdp& m;
  int horizon;
  std::size_t budget;
  std::size_t used = 0;
  std::vector<double> vals, probs;
};

void enumerate_paths(EnumState& es, int s, int forced_action, int depth, double discount,
                     double ret, double prob) {
  if (++es.used > es.budget)
    throw std::runtime_error("oracle enumeration exceeds node budget");
  if (es.m.absorbing[s]) {
    es.vals.push_back(ret);
    es.probs.push_back(prob);
    return;
  }
  if (depth >= es.horizon)
    throw std::runtime_error("oracle enumeration: chain not absorbing within horizon");
  const int a_lo = forced_action >= 0 ? forced_action : 0;
  const int a_hi = forced_action >= 0 ? forced_action + 1 : es.m.n_actions;
  for (int a = a_lo; a < a_hi; ++a) {
    const double pa = forced_action >= 0 ? 1.0 : es.m.pi(s, a);
    if (pa <= 0.0) continue;
    for (const RewardAtom& at : es.m.reward_atoms(s, a)) {
      for (int s2 = 0; s2 < es.m.n_states; ++s2) {
        const double p_next = es.m.p(s, a, s2);
        if (p_next <= 0.0) continue;
        const double path = prob * pa * at.prob * p_next;
        if (path <= 1e-12) continue;
        enumerate_paths(es, s2, -1, depth + 1, discount * es.m.gamma,
                        ret + discount * at.value, path);
      }
    }
  }
}

}  // namespace

double ReturnOracle::quantile(double tau) const {
  if (weights.empty()) return atoms[quantile_index(atoms.size(), tau)];
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau outside (0,1)");
  double cum = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    cum += weights[i];
    if (cum >= tau - 1e-15) return atoms[i];
  }
  return atoms.back();
}

DiscreteDist ReturnOracle::to_dist() const {
  if (weights.empty())
    return DiscreteDist::of(atoms, std::vector<double>(atoms.size(), 1.0));
  return DiscreteDist::of(atoms, weights);
}

ReturnOracle oracle_exact(const TabularMdp& m, int s, int a, std::size_t node_budget) {
  m.validate();
  if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions)
    throw std::invalid_argument("state/action out of range");
  EnumState es{m, m.horizon_cap, node_budget, 0, {}, {}};
  enumerate_paths(es, s, a, 0, 1.0, 0.0, 1.0);

  const DiscreteDist d = DiscreteDist::of(std::move(es.vals), std::move(es.probs));
  ReturnOracle o;
  o.mode = OracleMode::Exact;
  o.atoms = d.atoms;
  o.weights = d.weights;
  finalize_oracle(o);
  return o;
}

ReturnOracle oracle_monte_carlo(const TabularMdp& m, int s, int a, std::size_t n_samples,
                                std::uint64_t seed, ExecMode mode) {
  m.validate();
  if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions)
    throw std::invalid_argument("state/action out of range");
  if (n_samples == 0) throw std::invalid_argument("need n_samples >= 1");
  const int horizon = truncation_horizon(m);

  const Rng root(seed);
  ReturnOracle o;
  o.mode = OracleMode::MonteCarlo;
  o.sample_size = n_samples;
  o.seed = seed;
  o.atoms.resize(n_samples);
  for_each_index(n_samples, mode, [&](std::size_t i) {
    Rng rng = root.stream(i);
    int cur = s, act = a;
    double ret = 0.0, disc = 1.0;
    for (int k = 0; k < horizon; ++k) {
      if (m.absorbing[cur]) break;
      if (k > 0) act = sample_policy_action(m, cur, rng);
      ret += disc * sample_reward(m, cur, act, rng);
      cur = sample_next_state(m, cur, act, rng);
      disc *= m.gamma;
    }
    o.atoms[i] = ret;
  });
  std::sort(o.atoms.begin(), o.atoms.end());
  finalize_oracle(o);
  return o;
}

ReturnOracle oracle_return_distribution(const TabularMdp& m, int s, int a,
                                        std::size_t n_samples, std::uint64_t seed,
                                        ExecMode mode) {
  try {
    return oracle_exact(m, s, a);
  } catch (const std::runtime_error&) {
    return oracle_monte_carlo(m, s, a, n_samples, seed, mode);
  }
}

double oracle_w1(const ReturnOracle& oracle, const ParticleSet& learned) {
  if (oracle.mode == OracleMode::Exact)
    return wasserstein1(oracle.to_dist(), DiscreteDist::from_particles(learned));
  // Equal-weight sample oracle: avoid re-sorting the (large) oracle atoms.
  const ParticleSet sl = sorted_copy(learned);
  if (sl.size() == oracle.atoms.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sl.size(); ++i) sum += std::abs(sl.atoms[i] - oracle.atoms[i]);
    return sum / sl.size();
  }
  const std::vector<double>& big =
      oracle.atoms.size() > sl.size() ? oracle.atoms : sl.atoms;
  const std::vector<double>& small =
      oracle.atoms.size() > sl.size() ? sl.atoms : oracle.atoms;
  double sum = 0.0;
  for (std::size_t j = 0; j < big.size(); ++j)
    sum += std::abs(big[j] - interp_quantile(small, (j + 0.5) / big.size()));
  return sum / big.size();
}

void save_oracle(const ReturnOracle& o, const std::string& prefix) {
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  nlohmann::json manifest = {{"mode", o.mode == OracleMode::Exact ? "exact" : "monte_carlo"},
                             {"sample_size", o.sample_size},
                             {"seed", o.seed},
                             {"count", o.atoms.size()},
                             {"weighted", !o.weights.empty()}};
  std::ofstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot write " + prefix + ".json");
  mf << manifest.dump(2) << "\n";
  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot write " + prefix + ".bin");
  bf.write(reinterpret_cast<const char*>(o.atoms.data()),
           static_cast<std::streamsize>(o.atoms.size() * sizeof(double)));
  if (!o.weights.empty())
    bf.write(reinterpret_cast<const char*>(o.weights.data()),
             static_cast<std::streamsize>(o.weights.size() * sizeof(double)));
}

ReturnOracle load_oracle(const std::string& prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot read " + prefix + ".json");
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  ReturnOracle o;
  o.mode = manifest.at("mode").get<std::string>() == "exact" ? OracleMode::Exact
                                                             : OracleMode::MonteCarlo;
  o.sample_size = manifest.at("sample_size").get<std::size_t>();
  o.seed = manifest.at("seed").get<std::uint64_t>();
  const std::size_t count = manifest.at("count").get<std::size_t>();
  const bool weighted = manifest.at("weighted").get<bool>();

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot read " + prefix + ".bin");
  o.atoms.resize(count);
  bf.read(reinterpret_cast<char*>(o.atoms.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (weighted) {
    o.weights.resize(count);
    bf.read(reinterpret_cast<char*>(o.weights.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  }
  if (!bf) throw std::runtime_error("oracle checkpoint truncated: " + prefix + ".bin");
  finalize_oracle(o);
  return o;
}

}  // namespace dbc
