#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbc/critic.hpp"
#include "dbc/parallel.hpp"
#include "dbc/quantile.hpp"
#include "dbc/rng.hpp"

namespace dbc {

// ---- Drifting-mixture task ------------------------------------------------

struct GaussComponent {
  double weight = 1.0;
  double mean = 0.0;
  double std = 1.0;
};

// Iterated affine pushforward y = r + γz of a Gaussian mixture: the law
// stays a mixture with shifted/shrunk components, so every iteration has an
// analytic reference.
struct DriftTask {
  std::vector<GaussComponent> init = {{0.5, -2.0, 0.3}, {0.5, 2.0, 0.3}};
  double reward = 1.0;
  double gamma = 0.9;
  int iterations = 5;
  int inner_steps = 100;    // training steps per drift iteration
  int init_steps = 10000;   // steps to fit the initial mixture

  void validate() const;
};

DriftTask drift_task_from_json(const nlohmann::json& j);
nlohmann::json drift_task_to_json(const DriftTask& t);

// Component (w, μ, σ) after k iterations: (w, r(1−γᵏ)/(1−γ) + γᵏμ, γᵏσ).
std::vector<GaussComponent> drift_true_distribution(const DriftTask& t, int k);

// Elementwise r + γz.
ParticleSet drift_sample_target(const ParticleSet& samples, double r, double gamma);

ParticleSet sample_mixture(std::span<const GaussComponent> comps, int n, std::uint64_t seed,
                           ExecMode mode = ExecMode::Parallel);

// P(lo ≤ X ≤ hi) under the mixture.
double mixture_mass(std::span<const GaussComponent> comps, double lo, double hi);

// Mixture quantiles at midpoint levels (i−½)/n by CDF bisection: a
// deterministic reference sample for W1 comparisons.
ParticleSet mixture_quantiles(std::span<const GaussComponent> comps, int n);

// Mass within ±half_width of each mode minus mass in the equally wide
// midpoint window. Positive = bimodal, near zero or negative = collapsed.
double bimodality_gap(const ParticleSet& samples, double mode_lo, double mode_hi,
                      double half_width);

// ---- Tabular MDPs ---------------------------------------------------------

struct RewardAtom {
  double value = 0.0;
  double prob = 1.0;
};

struct TabularMdp {
  std::string name;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;              // [s][a][s'] flattened
  std::vector<std::vector<RewardAtom>> rewards;  // per (s,a)
  std::vector<double> policy;                  // π(a|s), [s][a] flattened
  std::vector<std::uint8_t> absorbing;         // per state
  double gamma = 0.99;
  int horizon_cap = 100;

  double p(int s, int a, int s2) const { return transition[(s * n_actions + a) * n_states + s2]; }
  double pi(int s, int a) const { return policy[s * n_actions + a]; }
  const std::vector<RewardAtom>& reward_atoms(int s, int a) const {
    return rewards[s * n_actions + a];
  }
  double max_reward_abs() const;
  void validate() const;
};

TabularMdp mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const TabularMdp& m);

// Desk suite: point-mass, two-point, bimodal, and smooth return laws.
TabularMdp make_coin_bandit();
TabularMdp make_point_bandit(double value = 0.7);
TabularMdp make_bimodal_chain();
TabularMdp make_loop5();
TabularMdp mdp_by_name(const std::string& name);

std::vector<double> one_hot(int idx, int n);

int sample_policy_action(const TabularMdp& m, int s, Rng& rng);

// a ∼ π(·|s), r ∼ ℛ(s,a), s′ ∼ 𝒫(·|s,a), a′ ∼ π(·|s′); states and actions
// one-hot encoded; mask is 0 when s′ is absorbing.
Transition mdp_sample_transition(const TabularMdp& m, int s, Rng& rng);
Transition mdp_sample_transition(const TabularMdp& m, int s, int a, Rng& rng);

// Horizon T with γ^T·r_max/(1−γ) ≤ tol (capped by m.horizon_cap for
// absorbing chains that end sooner).
int truncation_horizon(const TabularMdp& m, double tol = 1e-6);

// ---- Return-distribution oracles ------------------------------------------

enum class OracleMode { Exact, MonteCarlo };

struct ReturnOracle {
  OracleMode mode = OracleMode::MonteCarlo;
  std::vector<double> atoms;    // ascending
  std::vector<double> weights;  // empty for equal-weight Monte Carlo samples
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double mean_abs = 0.0;
  double iqr = 0.0;

  double quantile(double tau) const;
  DiscreteDist to_dist() const;
};

// Exhaustive trajectory enumeration (paths with probability > 1e−12).
// Throws std::runtime_error when the MDP is not a finite absorbing chain
// within the node budget.
ReturnOracle oracle_exact(const TabularMdp& m, int s, int a, std::size_t node_budget = 4000000);

ReturnOracle oracle_monte_carlo(const TabularMdp& m, int s, int a, std::size_t n_samples,
                                std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

// Exact when enumerable, Monte Carlo otherwise.
ReturnOracle oracle_return_distribution(const TabularMdp& m, int s, int a,
                                        std::size_t n_samples, std::uint64_t seed,
                                        ExecMode mode = ExecMode::Parallel);

// W1 between learned equal-weight atoms and the oracle law.
double oracle_w1(const ReturnOracle& oracle, const ParticleSet& learned);

// <prefix>.json manifest + <prefix>.bin sorted atoms (and weights if exact).
void save_oracle(const ReturnOracle& o, const std::string& prefix);
ReturnOracle load_oracle(const std::string& prefix);

}  // namespace dbc
