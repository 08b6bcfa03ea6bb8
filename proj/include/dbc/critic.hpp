#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbc/bridge.hpp"
#include "dbc/net.hpp"
#include "dbc/parallel.hpp"
#include "dbc/quantile.hpp"
#include "dbc/rng.hpp"

namespace dbc {

// One environment step. mask = 0 cuts the bootstrap (transition into an
// absorbing state); log_pi_next feeds the entropy correction when
// entropy_alpha > 0 and is ignored otherwise.
struct Transition {
  std::vector<double> state, action;
  double reward = 0.0;
  std::vector<double> next_state, next_action;
  double mask = 1.0;
  double log_pi_next = 0.0;
};

struct DbcConfig {
  double gamma = 0.99;
  double kappa = 1.0;           // Huber threshold for both loss terms
  double anchor_weight = 0.01;  // w
  double quantile_weight = 1.0; // 0 trains on the anchor term alone
  int k_target = 128;          // target levels per head
  int k_online = 64;           // online levels per step
  int flow_steps = 5;          // sampler grid intervals M
  int heads = 2;               // ensemble size H
  int drop_count = 0;          // atoms dropped from the stacked target set
  double tau_target = 0.005;   // Polyak rate for target nets
  double entropy_alpha = 0.0;
  double clip_norm = 1.0;
  BridgeParams bridge;
  AdamConfig adam;
  CriticNetSpec net;  // state/action dims filled in by CriticEnsemble::make

  void validate() const;
};

DbcConfig dbc_config_from_json(const nlohmann::json& j);
nlohmann::json dbc_config_to_json(const DbcConfig& c);

// H online heads with matching target copies, per-head Adam state, and the
// precomputed sampler grid with exact interval weights.
struct CriticEnsemble {
  DbcConfig config;
  std::vector<CriticNet> online, target;
  std::vector<AdamState> opt;
  TimeGrid grid;
  std::vector<double> weights;                     // ctilde per grid interval
  std::vector<std::vector<double>> grad_scratch;   // per-head gradient buffers

  static CriticEnsemble make(DbcConfig cfg, int state_dim, int action_dim, Rng& rng);
  void sync_targets();  // hard copy online → target
};

// Deterministic bridge sampler for one return atom: start at z = τ, step
// z ← z + c̃_m·(ẑ(z, t_m) − τ) over the grid. Exact interval weights make
// the endpoint consistent for any step count.
double sample_return_atom(const CriticNet& net, std::span<const double> state,
                          std::span<const double> action, double tau,
                          std::span<const double> grid_times, std::span<const double> weights);

ParticleSet sample_returns_net(const CriticNet& net, std::span<const double> state,
                               std::span<const double> action, const QuantileLevels& levels,
                               std::span<const double> grid_times,
                               std::span<const double> weights,
                               ExecMode mode = ExecMode::Parallel);

enum class HeadSide { Online, Target };

// One particle set per head of the chosen side.
std::vector<ParticleSet> sample_returns(const CriticEnsemble& ens, HeadSide side,
                                        std::span<const double> state,
                                        std::span<const double> action,
                                        const QuantileLevels& levels,
                                        ExecMode mode = ExecMode::Parallel);

// Same atoms concatenated head-major into one set.
ParticleSet sample_returns_stacked(const CriticEnsemble& ens, HeadSide side,
                                   std::span<const double> state, std::span<const double> action,
                                   const QuantileLevels& levels,
                                   ExecMode mode = ExecMode::Parallel);

// Target particle set for one transition: τ′ levels shared across target
// heads, stacked atoms, drop_count largest removed, then
// y = r + mask·γ·(z − α·log π). Sorted ascending; independent of online
// parameters by construction.
ParticleSet build_targets(const CriticEnsemble& ens, const Transition& tr, std::uint64_t seed,
                          ExecMode mode = ExecMode::Parallel);

// Quantile regression of each prediction against every target atom,
// Σ_i Σ_j ρ^κ_{τ_i}(y_j − pred_i) / n_targets.
double quantile_loss_term(std::span<const double> preds, std::span<const double> taus,
                          std::span<const double> targets, double kappa);

// Σ_i huber(pred_i − sample_quantile(targets, τ_i), κ); targets ascending.
double anchor_loss_term(std::span<const double> preds, std::span<const double> taus,
                        std::span<const double> sorted_targets, double kappa);

struct StepReport {
  double quantile_loss = 0.0;  // both time points, averaged over heads
  double anchor_loss = 0.0;    // unweighted anchor term
  double total = 0.0;          // quantile_weight·quantile + w·anchor
  double grad_norm = 0.0;      // mean pre-clip norm across heads
  bool finite = true;
};

// One full training step: build targets from the target heads, fit the
// online heads at t = 0 and one random bridge time, soft-update targets.
StepReport train_step(CriticEnsemble& ens, const Transition& tr, std::uint64_t seed,
                      ExecMode mode = ExecMode::Parallel);

// Averages the per-transition loss (and gradient) over a minibatch before
// one optimizer step; batch of one is bitwise-identical to train_step.
StepReport train_step_batch(CriticEnsemble& ens, std::span<const Transition> batch,
                            std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

// Same online update against an explicit (sorted) target set; lets callers
// freeze targets across steps or fit directly to drawn samples. Polyak
// averaging optional because such protocols usually snapshot targets
// explicitly via sync_targets().
StepReport train_step_on_targets(CriticEnsemble& ens, std::span<const double> state,
                                 std::span<const double> action, const ParticleSet& targets,
                                 std::uint64_t seed, bool do_polyak,
                                 ExecMode mode = ExecMode::Parallel);

// Mean of sampled atoms at uniform τ levels (shared across heads).
// levels_override > 0 requests a larger evaluation grid than k_online.
double q_value(const CriticEnsemble& ens, std::span<const double> state,
               std::span<const double> action, std::uint64_t seed, int levels_override = 0,
               ExecMode mode = ExecMode::Parallel, HeadSide side = HeadSide::Online);

// Value of the full sampler run plus its parameter gradient (reverse pass
// through every sampler step), for policy-style objectives d(atom)/dθ.
double sample_return_atom_grad(const CriticNet& net, std::span<const double> state,
                               std::span<const double> action, double tau,
                               std::span<const double> grid_times,
                               std::span<const double> weights, std::span<double> dparams);

// Flow-matching baseline on scalars: linear-interpolant velocity regression,
// Euler sampling from N(0,1).
struct FlowConfig {
  std::vector<int> hidden = {64, 64};
  int embed_dim = 32;
  bool embed_projection = true;
  AdamConfig adam;
  double clip_norm = 1.0;
  int sample_steps = 100;

  void validate() const;
};

FlowConfig flow_config_from_json(const nlohmann::json& j);
nlohmann::json flow_config_to_json(const FlowConfig& c);

struct FlowBaseline {
  FlowConfig config;
  CriticNet net;  // tau_input=false, no state/action
  AdamState opt;
  std::vector<double> grad_scratch;

  static FlowBaseline make(const FlowConfig& cfg, Rng& rng);
};

// One regression step v(z_t, t) → (z₁ − z₀) over the given target batch;
// returns the mean squared error.
double fm_train_step(FlowBaseline& fm, std::span<const double> targets, std::uint64_t seed);

ParticleSet fm_sample(const FlowBaseline& fm, int n, int steps, std::uint64_t seed,
                      ExecMode mode = ExecMode::Parallel);

}  // namespace dbc
