#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbc/bridge.hpp"
#include "dbc/critic.hpp"
#include "dbc/envs.hpp"
#include "dbc/parallel.hpp"

namespace dbc {

std::string version_string();

// Output root for experiment artifacts: $DBC_OUT_ROOT if set, else "runs".
std::string default_output_root();

// Shortest-unambiguous double formatting (%.10g) so metric CSVs are
// byte-identical across reruns.
std::string format_double(double x);

// Training blew up (non-finite loss); the CLI maps this to its own exit code.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Written before a run starts (wall_seconds < 0) and finalized after; the
// embedded config JSON round-trips losslessly so a run can be replayed from
// its manifest alone.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  double wall_seconds = -1.0;
  std::string version;
  std::string note;
};

nlohmann::json manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);

// ---- Euler endpoint-bias table --------------------------------------------

// Reference endpoint-bias table (%), rounded to two decimals, for the
// standard schedules at θ_const=1.0, θ∈[0.1,5.0], right-endpoint Euler.
std::vector<BiasTableRow> published_endpoint_bias();
std::vector<int> published_step_counts();

void write_bias_table_csv(std::span<const BiasTableRow> rows, const std::string& path);

// Worst |computed − published| in percentage points; rows must carry exactly
// the published step counts.
double bias_table_max_deviation(std::span<const BiasTableRow> rows);

// ---- Drifting-mixture study ------------------------------------------------

struct DriftStudyConfig {
  DriftTask task;
  DbcConfig dbc;      // state/action free critic: net conditions on (z, t, τ)
  FlowConfig flow;
  int eval_samples = 10000;
  int fm_batch = 128;

  void validate() const;
};

DriftStudyConfig drift_study_from_json(const nlohmann::json& j);
nlohmann::json drift_study_to_json(const DriftStudyConfig& c);

struct DriftIterationRow {
  int iteration = 0;
  double dbc_w1 = 0.0, dbc_gap = 0.0;
  double fm_w1 = 0.0, fm_gap = 0.0;
  double true_gap = 0.0;
};

struct DriftSeedResult {
  std::uint64_t seed = 0;
  std::vector<DriftIterationRow> rows;

  double dbc_retention() const;  // final gap / iteration-0 gap
};

// Trains both methods through the iterated pushforward; evaluates after each
// iteration (10⁴ samples: W1 to the analytic mixture plus bimodality gap).
// out_dir non-empty → metrics CSV and per-iteration sample CSVs are written.
// Throws DivergenceError on non-finite losses.
DriftSeedResult run_drift_seed(const DriftStudyConfig& cfg, std::uint64_t seed,
                               const std::string& out_dir, ExecMode mode = ExecMode::Parallel);

nlohmann::json drift_seed_summary(const DriftSeedResult& r);

// ---- Tabular-MDP training --------------------------------------------------

struct MdpTrainConfig {
  TabularMdp mdp;
  DbcConfig dbc;               // gamma is overridden by the MDP's
  int steps = 6000;
  int batch = 1;               // transitions averaged per optimizer step
  int eval_every = 500;
  int eval_levels = 2048;      // per-head sampler levels for W1 evaluation
  int q_levels = 4096;         // q_value evaluation grid
  std::size_t oracle_samples = 200000;  // Monte Carlo fallback size

  void validate() const;
};

MdpTrainConfig mdp_train_from_json(const nlohmann::json& j);
nlohmann::json mdp_train_to_json(const MdpTrainConfig& c);

struct PairMetric {
  int state = 0, action = 0;
  double w1 = 0.0, w1_tol = 0.0;
  double q_err = 0.0, q_tol = 0.0;

  bool pass() const { return w1 <= w1_tol && q_err <= q_tol; }
};

struct MdpSeedResult {
  std::uint64_t seed = 0;
  std::vector<PairMetric> finals;  // one per non-absorbing (s,a)

  bool all_pass() const;
};

// Trains on sampled transitions (uniform non-absorbing start state, policy
// action); every eval_every steps logs W1(learned, oracle) and
// |q_value − oracle mean| per (s,a). Tolerances: 0.1·IQR and 0.05·mean|Z|.
// out_dir non-empty → metrics/loss CSVs and oracle cache are written.
MdpSeedResult run_mdp_seed(const MdpTrainConfig& cfg, std::uint64_t seed,
                           const std::string& out_dir, ExecMode mode = ExecMode::Parallel);

nlohmann::json mdp_seed_summary(const MdpSeedResult& r);

}  // namespace dbc
