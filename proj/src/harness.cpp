#include "dbc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dbc/quantile.hpp"

namespace dbc {

std::string version_string() { return "dbc 0.1.0"; }

std::string default_output_root() {
  const char* env = std::getenv("DBC_OUT_ROOT");
  return env && *env ? env : "runs";
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"command", m.command}, {"config", m.config},   {"seeds", m.seeds},
          {"outputs", m.outputs}, {"wall_seconds", m.wall_seconds},
          {"version", m.version.empty() ? version_string() : m.version},
          {"note", m.note}};
}

namespace {

void ensure_parent(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

void write_manifest(const RunManifest& m, const std::string& path) {
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest " + path);
  f << manifest_to_json(m).dump(2) << "\n";
}

namespace {

std::ofstream open_csv(const std::string& path, const std::string& header) {
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << header << "\n";
  return f;
}

void write_particles_csv(const ParticleSet& p, const std::string& path) {
  std::ofstream f = open_csv(path, "value");
  for (double a : p.atoms) f << format_double(a) << "\n";
}

}  // namespace

// ---- Euler endpoint-bias table --------------------------------------------

std::vector<int> published_step_counts() { return {1, 2, 5, 10, 20, 50, 100, 1000}; }

std::vector<BiasTableRow> published_endpoint_bias() {
  return {{1, 14.91, 21.44, 21.44}, {2, 9.48, 6.93, 18.75}, {5, 4.29, 5.41, 6.85},
          {10, 2.23, 3.07, 3.42},   {20, 1.13, 1.62, 1.71}, {50, 0.46, 0.67, 0.68},
          {100, 0.23, 0.34, 0.34},  {1000, 0.02, 0.03, 0.03}};
}

void write_bias_table_csv(std::span<const BiasTableRow> rows, const std::string& path) {
  std::ofstream f = open_csv(path, "steps,constant_pct,linear_pct,cosine_pct");
  for (const BiasTableRow& r : rows)
    f << r.steps << "," << format_double(r.constant_pct) << "," << format_double(r.linear_pct)
      << "," << format_double(r.cosine_pct) << "\n";
}

double bias_table_max_deviation(std::span<const BiasTableRow> rows) {
  const std::vector<BiasTableRow> ref = published_endpoint_bias();
  if (rows.size() != ref.size())
    throw std::invalid_argument("bias table must carry the published step counts");
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (rows[i].steps != ref[i].steps)
      throw std::invalid_argument("bias table must carry the published step counts");
    worst = std::max({worst, std::abs(rows[i].constant_pct - ref[i].constant_pct),
                      std::abs(rows[i].linear_pct - ref[i].linear_pct),
                      std::abs(rows[i].cosine_pct - ref[i].cosine_pct)});
  }
  return worst;
}

// ---- Drifting-mixture study ------------------------------------------------

void DriftStudyConfig::validate() const {
  task.validate();
  dbc.validate();
  flow.validate();
  if (eval_samples < 2 || eval_samples % dbc.heads != 0)
    throw std::invalid_argument("eval_samples must be a positive multiple of heads");
  if (fm_batch < 1) throw std::invalid_argument("fm_batch must be >= 1");
}

DriftStudyConfig drift_study_from_json(const nlohmann::json& j) {
  DriftStudyConfig c;
  if (j.contains("task")) c.task = drift_task_from_json(j.at("task"));
  if (j.contains("dbc")) c.dbc = dbc_config_from_json(j.at("dbc"));
  if (j.contains("flow")) c.flow = flow_config_from_json(j.at("flow"));
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  c.fm_batch = j.value("fm_batch", c.fm_batch);
  c.validate();
  return c;
}

nlohmann::json drift_study_to_json(const DriftStudyConfig& c) {
  return {{"task", drift_task_to_json(c.task)},
          {"dbc", dbc_config_to_json(c.dbc)},
          {"flow", flow_config_to_json(c.flow)},
          {"eval_samples", c.eval_samples},
          {"fm_batch", c.fm_batch}};
}

double DriftSeedResult::dbc_retention() const {
  if (rows.empty() || rows.front().dbc_gap <= 0.0) return 0.0;
  return rows.back().dbc_gap / rows.front().dbc_gap;
}

DriftSeedResult run_drift_seed(const DriftStudyConfig& cfg, std::uint64_t seed,
                               const std::string& out_dir, ExecMode mode) {
  cfg.validate();
  const DriftTask& task = cfg.task;
  DbcConfig dc = cfg.dbc;
  dc.gamma = task.gamma;  // the pushforward and the trainer share one γ

  const Rng root(seed);
  Rng ens_rng = root.stream(1);
  CriticEnsemble ens = CriticEnsemble::make(dc, 0, 0, ens_rng);
  Rng fm_rng = root.stream(2);
  FlowBaseline fm = FlowBaseline::make(cfg.flow, fm_rng);
  const Rng dbc_fit = root.stream(3), fm_fit = root.stream(4);
  const Rng dbc_iter = root.stream(5), fm_iter = root.stream(6);
  const Rng eval_rng = root.stream(7);

  const std::vector<double> none;  // the task is state- and action-free

  DriftSeedResult res;
  res.seed = seed;

  auto guard = [&](bool finite, const char* which, int k, int step) {
    if (!finite)
      throw DivergenceError(std::string(which) + " loss non-finite at iteration " +
                            std::to_string(k) + " step " + std::to_string(step));
  };

  auto eval_iteration = [&](int k) {
    const std::vector<GaussComponent> comps = drift_true_distribution(task, k);
    const ParticleSet truth = mixture_quantiles(comps, cfg.eval_samples);
    const QuantileLevels levels = QuantileLevels::midpoints(cfg.eval_samples / dc.heads);
    const ParticleSet zd = sample_returns_stacked(ens, HeadSide::Online, none, none, levels, mode);
    const ParticleSet zf =
        fm_sample(fm, cfg.eval_samples, cfg.flow.sample_steps, eval_rng.stream(k).root_seed(), mode);

    const double m1 = comps.front().mean, m2 = comps.back().mean;
    const double hw = 0.5 * comps.front().std;
    const double mid = 0.5 * (m1 + m2);
    DriftIterationRow row;
    row.iteration = k;
    row.dbc_w1 = wasserstein1(zd, truth);
    row.dbc_gap = bimodality_gap(zd, m1, m2, hw);
    row.fm_w1 = wasserstein1(zf, truth);
    row.fm_gap = bimodality_gap(zf, m1, m2, hw);
    row.true_gap = mixture_mass(comps, m1 - hw, m1 + hw) + mixture_mass(comps, m2 - hw, m2 + hw) -
                   mixture_mass(comps, mid - hw, mid + hw);
    res.rows.push_back(row);

    if (!out_dir.empty()) {
      const std::string tag = "_seed" + std::to_string(seed) + "_iter" + std::to_string(k);
      write_particles_csv(zd, out_dir + "/samples_dbc" + tag + ".csv");
      write_particles_csv(zf, out_dir + "/samples_fm" + tag + ".csv");
    }
  };

  // Iteration 0: fit the initial mixture from fresh draws.
  for (int step = 0; step < task.init_steps; ++step) {
    ParticleSet batch = sample_mixture(task.init, dc.k_target,
                                       dbc_fit.stream(2 * step).root_seed(), mode);
    std::sort(batch.atoms.begin(), batch.atoms.end());
    const StepReport r = train_step_on_targets(ens, none, none, batch,
                                               dbc_fit.stream(2 * step + 1).root_seed(),
                                               /*do_polyak=*/false, mode);
    guard(r.finite, "dbc", 0, step);
  }
  for (int step = 0; step < task.init_steps; ++step) {
    const ParticleSet batch = sample_mixture(task.init, cfg.fm_batch,
                                             fm_fit.stream(2 * step).root_seed(), mode);
    const double mse = fm_train_step(fm, batch.atoms, fm_fit.stream(2 * step + 1).root_seed());
    guard(std::isfinite(mse), "flow", 0, step);
  }
  eval_iteration(0);

  // Iterations 1..K: bootstrap each method from its own previous iterate.
  for (int k = 1; k <= task.iterations; ++k) {
    ens.sync_targets();
    for (int step = 0; step < task.inner_steps; ++step) {
      const std::uint64_t idx = static_cast<std::uint64_t>(k) * task.inner_steps + step;
      Rng level_rng(dbc_iter.stream(2 * idx).root_seed());
      const QuantileLevels levels = QuantileLevels::sample_uniform(dc.k_target, level_rng);
      ParticleSet z = sample_returns_stacked(ens, HeadSide::Target, none, none, levels, mode);
      z = droptop(z, static_cast<std::size_t>(dc.drop_count));
      const ParticleSet y = drift_sample_target(z, task.reward, task.gamma);
      const StepReport r = train_step_on_targets(ens, none, none, y,
                                                 dbc_iter.stream(2 * idx + 1).root_seed(),
                                                 /*do_polyak=*/false, mode);
      guard(r.finite, "dbc", k, step);
    }
    const FlowBaseline snapshot = fm;
    for (int step = 0; step < task.inner_steps; ++step) {
      const std::uint64_t idx = static_cast<std::uint64_t>(k) * task.inner_steps + step;
      const ParticleSet z = fm_sample(snapshot, cfg.fm_batch, cfg.flow.sample_steps,
                                      fm_iter.stream(2 * idx).root_seed(), mode);
      const ParticleSet y = drift_sample_target(z, task.reward, task.gamma);
      const double mse = fm_train_step(fm, y.atoms, fm_iter.stream(2 * idx + 1).root_seed());
      guard(std::isfinite(mse), "flow", k, step);
    }
    eval_iteration(k);
  }

  if (!out_dir.empty()) {
    std::ofstream f = open_csv(out_dir + "/drift_metrics_seed" + std::to_string(seed) + ".csv",
                               "iteration,dbc_w1,dbc_gap,fm_w1,fm_gap,true_gap");
    for (const DriftIterationRow& r : res.rows)
      f << r.iteration << "," << format_double(r.dbc_w1) << "," << format_double(r.dbc_gap) << ","
        << format_double(r.fm_w1) << "," << format_double(r.fm_gap) << ","
        << format_double(r.true_gap) << "\n";
  }
  return res;
}

nlohmann::json drift_seed_summary(const DriftSeedResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const DriftIterationRow& row : r.rows)
    rows.push_back({{"iteration", row.iteration},
                    {"dbc_w1", row.dbc_w1},
                    {"dbc_gap", row.dbc_gap},
                    {"fm_w1", row.fm_w1},
                    {"fm_gap", row.fm_gap},
                    {"true_gap", row.true_gap}});
  return {{"seed", r.seed},
          {"iterations", rows},
          {"dbc_retention", r.dbc_retention()},
          {"dbc_final_gap", r.rows.empty() ? 0.0 : r.rows.back().dbc_gap},
          {"fm_final_gap", r.rows.empty() ? 0.0 : r.rows.back().fm_gap}};
}

// ---- Tabular-MDP training --------------------------------------------------

void MdpTrainConfig::validate() const {
  mdp.validate();
  dbc.validate();
  if (steps < 1 || eval_every < 1) throw std::invalid_argument("steps/eval_every must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (eval_levels < 1 || q_levels < 1) throw std::invalid_argument("eval levels must be >= 1");
  if (oracle_samples < 2) throw std::invalid_argument("oracle_samples must be >= 2");
}

MdpTrainConfig mdp_train_from_json(const nlohmann::json& j) {
  MdpTrainConfig c;
  if (j.contains("mdp")) {
    if (j.at("mdp").is_string())
      c.mdp = mdp_by_name(j.at("mdp").get<std::string>());
    else
      c.mdp = mdp_from_json(j.at("mdp"));
  }
  if (j.contains("dbc")) c.dbc = dbc_config_from_json(j.at("dbc"));
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.eval_levels = j.value("eval_levels", c.eval_levels);
  c.q_levels = j.value("q_levels", c.q_levels);
  c.oracle_samples = j.value("oracle_samples", c.oracle_samples);
  c.validate();
  return c;
}

nlohmann::json mdp_train_to_json(const MdpTrainConfig& c) {
  return {{"mdp", mdp_to_json(c.mdp)},
          {"dbc", dbc_config_to_json(c.dbc)},
          {"steps", c.steps},
          {"batch", c.batch},
          {"eval_every", c.eval_every},
          {"eval_levels", c.eval_levels},
          {"q_levels", c.q_levels},
          {"oracle_samples", c.oracle_samples}};
}

bool MdpSeedResult::all_pass() const {
  return std::all_of(finals.begin(), finals.end(),
                     [](const PairMetric& p) { return p.pass(); });
}

MdpSeedResult run_mdp_seed(const MdpTrainConfig& cfg, std::uint64_t seed,
                           const std::string& out_dir, ExecMode mode) {
  cfg.validate();
  const TabularMdp& m = cfg.mdp;
  DbcConfig dc = cfg.dbc;
  dc.gamma = m.gamma;  // the critic's discount is the environment's

  const Rng root(seed);
  Rng ens_rng = root.stream(1);
  CriticEnsemble ens = CriticEnsemble::make(dc, m.n_states, m.n_actions, ens_rng);
  Rng env_rng = root.stream(2);
  const Rng step_seeds = root.stream(3);

  std::vector<std::pair<int, int>> pairs;
  std::vector<int> start_states;
  for (int s = 0; s < m.n_states; ++s) {
    if (m.absorbing[s]) continue;
    start_states.push_back(s);
    for (int a = 0; a < m.n_actions; ++a) pairs.push_back({s, a});
  }
  if (pairs.empty()) throw std::invalid_argument("mdp has no non-absorbing states");

  // Oracles use a fixed seed so every training seed is scored against the
  // same reference law.
  std::vector<ReturnOracle> oracles;
  oracles.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    oracles.push_back(oracle_return_distribution(m, pairs[i].first, pairs[i].second,
                                                 cfg.oracle_samples, 424200 + i, mode));
    if (!out_dir.empty())
      save_oracle(oracles.back(), out_dir + "/oracle_s" + std::to_string(pairs[i].first) + "_a" +
                                      std::to_string(pairs[i].second));
  }

  std::ofstream metrics, losses;
  if (!out_dir.empty()) {
    const std::string tag = "_seed" + std::to_string(seed);
    metrics = open_csv(out_dir + "/mdp_metrics" + tag + ".csv", "step,state,action,w1,q_err");
    losses = open_csv(out_dir + "/mdp_losses" + tag + ".csv",
                      "step,quantile_loss,anchor_loss,total");
  }

  MdpSeedResult res;
  res.seed = seed;

  const QuantileLevels eval_levels = QuantileLevels::midpoints(cfg.eval_levels);
  auto evaluate = [&](int step, bool final) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [s, a] = pairs[i];
      const std::vector<double> sh = one_hot(s, m.n_states);
      const std::vector<double> ah = one_hot(a, m.n_actions);
      // Evaluate the Polyak-averaged heads: the EMA is the deployable critic
      // and smooths per-step optimizer jitter out of the final scores.
      const ParticleSet learned =
          sample_returns_stacked(ens, HeadSide::Target, sh, ah, eval_levels, mode);
      const double w1 = oracle_w1(oracles[i], learned);
      const double q = q_value(ens, sh, ah, 777, cfg.q_levels, mode, HeadSide::Target);
      const double q_err = std::abs(q - oracles[i].mean);
      if (metrics.is_open())
        metrics << step << "," << s << "," << a << "," << format_double(w1) << ","
                << format_double(q_err) << "\n";
      if (final) {
        PairMetric pm;
        pm.state = s;
        pm.action = a;
        pm.w1 = w1;
        pm.w1_tol = 0.1 * oracles[i].iqr;
        pm.q_err = q_err;
        pm.q_tol = 0.05 * oracles[i].mean_abs;
        res.finals.push_back(pm);
      }
    }
  };

  evaluate(0, cfg.steps == 0);
  std::vector<Transition> minibatch(cfg.batch);
  for (int t = 0; t < cfg.steps; ++t) {
    for (Transition& tr : minibatch) {
      const int s = start_states[env_rng.index(start_states.size())];
      tr = mdp_sample_transition(m, s, env_rng);
    }
    const StepReport r = train_step_batch(ens, minibatch, step_seeds.stream(t).root_seed(), mode);
    if (!r.finite)
      throw DivergenceError("training loss non-finite at step " + std::to_string(t));
    if (losses.is_open())
      losses << t << "," << format_double(r.quantile_loss) << ","
             << format_double(r.anchor_loss) << "," << format_double(r.total) << "\n";
    if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.steps)
      evaluate(t + 1, t + 1 == cfg.steps);
  }
  return res;
}

nlohmann::json mdp_seed_summary(const MdpSeedResult& r) {
  nlohmann::json finals = nlohmann::json::array();
  for (const PairMetric& p : r.finals)
    finals.push_back({{"state", p.state},
                      {"action", p.action},
                      {"w1", p.w1},
                      {"w1_tol", p.w1_tol},
                      {"q_err", p.q_err},
                      {"q_tol", p.q_tol},
                      {"pass", p.pass()}});
  return {{"seed", r.seed}, {"finals", finals}, {"all_pass", r.all_pass()}};
}

}  // namespace dbc
