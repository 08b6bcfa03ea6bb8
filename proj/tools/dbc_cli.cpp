#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbc/bridge.hpp"
#include "dbc/harness.hpp"
#include "dbc/props.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 2;   // acceptance comparison failed
constexpr int kExitDiverged = 3;   // training produced non-finite losses
constexpr int kExitConfig = 4;     // bad config / arguments / IO

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot read config " + path);
  return nlohmann::json::parse(f);
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    seeds.push_back(std::stoull(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// ---- bias-table ------------------------------------------------------------

int cmd_bias_table(const std::string& config_path, const std::string& rule_name,
                   const std::string& out_dir) {
  double theta_min = 0.1, theta_max = 5.0, theta_const = 1.0;
  std::vector<int> steps = dbc::published_step_counts();
  nlohmann::json config;
  if (!config_path.empty()) {
    config = load_json(config_path);
    theta_min = config.value("theta_min", theta_min);
    theta_max = config.value("theta_max", theta_max);
    theta_const = config.value("theta_const", theta_const);
    if (config.contains("steps")) steps = config.at("steps").get<std::vector<int>>();
  }
  const dbc::EulerRule rule =
      rule_name == "left" ? dbc::EulerRule::LeftEndpoint : dbc::EulerRule::RightEndpoint;

  dbc::RunManifest manifest;
  manifest.command = "bias-table";
  manifest.config = {{"theta_min", theta_min}, {"theta_max", theta_max},
                     {"theta_const", theta_const}, {"steps", steps}, {"eval_rule", rule_name}};
  manifest.version = dbc::version_string();
  const std::string manifest_path = out_dir + "/manifest.json";
  const std::string csv_path = out_dir + "/bias_table.csv";
  manifest.outputs = {csv_path};
  dbc::write_manifest(manifest, manifest_path);

  Stopwatch clock;
  const std::vector<dbc::BiasTableRow> rows =
      dbc::bias_table(rule, steps, theta_min, theta_max, theta_const);
  dbc::write_bias_table_csv(rows, csv_path);

  std::printf("steps constant%% linear%% cosine%%\n");
  for (const dbc::BiasTableRow& r : rows)
    std::printf("%5d %9.4f %7.4f %7.4f\n", r.steps, r.constant_pct, r.linear_pct, r.cosine_pct);

  int exit_code = kExitOk;
  if (rule == dbc::EulerRule::LeftEndpoint) {
    manifest.note = "left-endpoint rule: table emitted without reference comparison "
                    "(published values use the right-endpoint rule)";
    std::printf("%s\n", manifest.note.c_str());
  } else if (steps != dbc::published_step_counts()) {
    manifest.note = "non-standard step counts: no reference comparison";
    std::printf("%s\n", manifest.note.c_str());
  } else {
    const double dev = dbc::bias_table_max_deviation(rows);
    std::printf("max deviation from published table: %.4f pp (tolerance 0.05)\n", dev);
    if (dev > 0.05) {
      double worst = 0.0;
      int worst_steps = 0;
      const auto ref = dbc::published_endpoint_bias();
      for (std::size_t i = 0; i < ref.size(); ++i) {
        for (double d : {rows[i].constant_pct - ref[i].constant_pct,
                         rows[i].linear_pct - ref[i].linear_pct,
                         rows[i].cosine_pct - ref[i].cosine_pct})
          if (std::abs(d) > worst) {
            worst = std::abs(d);
            worst_steps = rows[i].steps;
          }
      }
      std::printf("MISMATCH: worst cell at M=%d deviates %.4f pp\n", worst_steps, worst);
      exit_code = kExitMismatch;
    }
  }

  manifest.wall_seconds = clock.seconds();
  dbc::write_manifest(manifest, manifest_path);
  return exit_code;
}

// ---- toy-drift -------------------------------------------------------------

int cmd_toy_drift(const std::string& config_path, const std::string& seeds_csv,
                  const std::string& out_dir) {
  dbc::DriftStudyConfig cfg;
  if (!config_path.empty()) cfg = dbc::drift_study_from_json(load_json(config_path));
  cfg.validate();
  const std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv);

  dbc::RunManifest manifest;
  manifest.command = "toy-drift";
  manifest.config = dbc::drift_study_to_json(cfg);
  manifest.seeds = seeds;
  manifest.version = dbc::version_string();
  const std::string manifest_path = out_dir + "/manifest.json";
  dbc::write_manifest(manifest, manifest_path);

  Stopwatch clock;
  nlohmann::json per_seed = nlohmann::json::array();
  int dbc_beats_fm = 0, retained = 0;
  for (std::uint64_t seed : seeds) {
    const dbc::DriftSeedResult r = dbc::run_drift_seed(cfg, seed, out_dir);
    per_seed.push_back(dbc::drift_seed_summary(r));
    const double dbc_final = r.rows.back().dbc_gap;
    const double fm_final = r.rows.back().fm_gap;
    dbc_beats_fm += dbc_final > fm_final;
    retained += r.dbc_retention() >= 0.5;
    std::printf("seed %llu: dbc gap %.4f -> %.4f (retention %.2f), fm gap -> %.4f\n",
                static_cast<unsigned long long>(seed), r.rows.front().dbc_gap, dbc_final,
                r.dbc_retention(), fm_final);
    manifest.outputs.push_back(out_dir + "/drift_metrics_seed" + std::to_string(seed) + ".csv");
  }
  const nlohmann::json summary = {{"seeds", per_seed},
                                  {"dbc_beats_fm_count", dbc_beats_fm},
                                  {"retention_ok_count", retained},
                                  {"seed_count", seeds.size()}};
  const std::string summary_path = out_dir + "/drift_summary.json";
  write_json(summary, summary_path);
  manifest.outputs.push_back(summary_path);
  manifest.wall_seconds = clock.seconds();
  dbc::write_manifest(manifest, manifest_path);
  std::printf("dbc beats fm on %d/%zu seeds; retention >= 0.5 on %d/%zu\n", dbc_beats_fm,
              seeds.size(), retained, seeds.size());
  return kExitOk;
}

// ---- train-mdp -------------------------------------------------------------

int cmd_train_mdp(const std::string& config_path, const std::string& seeds_csv, int steps_override,
                  const std::string& out_dir) {
  dbc::MdpTrainConfig cfg;
  if (!config_path.empty()) cfg = dbc::mdp_train_from_json(load_json(config_path));
  if (steps_override > 0) cfg.steps = steps_override;
  cfg.validate();
  const std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv);

  dbc::RunManifest manifest;
  manifest.command = "train-mdp";
  manifest.config = dbc::mdp_train_to_json(cfg);
  manifest.seeds = seeds;
  manifest.version = dbc::version_string();
  const std::string manifest_path = out_dir + "/manifest.json";
  dbc::write_manifest(manifest, manifest_path);

  Stopwatch clock;
  nlohmann::json per_seed = nlohmann::json::array();
  std::vector<dbc::MdpSeedResult> results;
  for (std::uint64_t seed : seeds) {
    results.push_back(dbc::run_mdp_seed(cfg, seed, out_dir));
    per_seed.push_back(dbc::mdp_seed_summary(results.back()));
    std::printf("seed %llu: %s\n", static_cast<unsigned long long>(seed),
                results.back().all_pass() ? "all (s,a) within tolerance" : "outside tolerance");
    manifest.outputs.push_back(out_dir + "/mdp_metrics_seed" + std::to_string(seed) + ".csv");
  }

  // Majority vote per (s,a) across seeds.
  int majority_ok = 0;
  const std::size_t n_pairs = results.front().finals.size();
  for (std::size_t i = 0; i < n_pairs; ++i) {
    int votes = 0;
    for (const dbc::MdpSeedResult& r : results) votes += r.finals[i].pass();
    majority_ok += 2 * votes > static_cast<int>(results.size());
  }
  const nlohmann::json summary = {{"mdp", cfg.mdp.name},
                                  {"seeds", per_seed},
                                  {"pairs_total", n_pairs},
                                  {"pairs_majority_pass", majority_ok}};
  const std::string summary_path = out_dir + "/mdp_summary.json";
  write_json(summary, summary_path);
  manifest.outputs.push_back(summary_path);
  manifest.wall_seconds = clock.seconds();
  dbc::write_manifest(manifest, manifest_path);
  std::printf("%s: %d/%zu (s,a) pairs pass on a majority of seeds\n", cfg.mdp.name.c_str(),
              majority_ok, n_pairs);
  return kExitOk;
}

// ---- props -----------------------------------------------------------------

int cmd_props(const std::string& suite, const std::string& out_dir) {
  std::vector<dbc::PropResult> results;
  auto append = [&](std::vector<dbc::PropResult> r) {
    results.insert(results.end(), r.begin(), r.end());
  };
  const bool all = suite == "all";
  if (all || suite == "bridge") append(dbc::run_bridge_props());
  if (all || suite == "quantile") append(dbc::run_quantile_props());
  if (all || suite == "asymptotics") append(dbc::run_quantile_asymptotics());
  if (all || suite == "net") append(dbc::run_net_props());
  if (all || suite == "critic") append(dbc::run_critic_props());
  if (all || suite == "envs") append(dbc::run_envs_props());
  if (results.empty()) throw std::invalid_argument("unknown suite: " + suite);

  std::fputs(dbc::format_props(results).c_str(), stdout);

  dbc::RunManifest manifest;
  manifest.command = "props";
  manifest.config = {{"suite", suite}};
  manifest.version = dbc::version_string();
  const std::string report_path = out_dir + "/props_report.json";
  manifest.outputs = {report_path};
  write_json(dbc::props_to_json(results), report_path);
  dbc::write_manifest(manifest, out_dir + "/manifest.json");
  return dbc::all_pass(results) ? kExitOk : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-bridge distributional critic experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds_csv = "0,1,2";
  std::string eval_rule = "right", suite = "all";
  int steps_override = 0;

  CLI::App* bias = app.add_subcommand("bias-table", "Euler endpoint-bias table");
  bias->add_option("--config", config_path, "schedule bounds / step list JSON");
  bias->add_option("--eval-rule", eval_rule, "left|right")
      ->check(CLI::IsMember({"left", "right"}));
  bias->add_option("--out", out_dir, "output directory");

  CLI::App* drift = app.add_subcommand("toy-drift", "iterated pushforward of a bimodal mixture");
  drift->add_option("--config", config_path, "drift study config JSON");
  drift->add_option("--seeds", seeds_csv, "comma-separated seed list");
  drift->add_option("--out", out_dir, "output directory");

  CLI::App* train = app.add_subcommand("train-mdp", "train the critic on a tabular MDP");
  train->add_option("--config", config_path, "mdp training config JSON");
  train->add_option("--seeds", seeds_csv, "comma-separated seed list");
  train->add_option("--steps", steps_override, "override training step count");
  train->add_option("--out", out_dir, "output directory");

  CLI::App* props = app.add_subcommand("props", "run property suites");
  props->add_option("--suite", suite, "all|bridge|quantile|asymptotics|net|critic|envs");
  props->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (out_dir.empty()) out_dir = dbc::default_output_root() + "/" + cmd;
    if (cmd == "bias-table") return cmd_bias_table(config_path, eval_rule, out_dir);
    if (cmd == "toy-drift") return cmd_toy_drift(config_path, seeds_csv, out_dir);
    if (cmd == "train-mdp") return cmd_train_mdp(config_path, seeds_csv, steps_override, out_dir);
    return cmd_props(suite, out_dir);
  } catch (const dbc::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
