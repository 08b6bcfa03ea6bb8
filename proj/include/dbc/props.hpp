#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dbc/parallel.hpp"

namespace dbc {

// One checked property: the measured statistic, the bound it was held to,
// and whether it passed. detail carries free-form context (worst case, grid
// sizes) for the JSON report.
struct PropResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double bound = 0.0;
  std::string detail;
};

// Property suites, one per module. Each entry mirrors a stated invariant;
// the suites are reused by the unit tests, the `props` CLI subcommand, and
// the acceptance checks.
std::vector<PropResult> run_bridge_props();
std::vector<PropResult> run_quantile_props();
std::vector<PropResult> run_quantile_asymptotics(ExecMode mode = ExecMode::Parallel);
std::vector<PropResult> run_net_props();
std::vector<PropResult> run_critic_props();
std::vector<PropResult> run_envs_props(ExecMode mode = ExecMode::Parallel);

bool all_pass(const std::vector<PropResult>& results);
std::string format_props(const std::vector<PropResult>& results);  // one line per property
nlohmann::json props_to_json(const std::vector<PropResult>& results);

}  // namespace dbc
