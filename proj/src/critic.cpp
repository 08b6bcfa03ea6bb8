#include "dbc/critic.hpp"

#include <cmath>
#include <stdexcept>

namespace dbc {

void DbcConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma outside [0,1)");
  if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
  if (anchor_weight < 0.0) throw std::invalid_argument("anchor_weight must be >= 0");
  if (quantile_weight < 0.0) throw std::invalid_argument("quantile_weight must be >= 0");
  if (quantile_weight == 0.0 && anchor_weight == 0.0)
    throw std::invalid_argument("need a nonzero loss term");
  if (k_online < 1 || k_target < k_online)
    throw std::invalid_argument("need k_target >= k_online >= 1");
  if (flow_steps < 1) throw std::invalid_argument("flow_steps must be >= 1");
  if (heads < 1) throw std::invalid_argument("heads must be >= 1");
  if (drop_count < 0 || drop_count >= heads * k_target)
    throw std::invalid_argument("drop_count must leave at least one target atom");
  if (!(tau_target > 0.0 && tau_target <= 1.0))
    throw std::invalid_argument("tau_target outside (0,1]");
  if (entropy_alpha < 0.0) throw std::invalid_argument("entropy_alpha must be >= 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  bridge.validate();
}

nlohmann::json dbc_config_to_json(const DbcConfig& c) {
  return {{"gamma", c.gamma},
          {"kappa", c.kappa},
          {"anchor_weight", c.anchor_weight},
          {"quantile_weight", c.quantile_weight},
          {"k_target", c.k_target},
          {"k_online", c.k_online},
          {"flow_steps", c.flow_steps},
          {"heads", c.heads},
          {"drop_count", c.drop_count},
          {"tau_target", c.tau_target},
          {"entropy_alpha", c.entropy_alpha},
          {"clip_norm", c.clip_norm},
          {"bridge",
           {{"schedule", schedule_to_json(c.bridge.schedule)}, {"lambda2", c.bridge.lambda2}}},
          {"adam",
           {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
            {"eps", c.adam.eps}}},
          {"net", net_spec_to_json(c.net)}};
}

DbcConfig dbc_config_from_json(const nlohmann::json& j) {
  DbcConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.kappa = j.value("kappa", c.kappa);
  c.anchor_weight = j.value("anchor_weight", c.anchor_weight);
  c.quantile_weight = j.value("quantile_weight", c.quantile_weight);
  c.k_target = j.value("k_target", c.k_target);
  c.k_online = j.value("k_online", c.k_online);
  c.flow_steps = j.value("flow_steps", c.flow_steps);
  c.heads = j.value("heads", c.heads);
  c.drop_count = j.value("drop_count", c.drop_count);
  c.tau_target = j.value("tau_target", c.tau_target);
  c.entropy_alpha = j.value("entropy_alpha", c.entropy_alpha);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (j.contains("bridge")) {
    const auto& b = j.at("bridge");
    if (b.contains("schedule")) c.bridge.schedule = schedule_from_json(b.at("schedule"));
    c.bridge.lambda2 = b.value("lambda2", c.bridge.lambda2);
  }
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.lr = a.value("lr", c.adam.lr);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
  }
  if (j.contains("net")) c.net = net_spec_from_json(j.at("net"));
  c.validate();
  return c;
}

CriticEnsemble CriticEnsemble::make(DbcConfig cfg, int state_dim, int action_dim, Rng& rng) {
  cfg.net.state_dim = state_dim;
  cfg.net.action_dim = action_dim;
  cfg.net.tau_input = true;
  cfg.validate();

  CriticEnsemble ens;
  ens.config = cfg;
  ens.grid = TimeGrid::uniform(cfg.flow_steps);
  ens.weights = interval_weights(cfg.bridge, ens.grid);
  for (int h = 0; h < cfg.heads; ++h) {
    Rng head_rng = rng.stream(static_cast<std::uint64_t>(h));
    ens.online.push_back(CriticNet::make(cfg.net, head_rng));
    ens.target.push_back(ens.online.back());
    ens.opt.push_back(AdamState::make(cfg.adam, ens.online.back().param_count()));
    ens.grad_scratch.emplace_back(ens.online.back().param_count(), 0.0);
  }
  return ens;
}

void CriticEnsemble::sync_targets() {
  for (int h = 0; h < config.heads; ++h) target[h].params = online[h].params;
}

double sample_return_atom(const CriticNet& net, std::span<const double> state,
                          std::span<const double> action, double tau,
                          std::span<const double> grid_times, std::span<const double> weights) {
  thread_local NetTrace trace;
  double z = tau;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const double zhat = critic_forward(net, state, action, z, grid_times[m], tau, trace);
    z += weights[m] * (zhat - tau);
  }
  return z;
}

ParticleSet sample_returns_net(const CriticNet& net, std::span<const double> state,
                               std::span<const double> action, const QuantileLevels& levels,
                               std::span<const double> grid_times,
                               std::span<const double> weights, ExecMode mode) {
  levels.validate();
  ParticleSet out;
  out.atoms.resize(levels.taus.size());
  for_each_index(levels.taus.size(), mode, [&](std::size_t i) {
    out.atoms[i] = sample_return_atom(net, state, action, levels.taus[i], grid_times, weights);
  });
  return out;
}

ParticleSet sample_returns_stacked(const CriticEnsemble& ens, HeadSide side,
                                   std::span<const double> state, std::span<const double> action,
                                   const QuantileLevels& levels, ExecMode mode) {
  levels.validate();
  const std::vector<CriticNet>& nets = side == HeadSide::Online ? ens.online : ens.target;
  const std::size_t k = levels.taus.size();
  ParticleSet out;
  out.atoms.resize(nets.size() * k);
  for_each_index(out.atoms.size(), mode, [&](std::size_t idx) {
    const std::size_t h = idx / k;
    const std::size_t j = idx % k;
    out.atoms[idx] = sample_return_atom(nets[h], state, action, levels.taus[j],
                                        ens.grid.points, ens.weights);
  });
  return out;
}

std::vector<ParticleSet> sample_returns(const CriticEnsemble& ens, HeadSide side,
                                        std::span<const double> state,
                                        std::span<const double> action,
                                        const QuantileLevels& levels, ExecMode mode) {
  const ParticleSet stacked = sample_returns_stacked(ens, side, state, action, levels, mode);
  const std::size_t k = levels.taus.size();
  std::vector<ParticleSet> per_head(ens.config.heads);
  for (std::size_t h = 0; h < per_head.size(); ++h)
    per_head[h].atoms.assign(stacked.atoms.begin() + h * k, stacked.atoms.begin() + (h + 1) * k);
  return per_head;
}

ParticleSet build_targets(const CriticEnsemble& ens, const Transition& tr, std::uint64_t seed,
                          ExecMode mode) {
  Rng rng(seed);
  const QuantileLevels levels =
      QuantileLevels::sample_uniform(ens.config.k_target, rng);  // shared across heads
  ParticleSet stacked =
      sample_returns_stacked(ens, HeadSide::Target, tr.next_state, tr.next_action, levels, mode);
  ParticleSet kept = droptop(stacked, static_cast<std::size_t>(ens.config.drop_count));

  const DbcConfig& c = ens.config;
  const double scale = tr.mask * c.gamma;  // nonneg, so sorted order survives
  const double shift = tr.reward - scale * c.entropy_alpha * tr.log_pi_next;
  for (double& z : kept.atoms) z = shift + scale * z;
  return kept;
}

double quantile_loss_term(std::span<const double> preds, std::span<const double> taus,
                          std::span<const double> targets, double kappa) {
  if (preds.empty() || targets.empty() || preds.size() != taus.size())
    throw std::invalid_argument("quantile loss term shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (double y : targets) sum += quantile_loss(y - preds[i], taus[i], kappa);
  return sum / targets.size();
}

double anchor_loss_term(std::span<const double> preds, std::span<const double> taus,
                        std::span<const double> sorted_targets, double kappa) {
  if (preds.empty() || sorted_targets.empty() || preds.size() != taus.size())
    throw std::invalid_argument("anchor loss term shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    sum += huber(preds[i] - sample_quantile(sorted_targets, taus[i]), kappa);
  return sum;
}

namespace {

struct HeadLoss {
  double quantile = 0.0;
  double anchor = 0.0;
  double grad_norm = 0.0;
};

// Loss contribution and prediction-gradient for one level: quantile term
// against every target atom plus the huberized anchor term.
double pred_grad(double pred, double tau, std::span<const double> targets, double anchor,
                 const DbcConfig& c, double* quantile_out, double* anchor_out) {
  double q = 0.0, dq = 0.0;
  for (double y : targets) {
    const double u = y - pred;
    q += quantile_loss(u, tau, c.kappa);
    dq -= quantile_loss_grad(u, tau, c.kappa);
  }
  q /= targets.size();
  dq /= targets.size();
  const double a = pred - anchor;
  *quantile_out += q;
  *anchor_out += huber(a, c.kappa);
  return c.quantile_weight * dq + c.anchor_weight * huber_grad(a, c.kappa);
}

// Adds scale·(loss, gradient) for one target set into the running per-head
// totals and grad_scratch. Callers zero grad_scratch before the first call.
void accumulate_step(CriticEnsemble& ens, std::span<const double> state,
                     std::span<const double> action, const ParticleSet& targets,
                     std::uint64_t seed, double scale, ExecMode mode,
                     std::vector<HeadLoss>& losses) {
  const DbcConfig& c = ens.config;
  Rng rng(seed);
  const QuantileLevels levels = QuantileLevels::sample_uniform(c.k_online, rng);
  const double t_m = rng.uniform01();
  const double xi_m = xi(c.bridge, t_m);

  // Anchors are sample quantiles of the (sorted) target set at the online
  // levels; the bridge state at t_m interpolates start value and anchor.
  const std::size_t k = levels.taus.size();
  std::vector<double> anchors(k), z_mid(k);
  for (std::size_t i = 0; i < k; ++i) {
    anchors[i] = sample_quantile(targets.atoms, levels.taus[i]);
    z_mid[i] = xi_m * levels.taus[i] + (1.0 - xi_m) * anchors[i];
  }

  for_each_index(static_cast<std::size_t>(c.heads), mode, [&](std::size_t h) {
    CriticNet& net = ens.online[h];
    std::vector<double>& grads = ens.grad_scratch[h];
    NetTrace trace;
    HeadLoss local;

    for (std::size_t i = 0; i < k; ++i) {
      const double tau = levels.taus[i];
      // t = 0: network sees the start value itself
      double pred = critic_forward(net, state, action, tau, 0.0, tau, trace);
      double g = pred_grad(pred, tau, targets.atoms, anchors[i], c, &local.quantile, &local.anchor);
      critic_backward(net, trace, scale * g, grads);
      // t = t_m: interpolated bridge state
      pred = critic_forward(net, state, action, z_mid[i], t_m, tau, trace);
      g = pred_grad(pred, tau, targets.atoms, anchors[i], c, &local.quantile, &local.anchor);
      critic_backward(net, trace, scale * g, grads);
    }
    losses[h].quantile += scale * local.quantile;
    losses[h].anchor += scale * local.anchor;
  });
}

// Clip, optimize, and average the per-head totals into a report.
StepReport finish_step(CriticEnsemble& ens, std::vector<HeadLoss>& losses, bool do_polyak,
                       ExecMode mode) {
  const DbcConfig& c = ens.config;
  for_each_index(static_cast<std::size_t>(c.heads), mode, [&](std::size_t h) {
    losses[h].grad_norm = clip_grad_norm(ens.grad_scratch[h], c.clip_norm);
    adam_step(ens.opt[h], ens.online[h].params, ens.grad_scratch[h]);
  });

  // Report the head-averaged loss; each head optimizes its own copy.
  StepReport rep;
  for (const HeadLoss& hl : losses) {
    rep.quantile_loss += hl.quantile;
    rep.anchor_loss += hl.anchor;
    rep.grad_norm += hl.grad_norm;
  }
  rep.quantile_loss /= c.heads;
  rep.anchor_loss /= c.heads;
  rep.grad_norm /= c.heads;
  rep.total = c.quantile_weight * rep.quantile_loss + c.anchor_weight * rep.anchor_loss;
  rep.finite = std::isfinite(rep.total) && std::isfinite(rep.grad_norm);

  if (do_polyak)
    for (int h = 0; h < c.heads; ++h)
      polyak_update(ens.online[h].params, ens.target[h].params, c.tau_target);
  return rep;
}

void zero_grads(CriticEnsemble& ens) {
  for (std::vector<double>& g : ens.grad_scratch) std::fill(g.begin(), g.end(), 0.0);
}

}  // namespace

StepReport train_step_on_targets(CriticEnsemble& ens, std::span<const double> state,
                                 std::span<const double> action, const ParticleSet& targets,
                                 std::uint64_t seed, bool do_polyak, ExecMode mode) {
  if (targets.empty()) throw std::invalid_argument("train step needs target atoms");
  zero_grads(ens);
  std::vector<HeadLoss> losses(ens.config.heads);
  accumulate_step(ens, state, action, targets, seed, 1.0, mode, losses);
  return finish_step(ens, losses, do_polyak, mode);
}

StepReport train_step(CriticEnsemble& ens, const Transition& tr, std::uint64_t seed,
                      ExecMode mode) {
  Rng rng(seed);
  const std::uint64_t target_seed = rng.next_u64();
  const std::uint64_t online_seed = rng.next_u64();
  const ParticleSet targets = build_targets(ens, tr, target_seed, mode);
  return train_step_on_targets(ens, tr.state, tr.action, targets, online_seed, true, mode);
}

StepReport train_step_batch(CriticEnsemble& ens, std::span<const Transition> batch,
                            std::uint64_t seed, ExecMode mode) {
  if (batch.empty()) throw std::invalid_argument("train step needs transitions");
  zero_grads(ens);
  std::vector<HeadLoss> losses(ens.config.heads);
  Rng rng(seed);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const Transition& tr : batch) {
    const std::uint64_t target_seed = rng.next_u64();
    const std::uint64_t online_seed = rng.next_u64();
    const ParticleSet targets = build_targets(ens, tr, target_seed, mode);
    accumulate_step(ens, tr.state, tr.action, targets, online_seed, scale, mode, losses);
  }
  return finish_step(ens, losses, true, mode);
}

double q_value(const CriticEnsemble& ens, std::span<const double> state,
               std::span<const double> action, std::uint64_t seed, int levels_override,
               ExecMode mode, HeadSide side) {
  Rng rng(seed);
  const int k = levels_override > 0 ? levels_override : ens.config.k_online;
  const QuantileLevels levels = QuantileLevels::sample_uniform(k, rng);
  return sample_returns_stacked(ens, side, state, action, levels, mode).mean();
}

double sample_return_atom_grad(const CriticNet& net, std::span<const double> state,
                               std::span<const double> action, double tau,
                               std::span<const double> grid_times,
                               std::span<const double> weights, std::span<double> dparams) {
  const std::size_t steps = weights.size();
  std::vector<NetTrace> traces(steps);
  double z = tau;
  for (std::size_t m = 0; m < steps; ++m) {
    const double zhat = critic_forward(net, state, action, z, grid_times[m], tau, traces[m]);
    z += weights[m] * (zhat - tau);
  }

  // Reverse sweep: lambda is d(final z)/d(z_m). Each step contributes
  // lambda·c̃_m through the net evaluation, whose z-input gradient folds
  // back into lambda for the next-earlier step.
  double lambda = 1.0;
  for (std::size_t m = steps; m-- > 0;) {
    const double dz_in = critic_backward(net, traces[m], lambda * weights[m], dparams);
    lambda += dz_in;
  }
  return z;
}

void FlowConfig::validate() const {
  if (sample_steps < 1) throw std::invalid_argument("sample_steps must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
}

nlohmann::json flow_config_to_json(const FlowConfig& c) {
  return {{"hidden", c.hidden},
          {"embed_dim", c.embed_dim},
          {"embed_projection", c.embed_projection},
          {"adam",
           {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
            {"eps", c.adam.eps}}},
          {"clip_norm", c.clip_norm},
          {"sample_steps", c.sample_steps}};
}

FlowConfig flow_config_from_json(const nlohmann::json& j) {
  FlowConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.embed_projection = j.value("embed_projection", c.embed_projection);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.lr = a.value("lr", c.adam.lr);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
  }
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.sample_steps = j.value("sample_steps", c.sample_steps);
  c.validate();
  return c;
}

FlowBaseline FlowBaseline::make(const FlowConfig& cfg, Rng& rng) {
  cfg.validate();
  FlowBaseline fm;
  fm.config = cfg;
  CriticNetSpec spec;
  spec.state_dim = 0;
  spec.action_dim = 0;
  spec.hidden = cfg.hidden;
  spec.embed_dim = cfg.embed_dim;
  spec.embed_projection = cfg.embed_projection;
  spec.tau_input = false;
  fm.net = CriticNet::make(spec, rng);
  fm.opt = AdamState::make(cfg.adam, fm.net.param_count());
  fm.grad_scratch.assign(fm.net.param_count(), 0.0);
  return fm;
}

double fm_train_step(FlowBaseline& fm, std::span<const double> targets, std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("flow step needs target samples");
  Rng rng(seed);
  std::fill(fm.grad_scratch.begin(), fm.grad_scratch.end(), 0.0);
  NetTrace trace;
  double mse = 0.0;
  const double norm = 1.0 / static_cast<double>(targets.size());
  for (double z1 : targets) {
    const double z0 = rng.normal();
    const double t = rng.uniform01();
    const double zt = (1.0 - t) * z0 + t * z1;
    const double v = z1 - z0;
    const double pred = critic_forward(fm.net, {}, {}, zt, t, 0.0, trace);
    const double e = pred - v;
    mse += e * e * norm;
    critic_backward(fm.net, trace, 2.0 * e * norm, fm.grad_scratch);
  }
  clip_grad_norm(fm.grad_scratch, fm.config.clip_norm);
  adam_step(fm.opt, fm.net.params, fm.grad_scratch);
  return mse;
}

ParticleSet fm_sample(const FlowBaseline& fm, int n, int steps, std::uint64_t seed,
                      ExecMode mode) {
  if (n < 1 || steps < 1) throw std::invalid_argument("fm_sample needs n, steps >= 1");
  const Rng root(seed);
  ParticleSet out;
  out.atoms.resize(n);
  const double dt = 1.0 / steps;
  for_each_index(static_cast<std::size_t>(n), mode, [&](std::size_t i) {
    thread_local NetTrace trace;
    Rng rng = root.stream(i);
    double z = rng.normal();
    for (int s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      z += dt * critic_forward(fm.net, {}, {}, z, t, 0.0, trace);
    }
    out.atoms[i] = z;
  });
  return out;
}

}  // namespace dbc
