#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbc/rng.hpp"

namespace dbc {

// Cosine features [cos(πx), cos(2πx), …, cos(dim·πx)] for time / quantile
// level inputs.
void cosine_embedding(double x, int dim, std::span<double> out);

// One dense layer viewed into a shared flat parameter buffer (row-major
// weights, then biases). Keeping every block of a network in one buffer is
// what makes Adam, clipping, Polyak averaging and checkpoints trivial.
struct LayerRef {
  int in = 0;
  int out = 0;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
  bool relu = false;
};

// Scalar-output network over [state, action, z, embed(t), embed(τ)]:
// the critic head h_θ(z_t, t, τ, s, a). With tau_input=false and empty
// state/action it doubles as the velocity net of the flow-matching baseline.
struct CriticNetSpec {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<int> hidden = {64, 64};
  int embed_dim = 32;
  bool embed_projection = true;  // learned linear+ReLU on each embedding
  bool tau_input = true;

  void validate() const;
  int trunk_input_dim() const;
};

nlohmann::json net_spec_to_json(const CriticNetSpec& s);
CriticNetSpec net_spec_from_json(const nlohmann::json& j);

struct CriticNet {
  CriticNetSpec spec;
  std::vector<double> params;
  LayerRef t_proj, tau_proj;      // used only when spec.embed_projection
  std::vector<LayerRef> trunk;

  // Fan-in-scaled uniform init U(±1/√fan_in); final layer scaled by 0.1 so
  // initial outputs sit near zero.
  static CriticNet make(const CriticNetSpec& spec, Rng& rng);
  std::size_t param_count() const { return params.size(); }
};

// Forward workspace; reuse across calls to avoid reallocation.
struct NetTrace {
  std::vector<double> emb_t, emb_tau;
  std::vector<double> proj_t, proj_tau;
  std::vector<std::vector<double>> acts;  // acts[0] = trunk input
};

double critic_forward(const CriticNet& net, std::span<const double> state,
                      std::span<const double> action, double z, double t, double tau,
                      NetTrace& trace);

// Reverse pass for the trace produced by critic_forward. Accumulates into
// dparams (same length as net.params) and returns ∂out/∂z · upstream.
double critic_backward(const CriticNet& net, const NetTrace& trace, double upstream,
                       std::span<double> dparams);

// Optimizer and target-network plumbing, all on flat buffers.
struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<double> m, v;
  std::int64_t step = 0;

  static AdamState make(const AdamConfig& cfg, std::size_t n);
};

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads);

// Scales grads in place so the global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_grad_norm(std::span<double> grads, double max_norm);

// target ← rate·online + (1−rate)·target
void polyak_update(std::span<const double> online, std::span<double> target, double rate);

// Checkpoints: <prefix>.json manifest (spec + parameter count + format) and
// <prefix>.bin raw little-endian doubles.
void save_net(const CriticNet& net, const std::string& prefix);
CriticNet load_net(const std::string& prefix);

}  // namespace dbc
