#include "dbc/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dbc {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

void cosine_embedding(double x, int dim, std::span<double> out) {
  for (int k = 0; k < dim; ++k) out[k] = std::cos((k + 1) * kPi * x);
}

void CriticNetSpec::validate() const {
  if (state_dim < 0 || action_dim < 0) throw std::invalid_argument("negative input dim");
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
}

int CriticNetSpec::trunk_input_dim() const {
  return state_dim + action_dim + 1 + embed_dim + (tau_input ? embed_dim : 0);
}

nlohmann::json net_spec_to_json(const CriticNetSpec& s) {
  return {{"state_dim", s.state_dim},   {"action_dim", s.action_dim},
          {"hidden", s.hidden},         {"embed_dim", s.embed_dim},
          {"embed_projection", s.embed_projection}, {"tau_input", s.tau_input}};
}

CriticNetSpec net_spec_from_json(const nlohmann::json& j) {
  CriticNetSpec s;
  s.state_dim = j.value("state_dim", s.state_dim);
  s.action_dim = j.value("action_dim", s.action_dim);
  s.hidden = j.value("hidden", s.hidden);
  s.embed_dim = j.value("embed_dim", s.embed_dim);
  s.embed_projection = j.value("embed_projection", s.embed_projection);
  s.tau_input = j.value("tau_input", s.tau_input);
  s.validate();
  return s;
}

namespace {

LayerRef add_layer(std::size_t& cursor, int in, int out, bool relu) {
  LayerRef l;
  l.in = in;
  l.out = out;
  l.relu = relu;
  l.w_off = cursor;
  cursor += static_cast<std::size_t>(in) * out;
  l.b_off = cursor;
  cursor += out;
  return l;
}

void init_layer(const LayerRef& l, std::vector<double>& params, Rng& rng, double scale) {
  const double bound = scale / std::sqrt(static_cast<double>(l.in));
  const std::size_t n = static_cast<std::size_t>(l.in) * l.out + l.out;
  for (std::size_t i = 0; i < n; ++i) params[l.w_off + i] = rng.uniform(-bound, bound);
}

void linear_forward(const LayerRef& l, std::span<const double> params,
                    std::span<const double> x, std::span<double> y) {
  for (int o = 0; o < l.out; ++o) {
    const double* w = params.data() + l.w_off + static_cast<std::size_t>(o) * l.in;
    double acc = params[l.b_off + o];
    for (int i = 0; i < l.in; ++i) acc += w[i] * x[i];
    if (l.relu && acc < 0.0) acc = 0.0;
    y[o] = acc;
  }
}

// dy is the gradient at the layer output (post-ReLU); y holds the stored
// forward output so the ReLU mask can be recovered from y > 0.
void linear_backward(const LayerRef& l, std::span<const double> params,
                     std::span<const double> x, std::span<const double> y,
                     std::span<const double> dy, std::span<double> dparams,
                     std::span<double> dx) {
  if (!dx.empty())
    for (int i = 0; i < l.in; ++i) dx[i] = 0.0;
  for (int o = 0; o < l.out; ++o) {
    double g = dy[o];
    if (l.relu && y[o] <= 0.0) g = 0.0;
    if (g == 0.0) continue;
    const std::size_t row = l.w_off + static_cast<std::size_t>(o) * l.in;
    dparams[l.b_off + o] += g;
    const double* w = params.data() + row;
    double* dw = dparams.data() + row;
    for (int i = 0; i < l.in; ++i) {
      dw[i] += g * x[i];
      if (!dx.empty()) dx[i] += g * w[i];
    }
  }
}

}  // namespace

CriticNet CriticNet::make(const CriticNetSpec& spec, Rng& rng) {
  spec.validate();
  CriticNet net;
  net.spec = spec;

  std::size_t cursor = 0;
  if (spec.embed_projection) {
    net.t_proj = add_layer(cursor, spec.embed_dim, spec.embed_dim, true);
    if (spec.tau_input) net.tau_proj = add_layer(cursor, spec.embed_dim, spec.embed_dim, true);
  }
  int in = spec.trunk_input_dim();
  for (int h : spec.hidden) {
    net.trunk.push_back(add_layer(cursor, in, h, true));
    in = h;
  }
  net.trunk.push_back(add_layer(cursor, in, 1, false));

  net.params.resize(cursor);
  if (spec.embed_projection) {
    init_layer(net.t_proj, net.params, rng, 1.0);
    if (spec.tau_input) init_layer(net.tau_proj, net.params, rng, 1.0);
  }
  for (std::size_t i = 0; i < net.trunk.size(); ++i)
    init_layer(net.trunk[i], net.params, rng, i + 1 == net.trunk.size() ? 0.1 : 1.0);
  return net;
}

double critic_forward(const CriticNet& net, std::span<const double> state,
                      std::span<const double> action, double z, double t, double tau,
                      NetTrace& trace) {
  const CriticNetSpec& sp = net.spec;
  if (static_cast<int>(state.size()) != sp.state_dim ||
      static_cast<int>(action.size()) != sp.action_dim)
    throw std::invalid_argument("state/action size mismatch");

  trace.emb_t.resize(sp.embed_dim);
  cosine_embedding(t, sp.embed_dim, trace.emb_t);
  if (sp.tau_input) {
    trace.emb_tau.resize(sp.embed_dim);
    cosine_embedding(tau, sp.embed_dim, trace.emb_tau);
  }
  if (sp.embed_projection) {
    trace.proj_t.resize(sp.embed_dim);
    linear_forward(net.t_proj, net.params, trace.emb_t, trace.proj_t);
    if (sp.tau_input) {
      trace.proj_tau.resize(sp.embed_dim);
      linear_forward(net.tau_proj, net.params, trace.emb_tau, trace.proj_tau);
    }
  }
  const std::vector<double>& feat_t = sp.embed_projection ? trace.proj_t : trace.emb_t;
  const std::vector<double>& feat_tau = sp.embed_projection ? trace.proj_tau : trace.emb_tau;

  trace.acts.resize(net.trunk.size() + 1);
  std::vector<double>& input = trace.acts[0];
  input.resize(sp.trunk_input_dim());
  std::size_t pos = 0;
  for (double v : state) input[pos++] = v;
  for (double v : action) input[pos++] = v;
  input[pos++] = z;
  for (int k = 0; k < sp.embed_dim; ++k) input[pos++] = feat_t[k];
  if (sp.tau_input)
    for (int k = 0; k < sp.embed_dim; ++k) input[pos++] = feat_tau[k];

  for (std::size_t l = 0; l < net.trunk.size(); ++l) {
    trace.acts[l + 1].resize(net.trunk[l].out);
    linear_forward(net.trunk[l], net.params, trace.acts[l], trace.acts[l + 1]);
  }
  return trace.acts.back()[0];
}

double critic_backward(const CriticNet& net, const NetTrace& trace, double upstream,
                       std::span<double> dparams) {
  const CriticNetSpec& sp = net.spec;
  thread_local std::vector<std::vector<double>> dacts;
  dacts.resize(net.trunk.size() + 1);

  dacts.back().assign(1, upstream);
  for (std::size_t l = net.trunk.size(); l-- > 0;) {
    dacts[l].resize(net.trunk[l].in);
    linear_backward(net.trunk[l], net.params, trace.acts[l], trace.acts[l + 1],
                    dacts[l + 1], dparams, dacts[l]);
  }

  const std::vector<double>& dinput = dacts[0];
  const std::size_t z_pos = static_cast<std::size_t>(sp.state_dim) + sp.action_dim;
  if (sp.embed_projection) {
    const std::size_t t_pos = z_pos + 1;
    linear_backward(net.t_proj, net.params, trace.emb_t, trace.proj_t,
                    std::span<const double>(dinput.data() + t_pos, sp.embed_dim), dparams, {});
    if (sp.tau_input) {
      linear_backward(net.tau_proj, net.params, trace.emb_tau, trace.proj_tau,
                      std::span<const double>(dinput.data() + t_pos + sp.embed_dim, sp.embed_dim),
                      dparams, {});
    }
  }
  return dinput[z_pos];
}

AdamState AdamState::make(const AdamConfig& cfg, std::size_t n) {
  AdamState st;
  st.cfg = cfg;
  st.m.assign(n, 0.0);
  st.v.assign(n, 0.0);
  return st;
}

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads) {
  if (params.size() != st.m.size() || grads.size() != st.m.size())
    throw std::invalid_argument("adam buffer size mismatch");
  st.step += 1;
  const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grads[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

void polyak_update(std::span<const double> online, std::span<double> target, double rate) {
  if (online.size() != target.size()) throw std::invalid_argument("polyak size mismatch");
  for (std::size_t i = 0; i < online.size(); ++i)
    target[i] += rate * (online[i] - target[i]);
}

void save_net(const CriticNet& net, const std::string& prefix) {
  nlohmann::json manifest = {{"net", net_spec_to_json(net.spec)},
                             {"param_count", net.params.size()},
                             {"format", "f64-le"}};
  std::ofstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot write " + prefix + ".json");
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot write " + prefix + ".bin");
  bf.write(reinterpret_cast<const char*>(net.params.data()),
           static_cast<std::streamsize>(net.params.size() * sizeof(double)));
}

CriticNet load_net(const std::string& prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot read " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  const CriticNetSpec spec = net_spec_from_json(manifest.at("net"));

  Rng scratch(0);
  CriticNet net = CriticNet::make(spec, scratch);
  const std::size_t expect = manifest.at("param_count").get<std::size_t>();
  if (expect != net.params.size())
    throw std::runtime_error("checkpoint parameter count mismatch");

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot read " + prefix + ".bin");
  bf.read(reinterpret_cast<char*>(net.params.data()),
          static_cast<std::streamsize>(net.params.size() * sizeof(double)));
  if (static_cast<std::size_t>(bf.gcount()) != net.params.size() * sizeof(double))
    throw std::runtime_error("checkpoint truncated: " + prefix + ".bin");
  return net;
}

}  // namespace dbc
