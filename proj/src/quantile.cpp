#include "dbc/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dbc {

double ParticleSet::mean() const {
  if (atoms.empty()) throw std::invalid_argument("mean of empty particle set");
  return std::accumulate(atoms.begin(), atoms.end(), 0.0) / atoms.size();
}

ParticleSet sorted_copy(const ParticleSet& p) {
  ParticleSet out = p;
  std::stable_sort(out.atoms.begin(), out.atoms.end());
  return out;
}

QuantileLevels QuantileLevels::sample_uniform(int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("need at least one quantile level");
  QuantileLevels q;
  q.taus.resize(k);
  for (double& t : q.taus) t = rng.uniform01();
  return q;
}

QuantileLevels QuantileLevels::midpoints(int k) {
  if (k < 1) throw std::invalid_argument("need at least one quantile level");
  QuantileLevels q;
  q.taus.resize(k);
  for (int i = 0; i < k; ++i) q.taus[i] = (i + 0.5) / k;
  return q;
}

void QuantileLevels::validate() const {
  for (double t : taus)
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("quantile level outside (0,1)");
}

double huber(double u, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
  const double a = std::abs(u);
  if (kappa == 0.0) return a;
  return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

double huber_grad(double u, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
  if (kappa == 0.0) return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  return std::clamp(u, -kappa, kappa);
}

double quantile_loss(double u, double tau, double kappa) {
  const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  return w * huber(u, kappa);
}

double quantile_loss_grad(double u, double tau, double kappa) {
  const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  return w * huber_grad(u, kappa);
}

std::size_t quantile_index(std::size_t n, double tau) {
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau outside (0,1)");
  const double x = tau * static_cast<double>(n);
  const double f = std::floor(x);
  std::size_t k = static_cast<std::size_t>(f);
  if (x - f > 1e-12) ++k;
  k = std::clamp<std::size_t>(k, 1, n);
  return k - 1;
}

double sample_quantile(std::span<const double> sorted_atoms, double tau) {
  return sorted_atoms[quantile_index(sorted_atoms.size(), tau)];
}

double empirical_risk(std::span<const double> atoms, double theta, double tau) {
  if (atoms.empty()) throw std::invalid_argument("empirical risk of empty sample");
  double sum = 0.0;
  for (double y : atoms) sum += quantile_loss(y - theta, tau, 0.0);
  return sum / atoms.size();
}

ParticleSet droptop(const ParticleSet& p, std::size_t drop_count) {
  if (drop_count >= p.size()) throw std::invalid_argument("droptop would remove every atom");
  ParticleSet out = sorted_copy(p);
  out.atoms.resize(out.atoms.size() - drop_count);
  return out;
}

double interp_quantile(const std::vector<double>& sorted, double u) {
  const std::size_t n = sorted.size();
  const double pos = u * n - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= static_cast<double>(n - 1)) return sorted.back();
  const std::size_t i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double wasserstein1(const ParticleSet& a, const ParticleSet& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1 of empty set");
  const ParticleSet sa = sorted_copy(a);
  const ParticleSet sb = sorted_copy(b);
  if (sa.size() == sb.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) sum += std::abs(sa.atoms[i] - sb.atoms[i]);
    return sum / sa.size();
  }
  const std::vector<double>& big = sa.size() > sb.size() ? sa.atoms : sb.atoms;
  const std::vector<double>& small = sa.size() > sb.size() ? sb.atoms : sa.atoms;
  double sum = 0.0;
  for (std::size_t j = 0; j < big.size(); ++j) {
    const double u = (j + 0.5) / big.size();
    sum += std::abs(big[j] - interp_quantile(small, u));
  }
  return sum / big.size();
}

DiscreteDist DiscreteDist::of(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.empty() || atoms.size() != weights.size())
    throw std::invalid_argument("discrete law needs matching nonempty atoms/weights");
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
  DiscreteDist d;
  d.atoms.reserve(atoms.size());
  d.weights.reserve(atoms.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
    total += w;
  }
  for (std::size_t i : order) {
    // merge duplicate support points
    if (!d.atoms.empty() && atoms[i] == d.atoms.back()) {
      d.weights.back() += weights[i] / total;
    } else {
      d.atoms.push_back(atoms[i]);
      d.weights.push_back(weights[i] / total);
    }
  }
  return d;
}

DiscreteDist DiscreteDist::from_particles(const ParticleSet& p) {
  return of(p.atoms, std::vector<double>(p.size(), 1.0));
}

double DiscreteDist::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) m += atoms[i] * weights[i];
  return m;
}

double DiscreteDist::mean_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) m += std::abs(atoms[i]) * weights[i];
  return m;
}

double DiscreteDist::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau outside (0,1)");
  double cum = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    cum += weights[i];
    if (cum >= tau - 1e-15) return atoms[i];
  }
  return atoms.back();
}

double wasserstein1(const DiscreteDist& a, const DiscreteDist& b) {
  // Walk the merged CDF breakpoints; on each probability slab both inverse
  // CDFs are constant, so W1 accumulates slab-width · atom distance.
  std::size_t i = 0, j = 0;
  double ca = a.weights[0], cb = b.weights[0];
  double prev = 0.0, w1 = 0.0;
  while (i < a.atoms.size() && j < b.atoms.size()) {
    const double cur = std::min(ca, cb);
    w1 += (cur - prev) * std::abs(a.atoms[i] - b.atoms[j]);
    prev = cur;
    if (ca == cur) {
      ++i;
      if (i < a.atoms.size()) ca += a.weights[i];
    }
    if (cb == cur) {
      ++j;
      if (j < b.atoms.size()) cb += b.weights[j];
    }
  }
  return w1;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty span");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

double variance_of(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance needs n >= 2");
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / (xs.size() - 1);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

}  // namespace dbc
