#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dbc/rng.hpp"

namespace dbc {

// Equal-weight support atoms of a scalar distribution (order unspecified).
struct ParticleSet {
  std::vector<double> atoms;

  std::size_t size() const { return atoms.size(); }
  bool empty() const { return atoms.empty(); }
  double mean() const;  // throws std::invalid_argument on empty
};

ParticleSet sorted_copy(const ParticleSet& p);

// Quantile levels τ ∈ (0,1).
struct QuantileLevels {
  std::vector<double> taus;

  static QuantileLevels sample_uniform(int k, Rng& rng);
  static QuantileLevels midpoints(int k);  // (i − ½)/k, deterministic eval grid
  void validate() const;
};

// Huber ramp: ½u² inside |u| ≤ κ, linear outside; κ = 0 degrades to |u|.
double huber(double u, double kappa);
double huber_grad(double u, double kappa);

// Quantile regression loss ρ^κ_τ(u) = |τ − 1(u<0)| · huber(u, κ) and its
// derivative in u. With κ = 0 this is the pinball loss u·(τ − 1(u<0)).
double quantile_loss(double u, double tau, double kappa);
double quantile_loss_grad(double u, double tau, double kappa);

// Index of the ⌈nτ⌉-th order statistic, zero-based. The ceiling is taken
// with a 1e−12 guard on the fractional part so τ = k/n never rounds up to
// k+1 through floating error.
std::size_t quantile_index(std::size_t n, double tau);

// y_(⌈nτ⌉) of an ascending sample.
double sample_quantile(std::span<const double> sorted_atoms, double tau);

// (1/n) Σ ρ_τ(y_i − theta) with the plain pinball loss (κ = 0).
double empirical_risk(std::span<const double> atoms, double theta, double tau);

// Remove the drop_count largest atoms; result is sorted ascending.
// Throws std::invalid_argument if drop_count >= size.
ParticleSet droptop(const ParticleSet& p, std::size_t drop_count);

// Inverse CDF of an ascending equal-weight sample as a piecewise-linear
// function through the knots ((i+½)/n, x_i), clamped at the ends.
double interp_quantile(const std::vector<double>& sorted, double u);

// W1 between equal-weight particle sets: mean |x_(i) − y_(i)| when sizes
// match; otherwise the smaller set's inverse CDF is linearly interpolated at
// the larger set's midpoint levels.
double wasserstein1(const ParticleSet& a, const ParticleSet& b);

// Finitely supported law with explicit weights, for exact references
// (enumerated return distributions, frozen oracle samples).
struct DiscreteDist {
  std::vector<double> atoms;    // ascending
  std::vector<double> weights;  // positive, normalized to sum 1

  static DiscreteDist of(std::vector<double> atoms, std::vector<double> weights);
  static DiscreteDist from_particles(const ParticleSet& p);

  double mean() const;
  double mean_abs() const;
  double quantile(double tau) const;  // generalized inverse CDF
  double iqr() const { return quantile(0.75) - quantile(0.25); }
};

// Exact W1 between two discrete laws (integral of |F_a^{-1} − F_b^{-1}| over
// the merged CDF breakpoints).
double wasserstein1(const DiscreteDist& a, const DiscreteDist& b);

// Small shared statistics helpers.
double mean_of(std::span<const double> xs);
double variance_of(std::span<const double> xs);  // unbiased, n ≥ 2
double normal_cdf(double x);

}  // namespace dbc
