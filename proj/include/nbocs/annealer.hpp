#pragma once

// Single-flip Metropolis simulated annealing on a quadratic pseudo-Boolean
// function given by SurrogateParams.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nbocs/configuration.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/surrogate.hpp"

namespace nbocs {

// beta(r) = beta_init * (beta_final / beta_init)^(r / r_total), r = 0..r_total.
struct AnnealSchedule {
  double beta_init = 1e-3;
  double beta_final = 1e4;
  std::size_t r_total = 10000;

  // beta_init = 1e-3 / J, r_total = 1e4, beta_final given in units of 1/J.
  static AnnealSchedule standard(double beta_final_times_j, double j_scale = 1.0,
                                 std::size_t r_total = 10000) {
    return {1e-3 / j_scale, beta_final_times_j / j_scale, r_total};
  }

  void validate() const {
    if (r_total == 0) throw config_error("anneal schedule: r_total must be >= 1");
    if (!(beta_init >= 0.0) || !(beta_final >= beta_init) || !std::isfinite(beta_final))
      throw config_error("anneal schedule: need 0 <= beta_init <= beta_final < inf");
    if (beta_init == 0.0 && beta_final > 0.0)
      throw config_error("anneal schedule: geometric schedule needs beta_init > 0 unless constant");
  }

  double beta_at(double r) const {
    if (beta_init == beta_final) return beta_init;
    if (r >= static_cast<double>(r_total)) return beta_final;
    return beta_init * std::pow(beta_final / beta_init, r / static_cast<double>(r_total));
  }

  // Inverse temperature of sweep k (0-based). The r_total sweeps sample the
  // schedule at evenly spaced r from 0 to r_total, so the first sweep runs at
  // beta_init and the last at beta_final.
  double sweep_beta(std::size_t k) const {
    if (r_total == 1) return beta_final;
    return beta_at(static_cast<double>(k) * static_cast<double>(r_total) /
                   static_cast<double>(r_total - 1));
  }
};

enum class SaReturn { best, final };
enum class SweepOrder { sequential, random_permutation };

inline SaReturn parse_sa_return(const std::string& s) {
  if (s == "best") return SaReturn::best;
  if (s == "final") return SaReturn::final;
  throw config_error("sa-return must be 'best' or 'final', got '" + s + "'");
}

inline std::string to_string(SaReturn r) { return r == SaReturn::best ? "best" : "final"; }

struct SweepInfo {
  std::size_t sweep;
  double beta;
  double f_current;
  double f_best;
  std::span<const int> state;
};

struct AnnealOptions {
  SweepOrder order = SweepOrder::sequential;
  // Called after every sweep.
  std::function<void(const SweepInfo&)> on_sweep;
};

struct AnnealResult {
  Configuration x_best;
  double f_best = 0.0;
  Configuration x_final;
  double f_final = 0.0;
  std::size_t n_sweeps = 0;

  const Configuration& proposal(SaReturn mode) const { return mode == SaReturn::best ? x_best : x_final; }
};

// predict(w, flip(x, i)) - predict(w, x) = (1 - 2 x_i)(w_i + sum_{j != i} w_ij x_j).
inline double delta_flip(const SurrogateParams& w, const Configuration& x, std::size_t i) {
  const std::size_t n = x.size();
  if (w.size() != param_count(n)) throw config_error("delta_flip: parameter length does not match N");
  if (i >= n) throw config_error("delta_flip: index " + std::to_string(i) + " out of range");
  double field = w.linear(i);
  for (std::size_t j = 0; j < n; ++j)
    if (j != i && x[j]) field += w.quadratic(n, i, j);
  return (1 - 2 * x[i]) * field;
}

namespace detail {

// Beyond this beta * delta the acceptance probability is below 5e-22 and the
// proposal is rejected without consuming a uniform draw.
inline constexpr double kRejectExponent = 50.0;

}  // namespace detail

inline AnnealResult anneal(const SurrogateParams& w, std::size_t n, const AnnealSchedule& sched, Rng& rng,
                           const AnnealOptions& opts = {}) {
  if (n == 0) throw config_error("anneal: n must be >= 1");
  if (w.size() != param_count(n))
    throw config_error("anneal: parameter length " + std::to_string(w.size()) + " does not match N = " +
                       std::to_string(n));
  sched.validate();

  // Dense symmetric coupling matrix with zero diagonal, plus cached local
  // fields field_i = w_i + sum_j q_ij x_j.
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) q[i * n + j] = q[j * n + i] = w.quadratic(n, i, j);

  Configuration x = Configuration::random(n, rng);
  std::vector<int> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = x[i];
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) {
    double h = w.linear(i);
    for (std::size_t j = 0; j < n; ++j) h += q[i * n + j] * bits[j];
    field[i] = h;
  }

  double f = predict(w, x);
  double f_best = f;
  std::vector<int> best_bits = bits;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t sweep = 0; sweep < sched.r_total; ++sweep) {
    const double beta = sched.sweep_beta(sweep);
    if (opts.order == SweepOrder::random_permutation) {
      for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    }
    for (std::size_t idx = 0; idx < n; ++idx) {
      const std::size_t i = order[idx];
      const double delta = (1 - 2 * bits[i]) * field[i];
      bool accept = delta <= 0.0;
      if (!accept) {
        const double exponent = beta * delta;
        accept = exponent < detail::kRejectExponent && rng.uniform01() < std::exp(-exponent);
      }
      if (!accept) continue;
      const double step = bits[i] ? -1.0 : 1.0;
      bits[i] ^= 1;
      f += delta;
      const double* row = &q[i * n];
      for (std::size_t j = 0; j < n; ++j) field[j] += row[j] * step;
      if (f < f_best) {
        f_best = f;
        best_bits = bits;
      }
    }
    if (opts.on_sweep) opts.on_sweep(SweepInfo{sweep, beta, f, f_best, bits});
  }

  AnnealResult res;
  res.x_final = Configuration(n);
  res.x_best = Configuration(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.x_final.set(i, bits[i]);
    res.x_best.set(i, best_bits[i]);
  }
  res.f_final = predict(w, res.x_final);
  res.f_best = predict(w, res.x_best);
  // The running sum can pick a best state that ties the final one up to
  // rounding; keep the documented ordering f_best <= f_final.
  if (res.f_final < res.f_best) {
    res.x_best = res.x_final;
    res.f_best = res.f_final;
  }
  res.n_sweeps = sched.r_total;
  return res;
}

}  // namespace nbocs
