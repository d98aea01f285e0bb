#pragma once

// Sherrington-Kirkpatrick instances:
//   H(x) = (1/sqrt N) sum_{i<j} J_ij (2x_i - 1)(2x_j - 1),   J_ij ~ N(0, J^2).

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nbocs/configuration.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/summation.hpp"
#include "nbocs/surrogate.hpp"

namespace nbocs {

inline constexpr std::size_t kDefaultEnumerationCap = 24;

struct SkInstance {
  std::size_t n = 0;
  double j_scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> couplings;  // lexicographic pairs, length n(n-1)/2

  double coupling(std::size_t i, std::size_t j) const {
    return i < j ? couplings[pair_offset(n, i, j)] : couplings[pair_offset(n, j, i)];
  }
};

enum class ExtremaMethod { exhaustive, external };

inline std::string to_string(ExtremaMethod m) { return m == ExtremaMethod::exhaustive ? "exhaustive" : "external"; }

struct Extrema {
  double h_min = 0.0;
  double h_max = 0.0;
  Configuration x_min;  // empty when supplied externally without a witness
  ExtremaMethod method = ExtremaMethod::exhaustive;

  bool verified() const noexcept { return method == ExtremaMethod::exhaustive; }
};

inline void validate_instance(const SkInstance& inst) {
  if (inst.n < 2) throw config_error("SK instance needs n >= 2, got " + std::to_string(inst.n));
  if (!(inst.j_scale > 0.0) || !std::isfinite(inst.j_scale)) throw config_error("SK instance needs j_scale > 0");
  if (inst.couplings.size() != pair_count(inst.n))
    throw config_error("SK instance has " + std::to_string(inst.couplings.size()) +
                       " couplings, expected " + std::to_string(pair_count(inst.n)));
}

// Couplings are j_scale times successive Rng::normal() draws from Rng(seed),
// in lexicographic pair order.
inline SkInstance generate_instance(std::size_t n, double j_scale, std::uint64_t seed) {
  if (n < 2) throw config_error("generate_instance: n must be >= 2");
  if (!(j_scale > 0.0) || !std::isfinite(j_scale)) throw config_error("generate_instance: j_scale must be > 0");
  SkInstance inst{n, j_scale, seed, std::vector<double>(pair_count(n))};
  Rng rng(seed);
  for (auto& c : inst.couplings) c = j_scale * rng.normal();
  return inst;
}

inline double energy(const SkInstance& inst, const Configuration& x) {
  if (x.size() != inst.n)
    throw config_error("energy: configuration length " + std::to_string(x.size()) +
                       " does not match N = " + std::to_string(inst.n));
  CompensatedSum h;
  std::size_t k = 0;
  for (std::size_t i = 0; i < inst.n; ++i) {
    const int si = 2 * x[i] - 1;
    for (std::size_t j = i + 1; j < inst.n; ++j, ++k) h.add(inst.couplings[k] * (si * (2 * x[j] - 1)));
  }
  return h.value() / std::sqrt(static_cast<double>(inst.n));
}

// Coefficients w_J with predict(w_J, x) == energy(inst, x) for every x:
//   w_0 = sum J_ij / sqrt N,  w_i = -2 sum_{j != i} J_ij / sqrt N,  w_ij = 4 J_ij / sqrt N.
inline SurrogateParams true_params(const SkInstance& inst) {
  const std::size_t n = inst.n;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  SurrogateParams p(n);
  CompensatedSum total;
  std::vector<CompensatedSum> row(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      const double jij = inst.couplings[k];
      total.add(jij);
      row[i].add(jij);
      row[j].add(jij);
      p.w[static_cast<Eigen::Index>(1 + n + k)] = 4.0 * jij / sqrt_n;
    }
  }
  p.constant() = total.value() / sqrt_n;
  for (std::size_t i = 0; i < n; ++i) p.linear(i) = -2.0 * row[i].value() / sqrt_n;
  return p;
}

// Exhaustive minimum and maximum. Gray-code walk over the half of the space
// with the last spin fixed (the other half follows from global flip symmetry),
// O(N) incremental update per step. The winners are re-evaluated with energy()
// so accumulated rounding in the walk never reaches the reported values.
inline Extrema exact_extrema(const SkInstance& inst, std::size_t cap = kDefaultEnumerationCap) {
  validate_instance(inst);
  const std::size_t n = inst.n;
  if (n > cap || n > 62)
    throw oracle_unavailable("exact extrema unavailable: N = " + std::to_string(n) +
                             " exceeds the enumeration cap of " + std::to_string(cap) +
                             "; supply external extrema in the instance file");

  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> jmat(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      jmat[i * n + j] = jmat[j * n + i] = inst.coupling(i, j) * inv_sqrt_n;

  // Start at all spins down (x = 0).
  std::vector<int> s(n, -1);
  std::vector<double> field(n, 0.0);  // field_i = sum_j Jmat_ij s_j
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) field[i] += jmat[i * n + j] * s[j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) h += jmat[i * n + j] * s[i] * s[j];

  std::uint64_t code = 0;  // bit i set <=> s_i = +1
  std::uint64_t best_code = 0, worst_code = 0;
  double best = h, worst = h;
  const std::uint64_t steps = std::uint64_t{1} << (n - 1);
  for (std::uint64_t g = 1; g < steps; ++g) {
    const auto k = static_cast<std::size_t>(std::countr_zero(g));
    h -= 2.0 * s[k] * field[k];
    const int old = s[k];
    s[k] = -old;
    const double* col = &jmat[k * n];
    for (std::size_t j = 0; j < n; ++j) field[j] -= 2.0 * col[j] * old;
    code ^= std::uint64_t{1} << k;
    if (h < best) {
      best = h;
      best_code = code;
    }
    if (h > worst) {
      worst = h;
      worst_code = code;
    }
  }

  Extrema ext;
  ext.method = ExtremaMethod::exhaustive;
  ext.x_min = Configuration::from_index(best_code, n);
  ext.h_min = energy(inst, ext.x_min);
  ext.h_max = energy(inst, Configuration::from_index(worst_code, n));
  return ext;
}

}  // namespace nbocs
