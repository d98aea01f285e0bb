#pragma once

// Second-order binary surrogate f(x) = w0 + sum_i w_i x_i + sum_{i<j} w_ij x_i x_j
// and its conjugate Gaussian posterior.
//
// Coefficient layout (shared with sk_model and the annealer):
//   index 0                  constant
//   index 1 .. N             linear terms x_1 .. x_N
//   index N+1 .. P-1         pairs (1,2),(1,3),...,(1,N),(2,3),...,(N-1,N)
// with P = 1 + N + N(N-1)/2. Indices are zero-based in code.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nbocs/configuration.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/summation.hpp"

namespace nbocs {

inline constexpr std::size_t pair_count(std::size_t n) noexcept { return n * (n - 1) / 2; }

inline constexpr std::size_t param_count(std::size_t n) noexcept { return 1 + n + pair_count(n); }

// Position of pair (i, j), i < j, within the lexicographic pair list.
inline constexpr std::size_t pair_offset(std::size_t n, std::size_t i, std::size_t j) noexcept {
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline constexpr std::size_t linear_index(std::size_t i) noexcept { return 1 + i; }

inline constexpr std::size_t quadratic_index(std::size_t n, std::size_t i, std::size_t j) noexcept {
  return i < j ? 1 + n + pair_offset(n, i, j) : 1 + n + pair_offset(n, j, i);
}

// Recovers N from P; throws if P is not of the form 1 + N + N(N-1)/2.
inline std::size_t spin_count_for(std::size_t p) {
  std::size_t n = 0;
  while (param_count(n) < p) ++n;
  if (param_count(n) != p) throw config_error("parameter length " + std::to_string(p) +
                                              " is not 1 + N + N(N-1)/2 for any N");
  return n;
}

struct SurrogateParams {
  Eigen::VectorXd w;

  SurrogateParams() = default;
  explicit SurrogateParams(std::size_t n) : w(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(n)))) {}
  explicit SurrogateParams(Eigen::VectorXd coeffs) : w(std::move(coeffs)) { spin_count_for(static_cast<std::size_t>(w.size())); }

  std::size_t n() const { return spin_count_for(static_cast<std::size_t>(w.size())); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(w.size()); }

  double& constant() { return w[0]; }
  double constant() const { return w[0]; }
  double& linear(std::size_t i) { return w[static_cast<Eigen::Index>(linear_index(i))]; }
  double linear(std::size_t i) const { return w[static_cast<Eigen::Index>(linear_index(i))]; }
  double& quadratic(std::size_t n, std::size_t i, std::size_t j) {
    return w[static_cast<Eigen::Index>(quadratic_index(n, i, j))];
  }
  double quadratic(std::size_t n, std::size_t i, std::size_t j) const {
    return w[static_cast<Eigen::Index>(quadratic_index(n, i, j))];
  }
};

// z = (1, x_1..x_N, x_1x_2, ..., x_{N-1}x_N), stored as doubles for the algebra.
struct FeatureVector {
  Eigen::VectorXd z;
};

inline FeatureVector featurize(const Configuration& x) {
  const std::size_t n = x.size();
  FeatureVector f{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(n)))};
  f.z[0] = 1.0;
  Eigen::Index k = 1;
  for (std::size_t i = 0; i < n; ++i) f.z[k++] = x[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) f.z[k++] = x[i] & x[j];
  return f;
}

// Indices of the nonzero entries of featurize(x), ascending.
inline std::vector<std::size_t> active_features(const Configuration& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> on;
  on.push_back(0);
  for (std::size_t i = 0; i < n; ++i)
    if (x[i]) on.push_back(linear_index(i));
  for (std::size_t i = 0; i < n; ++i) {
    if (!x[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[j]) on.push_back(1 + n + pair_offset(n, i, j));
  }
  std::sort(on.begin(), on.end());
  return on;
}

inline double predict(const SurrogateParams& params, const Configuration& x) {
  const std::size_t n = x.size();
  if (params.size() != param_count(n))
    throw config_error("predict: parameter length " + std::to_string(params.size()) +
                       " does not match N = " + std::to_string(n));
  CompensatedSum f;
  f.add(params.w[0]);
  for (std::size_t i = 0; i < n; ++i) {
    if (!x[i]) continue;
    f.add(params.linear(i));
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[j]) f.add(params.w[static_cast<Eigen::Index>(1 + n + pair_offset(n, i, j))]);
  }
  return f.value();
}

struct NormalizedTargets {
  Eigen::VectorXd y;
};

// Affine map of the energies onto [-1, 1]. When every energy is equal (in
// particular with a single observation) the map is undefined and all targets
// are set to 0, the centre of the interval.
inline NormalizedTargets normalize_targets(std::span<const double> energies) {
  if (energies.empty()) throw config_error("normalize_targets: empty energy vector");
  const auto [lo_it, hi_it] = std::minmax_element(energies.begin(), energies.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  NormalizedTargets out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(energies.size()))};
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    double y = 2.0 * (energies[i] - lo) / range - 1.0;
    out.y[static_cast<Eigen::Index>(i)] = std::clamp(y, -1.0, 1.0);
  }
  // Pin the endpoints exactly; rounding in the division can miss them by an ulp.
  out.y[lo_it - energies.begin()] = -1.0;
  out.y[hi_it - energies.begin()] = 1.0;
  return out;
}

struct Hyperparameters {
  double sigma_y = 0.1;
  double sigma_pr = 1.0;

  // sigma_pr^2 = J^2, sigma_y^2 = 1e-2 J^2.
  static Hyperparameters for_coupling_scale(double j_scale) { return {0.1 * j_scale, j_scale}; }
};

// Gaussian posterior N(m_pos, V_pos) with V_pos = sigma_y^2 A^{-1},
// A = Z^T Z + (sigma_y^2 / sigma_pr^2) I, held through its Cholesky factor.
struct Posterior {
  Eigen::VectorXd m_pos;
  Eigen::MatrixXd chol_lower;  // L with A = L L^T
  double sigma_y = 0.0;
  double sigma_pr = 0.0;
  std::size_t n_obs = 0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_pos.size()); }

  Eigen::MatrixXd precision_matrix() const { return chol_lower * chol_lower.transpose(); }

  Eigen::MatrixXd covariance() const {
    const auto p = chol_lower.rows();
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(p, p);
    chol_lower.triangularView<Eigen::Lower>().solveInPlace(inv);
    chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
    return sigma_y * sigma_y * inv;
  }
};

namespace detail {

inline void require_hyperparameters(double sigma_y, double sigma_pr) {
  if (!(sigma_y > 0.0) || !(sigma_pr > 0.0))
    throw config_error("posterior hyperparameters must be positive");
}

}  // namespace detail

// Fit from accumulated sufficient statistics Z^T Z and Z^T y.
inline Posterior fit_posterior_from_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& zty,
                                         std::size_t n_obs, double sigma_y, double sigma_pr) {
  detail::require_hyperparameters(sigma_y, sigma_pr);
  if (gram.rows() != gram.cols() || gram.rows() != zty.size())
    throw config_error("fit_posterior: Gram matrix and Z^T y dimensions disagree");
  if (!gram.allFinite() || !zty.allFinite())
    throw numeric_error("fit_posterior: non-finite entries in the design or targets");

  const double ridge = (sigma_y * sigma_y) / (sigma_pr * sigma_pr);
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw numeric_error("fit_posterior: Cholesky factorization failed");

  Posterior post;
  post.chol_lower = llt.matrixL();
  post.m_pos = llt.solve(zty);
  if (!post.m_pos.allFinite()) throw numeric_error("fit_posterior: non-finite posterior mean");
  post.sigma_y = sigma_y;
  post.sigma_pr = sigma_pr;
  post.n_obs = n_obs;
  return post;
}

inline Posterior fit_posterior(const Eigen::MatrixXd& features, const NormalizedTargets& targets,
                               double sigma_y, double sigma_pr) {
  if (features.rows() != targets.y.size())
    throw config_error("fit_posterior: " + std::to_string(features.rows()) + " feature rows but " +
                       std::to_string(targets.y.size()) + " targets");
  const Eigen::MatrixXd gram = features.transpose() * features;
  const Eigen::VectorXd zty = features.transpose() * targets.y;
  return fit_posterior_from_gram(gram, zty, static_cast<std::size_t>(features.rows()), sigma_y,
                                 sigma_pr);
}

// Posterior mode. The posterior is Gaussian, so its mode coincides with its
// mean and the MAP estimate is m_pos itself.
inline SurrogateParams map_params(const Posterior& post) { return SurrogateParams(post.m_pos); }

// Exact draw from N(m_pos, V_pos): m_pos + sigma_y L^{-T} xi with xi ~ N(0, I),
// since Cov(L^{-T} xi) = (L L^T)^{-1} = A^{-1}.
inline SurrogateParams thompson_sample(const Posterior& post, Rng& rng) {
  Eigen::VectorXd xi(post.m_pos.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = rng.normal();
  post.chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(xi);
  return SurrogateParams(Eigen::VectorXd(post.m_pos + post.sigma_y * xi));
}

// log p(w | D) up to its normalizing constant.
inline double log_posterior_density(const Posterior& post, const Eigen::VectorXd& w) {
  const Eigen::VectorXd d = w - post.m_pos;
  const Eigen::VectorXd lt_d = post.chol_lower.transpose() * d;
  return -0.5 * lt_d.squaredNorm() / (post.sigma_y * post.sigma_y);
}

}  // namespace nbocs
