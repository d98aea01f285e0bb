#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nbocs/configuration.hpp"
#include "nbocs/sk_model.hpp"
#include "nbocs/surrogate.hpp"
#include "nbocs/trace.hpp"

namespace nbocs {

// u = (h_best - h_min) / (h_max - h_min).
inline double normalized_energy(double h_best, double h_min, double h_max) {
  if (!(h_max > h_min)) throw config_error("normalized_energy: degenerate extrema (h_max <= h_min)");
  return (h_best - h_min) / (h_max - h_min);
}

inline double normalized_energy(double h_best, const Extrema& ext) {
  return normalized_energy(h_best, ext.h_min, ext.h_max);
}

struct OverlapResult {
  double value = 0.0;
  bool zero_vector = false;  // one argument had zero norm; value is 0 by convention
};

// Cosine similarity over the coefficients, optionally skipping the constant w_0.
inline OverlapResult overlap_checked(const SurrogateParams& w, const SurrogateParams& w_true,
                                     bool include_constant = true) {
  if (w.size() != w_true.size()) throw config_error("overlap: parameter lengths differ");
  const Eigen::Index start = include_constant ? 0 : 1;
  const Eigen::Index len = w.w.size() - start;
  const auto a = w.w.segment(start, len);
  const auto b = w_true.w.segment(start, len);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  const double c = a.dot(b) / (na * nb);
  return {std::clamp(c, -1.0, 1.0), false};
}

inline double overlap(const SurrogateParams& w, const SurrogateParams& w_true, bool include_constant = true) {
  return overlap_checked(w, w_true, include_constant).value;
}

struct AggregateCurve {
  std::vector<std::size_t> t;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t n_instances = 0;
};

// Pointwise mean and standard error (sample sd / sqrt(count)) across series.
// Shorter series are extended with their last value up to the longest length.
inline AggregateCurve aggregate(std::span<const std::vector<double>> series) {
  if (series.empty()) throw config_error("aggregate: no traces");
  std::size_t len = 0;
  for (const auto& s : series) {
    if (s.empty()) throw config_error("aggregate: empty trace");
    len = std::max(len, s.size());
  }
  AggregateCurve out;
  out.n_instances = series.size();
  out.t.resize(len);
  out.mean.assign(len, 0.0);
  out.stderr_.assign(len, 0.0);
  const auto count = static_cast<double>(series.size());
  for (std::size_t t = 0; t < len; ++t) {
    out.t[t] = t;
    double sum = 0.0;
    for (const auto& s : series) sum += t < s.size() ? s[t] : s.back();
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& s : series) {
      const double d = (t < s.size() ? s[t] : s.back()) - mean;
      ss += d * d;
    }
    out.mean[t] = mean;
    out.stderr_[t] = series.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
  }
  return out;
}

enum class TraceField { u, r };

inline AggregateCurve aggregate(std::span<const RunTrace> traces, TraceField field) {
  std::vector<std::vector<double>> series;
  series.reserve(traces.size());
  for (const auto& tr : traces) series.push_back(field == TraceField::u ? tr.u_series() : tr.r_series());
  return aggregate(std::span<const std::vector<double>>(series));
}

struct ScalingFit {
  double z = 0.0;
  double z_stderr = 0.0;
  double prefactor = 0.0;  // [tau] ~= prefactor * N^z
  std::vector<std::size_t> n_values;
  std::vector<double> mean_tau;
  std::vector<double> median_tau;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Ordinary least squares of log [tau] on log N, [tau] the arithmetic mean per N.
// The exponent's standard error comes from the residual variance (zero for an
// exact power law).
inline ScalingFit fit_scaling(const std::map<std::size_t, std::vector<double>>& taus,
                              std::size_t min_samples = 10) {
  if (taus.size() < 3) throw config_error("fit_scaling: need at least 3 values of N");
  ScalingFit fit;
  std::vector<double> lx, ly;
  for (const auto& [n, samples] : taus) {
    if (samples.size() < min_samples)
      throw config_error("fit_scaling: N = " + std::to_string(n) + " has " + std::to_string(samples.size()) +
                         " tau samples, need " + std::to_string(min_samples));
    double sum = 0.0;
    for (double s : samples) sum += s;
    const double mean = sum / static_cast<double>(samples.size());
    if (!(mean > 0.0)) throw config_error("fit_scaling: mean tau must be positive for N = " + std::to_string(n));
    fit.n_values.push_back(n);
    fit.mean_tau.push_back(mean);
    fit.median_tau.push_back(median_of(samples));
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(mean));
  }
  const auto k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw config_error("fit_scaling: N values must be distinct");
  fit.z = sxy / sxx;
  const double intercept = my - fit.z * mx;
  fit.prefactor = std::exp(intercept);
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (intercept + fit.z * lx[i]);
    rss += r * r;
  }
  fit.z_stderr = std::sqrt(rss / (k - 2.0) / sxx);
  return fit;
}

}  // namespace nbocs
