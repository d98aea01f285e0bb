// Acceptance checks. Each criterion prints one line starting with PASS or FAIL.
// Usage: nbocs_acceptance [--criterion K] [--work-dir DIR]

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nbocs/nbocs.hpp"

using namespace nbocs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

fs::path g_work = "acceptance_work";

constexpr std::size_t kInstances = 30;
constexpr double kBetaFinal = 1e4;

// Gaussian elimination with partial pivoting on a dense copy.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Feature row built from the definition, without the library's featurize.
std::vector<double> feature_row(const Configuration& x) {
  const std::size_t n = x.size();
  std::vector<double> z{1.0};
  for (std::size_t i = 0; i < n; ++i) z.push_back(x[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) z.push_back(x[i] * x[j]);
  return z;
}

Outcome criterion1() {
  Rng rng(derive_seed(1, "acceptance-1"));
  const double sigma_y = 0.1, sigma_pr = 1.0, ridge = sigma_y * sigma_y / (sigma_pr * sigma_pr);
  double worst = 0.0;
  for (int problem = 0; problem < 50; ++problem) {
    const std::size_t n = 2 + rng.below(7);
    const std::size_t m = 1 + rng.below(40);
    const auto inst = generate_instance(n, 1.0, rng.next());
    std::vector<std::vector<double>> rows;
    std::vector<double> e;
    Eigen::MatrixXd z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(param_count(n)));
    for (std::size_t r = 0; r < m; ++r) {
      const auto x = Configuration::random(n, rng);
      rows.push_back(feature_row(x));
      z.row(static_cast<Eigen::Index>(r)) = featurize(x).z.transpose();
      e.push_back(energy(inst, x));
    }
    const auto targets = normalize_targets(e);
    const auto post = fit_posterior(z, targets, sigma_y, sigma_pr);

    // Independent normal equations (Z^T Z + ridge I) w = Z^T y.
    double lo = e[0], hi = e[0];
    for (double v : e) lo = std::min(lo, v), hi = std::max(hi, v);
    std::vector<double> y(m, 0.0);
    if (hi > lo)
      for (std::size_t r = 0; r < m; ++r) y[r] = 2.0 * (e[r] - lo) / (hi - lo) - 1.0;
    const std::size_t p = rows[0].size();
    std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
    std::vector<double> b(p, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t i = 0; i < p; ++i) {
        b[i] += rows[r][i] * y[r];
        for (std::size_t j = 0; j < p; ++j) a[i][j] += rows[r][i] * rows[r][j];
      }
    for (std::size_t i = 0; i < p; ++i) a[i][i] += ridge;
    const auto oracle = solve_dense(a, b);
    for (std::size_t i = 0; i < p; ++i) worst = std::max(worst, std::abs(post.m_pos[static_cast<Eigen::Index>(i)] - oracle[i]));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "posterior mean vs ridge normal equations, 50 problems: max abs err %.3g (<= 1e-8)", worst);
  return {worst <= 1e-8, buf};
}

Outcome criterion2() {
  double worst = 0.0;
  for (std::size_t k = 0; k < 10; ++k) {
    const std::size_t n = 3 + k;  // N = 3 .. 12
    const auto inst = generate_instance(n, 1.0, derive_seed(2, "acceptance-2", k));
    const auto w = true_params(inst);
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
      const auto x = Configuration::from_index(code, n);
      const double h = energy(inst, x);
      worst = std::max(worst, std::abs(predict(w, x) - h) / std::max(std::abs(h), 1e-300));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "predict(w_J, x) vs energy over all 2^N, N = 3..12: max rel err %.3g (<= 1e-12)", worst);
  return {worst <= 1e-12, buf};
}

Outcome criterion3() {
  int hits = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto inst = generate_instance(12, 1.0, derive_seed(3, "acceptance-3-instance", k));
    const auto ext = exact_extrema(inst);
    Rng rng(derive_seed(3, "acceptance-3-anneal", k));
    const auto res = anneal(true_params(inst), 12, AnnealSchedule::standard(kBetaFinal), rng);
    hits += std::abs(energy(inst, res.x_best) - ext.h_min) <= 1e-9 * std::max(1.0, std::abs(ext.h_min));
  }
  return {hits >= 95, "SA on w_J at N = 12 finds the enumerated ground state in " + std::to_string(hits) +
                          "/100 runs (>= 95)"};
}

ExperimentSpec n16_spec(const std::string& dir, std::vector<Variant> variants, std::size_t iters) {
  ExperimentSpec s;
  s.name = dir;
  s.n_values = {16};
  s.beta_final_values = {kBetaFinal};
  s.n_instances = kInstances;
  s.variants = std::move(variants);
  s.max_iters = iters;
  s.master_seed = 20240;
  s.out_dir = g_work / dir;
  return s;
}

RunManifest run_or_resume(const ExperimentSpec& spec) {
  const auto m = run_experiment(spec);
  if (m.failures() != 0) throw std::runtime_error(std::to_string(m.failures()) + " run(s) failed in " + spec.name);
  return m;
}

AggregateCurve cell_curve(const RunManifest& m, const Variant& v, TraceField f) {
  const auto traces = detail::load_cell_traces(m, v, m.spec.n_values[0], m.spec.beta_final_values[0]);
  return aggregate(std::span<const RunTrace>(traces), f);
}

const Variant kMap{Acquisition::map, false};
const Variant kRandomMap{Acquisition::map, true};
const Variant kTs{Acquisition::ts, false};
const Variant kRandomTs{Acquisition::ts, true};

ExperimentSpec map_pair_spec() { return n16_spec("map_n16", {kMap, kRandomMap}, 2000); }

Outcome criterion4() {
  const auto m = run_or_resume(map_pair_spec());
  const auto u_map = cell_curve(m, kMap, TraceField::u);
  const auto u_rnd = cell_curve(m, kRandomMap, TraceField::u);
  const double a = u_map.mean[1000], b = u_rnd.mean[1000];
  std::size_t solved = 0, total = 0;
  for (const auto& r : m.runs) {
    if (r.variant != kRandomMap) continue;
    ++total;
    solved += r.tau && *r.tau <= 1000;
  }
  const bool ratio_ok = a > 3.0 * b;
  const bool solved_ok = 10 * solved >= 8 * total;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "N = 16, %zu instances: [u(1000)] map %.4g vs random-map %.4g (need > 3x); "
                "random-map tau <= 1000 in %zu/%zu (need >= 80%%)",
                total, a, b, solved, total);
  return {ratio_ok && solved_ok, buf};
}

Outcome criterion5() {
  const auto m = run_or_resume(n16_spec("ts_n16", {kTs, kRandomTs}, 1000));
  std::size_t dups = 0, iters = 0, dups_pre = 0, iters_pre = 0;
  for (const auto& r : m.runs) {
    if (r.variant != kTs) continue;
    dups += r.duplicate_events;
    iters += r.iterations;
    const auto tr = load_trace(m.root / r.file, m.spec.tau_threshold);
    const std::size_t stop = tr.tau ? *tr.tau : tr.iterations();
    for (const auto& row : tr.rows) {
      if (row.t == 0 || row.t > stop) continue;
      ++iters_pre;
      dups_pre += row.duplicate_event;
    }
  }
  const double rate = static_cast<double>(dups) / static_cast<double>(iters);
  const double rate_pre = iters_pre ? static_cast<double>(dups_pre) / static_cast<double>(iters_pre) : 0.0;

  const auto a = cell_curve(m, kTs, TraceField::u);
  const auto b = cell_curve(m, kRandomTs, TraceField::u);
  bool bands = true;
  std::string band_text;
  for (std::size_t t : {100, 300, 1000}) {
    const bool overlap = std::abs(a.mean[t] - b.mean[t]) <= 2.0 * (a.stderr_[t] + b.stderr_[t]);
    bands = bands && overlap;
    char buf[128];
    std::snprintf(buf, sizeof buf, " t=%zu: %.3g+-%.2g vs %.3g+-%.2g%s;", t, a.mean[t], 2 * a.stderr_[t], b.mean[t],
                  2 * b.stderr_[t], overlap ? "" : " (disjoint)");
    band_text += buf;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "N = 16: ts duplicate-event rate over 1000 iterations %.4f (need < 0.02; before tau %.4f); "
                "2-stderr bands ts vs random-ts:",
                rate, rate_pre);
  return {rate < 0.02 && bands, buf + band_text};
}

Outcome criterion6() {
  ExperimentSpec s;
  s.name = "scaling";
  s.n_values = {8, 12, 16, 20};
  s.beta_final_values = {kBetaFinal};
  s.n_instances = kInstances;
  s.variants = {kRandomMap, kRandomTs};
  s.max_iters = 10000;
  s.early_stop = true;
  s.master_seed = 20240;
  s.out_dir = g_work / "scaling";
  const auto m = run_or_resume(s);

  std::map<Variant, std::map<std::size_t, std::vector<double>>> taus;
  std::size_t censored = 0;
  for (const auto& r : m.runs) {
    if (r.tau) taus[r.variant][r.n].push_back(static_cast<double>(*r.tau));
    else ++censored;
  }
  const auto fit_map = fit_scaling(taus[kRandomMap], kInstances);
  const auto fit_ts = fit_scaling(taus[kRandomTs], kInstances);
  const bool ok = fit_map.z >= 1.8 && fit_map.z <= 2.5 && fit_map.z <= fit_ts.z && censored == 0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "N in {8,12,16,20}, %zu instances: z(random-map) = %.3f +- %.3f (need in [1.8, 2.5]), "
                "z(random-ts) = %.3f +- %.3f (need >= z(random-map)); censored runs %zu",
                kInstances, fit_map.z, fit_map.z_stderr, fit_ts.z, fit_ts.z_stderr, censored);
  return {ok, buf};
}

Outcome criterion7() {
  const auto m = run_or_resume(map_pair_spec());
  const auto r_map = cell_curve(m, kMap, TraceField::r);
  const auto r_rnd = cell_curve(m, kRandomMap, TraceField::r);
  double peak = 0.0;
  for (std::size_t t = 0; t <= 2000; ++t) peak = std::max(peak, r_map.mean[t]);
  const double end = r_rnd.mean[2000];
  char buf[256];
  std::snprintf(buf, sizeof buf, "N = 16, %zu instances: max_t<=2000 R(t) map %.4f (need < 0.3); R(2000) random-map %.4f (need > 0.6)",
                kInstances, peak, end);
  return {peak < 0.3 && end > 0.6, buf};
}

// Criterion 8 sub-checks.

bool ts_moments(std::string& msg) {
  Rng rng(derive_seed(8, "ts-moments"));
  const std::size_t n = 4;
  const auto inst = generate_instance(n, 1.0, 8);
  Eigen::MatrixXd z(12, static_cast<Eigen::Index>(param_count(n)));
  std::vector<double> e;
  for (int r = 0; r < 12; ++r) {
    const auto x = Configuration::random(n, rng);
    z.row(r) = featurize(x).z.transpose();
    e.push_back(energy(inst, x));
  }
  const auto post = fit_posterior(z, normalize_targets(e), 0.3, 1.0);
  const auto p = static_cast<Eigen::Index>(post.dim());
  const Eigen::MatrixXd cov = post.covariance();
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(p, p);
  for (int d = 0; d < draws; ++d) {
    const Eigen::VectorXd w = thompson_sample(post, rng).w - post.m_pos;
    sum += w;
    outer += w * w.transpose();
  }
  double worst_mean = 0.0;
  for (Eigen::Index k = 0; k < p; ++k)
    worst_mean = std::max(worst_mean, std::abs(sum[k] / draws) / std::sqrt(cov(k, k) / draws));
  // Entrywise check against the standard error of each covariance estimate.
  double worst_cov = 0.0;
  const Eigen::MatrixXd emp = outer / draws;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / draws);
      worst_cov = std::max(worst_cov, std::abs(emp(i, j) - cov(i, j)) / se);
    }
  const double frob = (emp - cov).norm() / cov.norm();
  char buf[192];
  std::snprintf(buf, sizeof buf, "TS moments max |z| mean %.2f cov %.2f (<= 5), cov rel Frobenius err %.4f (<= 0.05)",
                worst_mean, worst_cov, frob);
  msg = buf;
  return worst_mean <= 5.0 && worst_cov <= 5.0 && frob <= 0.05;
}

bool delta_flip_check(std::string& msg) {
  Rng rng(derive_seed(8, "delta-flip"));
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 2 + rng.below(20);
    SurrogateParams w(n);
    for (Eigen::Index k = 0; k < w.w.size(); ++k) w.w[k] = rng.normal();
    const auto x = Configuration::random(n, rng);
    const std::size_t i = rng.below(n);
    auto y = x;
    y.flip(i);
    worst = std::max(worst, std::abs(delta_flip(w, x, i) - (predict(w, y) - predict(w, x))));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "delta_flip max err %.2g over 1e4 triples (<= 1e-12)", worst);
  msg = buf;
  return worst <= 1e-12;
}

bool gibbs_check(std::string& msg) {
  Rng g(derive_seed(8, "gibbs"));
  const std::size_t n = 4;
  SurrogateParams w(n);
  for (Eigen::Index k = 0; k < w.w.size(); ++k) w.w[k] = g.normal();
  const double beta = 0.8;
  std::vector<double> pi(16);
  double zsum = 0.0;
  for (std::uint64_t c = 0; c < 16; ++c) zsum += pi[c] = std::exp(-beta * predict(w, Configuration::from_index(c, n)));
  std::vector<double> counts(16, 0.0);
  const std::size_t sweeps = 200000, burn = 1000;
  AnnealOptions opts;
  opts.on_sweep = [&](const SweepInfo& s) {
    if (s.sweep < burn) return;
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < n; ++i) code |= static_cast<std::uint64_t>(s.state[i]) << i;
    counts[code] += 1.0;
  };
  anneal(w, n, AnnealSchedule{beta, beta, sweeps}, g, opts);
  double tv = 0.0;
  for (std::size_t c = 0; c < 16; ++c) tv += std::abs(counts[c] / (sweeps - burn) - pi[c] / zsum);
  tv *= 0.5;
  char buf[96];
  std::snprintf(buf, sizeof buf, "Gibbs TV distance %.4f (<= 0.02)", tv);
  msg = buf;
  return tv <= 0.02;
}

bool dedup_check(std::string& msg) {
  bool ok = true;
  std::size_t checked = 0;
  for (Variant v : {kRandomMap, kRandomTs}) {
    const auto inst = generate_instance(10, 1.0, derive_seed(8, "dedup", v.acquisition == Acquisition::ts));
    auto cfg = RunConfig::for_instance(inst, v, kBetaFinal, 8);
    cfg.max_iters = 300;
    cfg.schedule.r_total = 500;
    run(inst, exact_extrema(inst), cfg, [&](const IterationInfo& it) {
      ok = ok && it.data.size() == it.t + 1 && it.data.distinct() == it.t + 1;
      ++checked;
    });
  }
  msg = "dedup |D(t)| = t+1 over " + std::to_string(checked) + " iterations";
  return ok && checked == 600;
}

bool replay_check(std::string& msg) {
  auto make = [](const std::string& dir) {
    ExperimentSpec s;
    s.name = "replay";
    s.n_values = {8, 10};
    s.beta_final_values = {10.0, kBetaFinal};
    s.n_instances = 3;
    s.variants = all_variants();
    s.max_iters = 40;
    s.r_total = 200;
    s.master_seed = 77;
    s.resume = false;
    s.out_dir = g_work / dir;
    return s;
  };
  auto files = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() != kManifestName)
        out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
    return out;
  };
  auto a = make("replay_a");
  auto b = make("replay_b");
  b.threads = 2;
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
  const auto ma = run_experiment(a);
  const auto mb = run_experiment(b);
  for (Figure f : {Figure::f1, Figure::f2, Figure::f3, Figure::f4}) {
    emit_figure_data(ma, f);
    emit_figure_data(mb, f);
  }
  const auto fa = files(a.out_dir), fb = files(b.out_dir);
  const bool ok = fa == fb && manifest_hash(ma) == manifest_hash(mb) && fa.size() >= 48;
  msg = "replay from master seed: " + std::to_string(fa.size()) + " files " + (fa == fb ? "identical" : "differ");
  return ok;
}

Outcome criterion8() {
  std::string detail;
  bool ok = true;
  for (auto check : {ts_moments, delta_flip_check, gibbs_check, dedup_check, replay_check}) {
    std::string msg;
    const bool pass = check(msg);
    ok = ok && pass;
    if (!detail.empty()) detail += "; ";
    detail += msg + (pass ? "" : " [FAILED]");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nbocs acceptance checks"};
  int only = 0;
  std::string work = g_work.string();
  app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--work-dir", work, "Directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8};
  int failures = 0;
  for (int k = 1; k <= 8; ++k) {
    if (only && k != only) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", k, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
