#pragma once

// Outer Bayesian-optimization loop (nBOCS) in its four variants:
// {Thompson sampling, MAP} acquisition x {plain, random duplicate rejection}.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nbocs/annealer.hpp"
#include "nbocs/configuration.hpp"
#include "nbocs/metrics.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/sk_model.hpp"
#include "nbocs/surrogate.hpp"
#include "nbocs/trace.hpp"

namespace nbocs {

// Observed (configuration, energy) pairs in insertion order, with a membership
// index on the bit pattern. Global-flip partners are distinct keys.
class Dataset {
 public:
  struct Entry {
    Configuration x;
    double energy;
  };

  explicit Dataset(std::size_t n = 0) : n_(n) {}

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }

  bool contains(const Configuration& x) const { return index_.contains(x); }
  std::size_t distinct() const noexcept { return index_.size(); }

  void add(Configuration x, double energy) {
    if (x.size() != n_) throw config_error("Dataset::add: configuration length mismatch");
    index_.insert(x);
    entries_.push_back({std::move(x), energy});
  }

  std::vector<double> energies() const {
    std::vector<double> e;
    e.reserve(entries_.size());
    for (const auto& en : entries_) e.push_back(en.energy);
    return e;
  }

  // 2^n, saturating for n >= 64.
  std::uint64_t space_size() const noexcept {
    return n_ >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_);
  }

  bool full() const noexcept { return n_ < 64 && index_.size() >= space_size(); }

 private:
  std::size_t n_;
  std::vector<Entry> entries_;
  std::unordered_set<Configuration, ConfigurationHash> index_;
};

// Uniform draw from the configurations not yet in `data`. Rejection sampling
// while the dataset covers at most half the space, otherwise an explicit
// enumeration of the complement.
inline Configuration propose_random_unseen(std::size_t n, const Dataset& data, Rng& rng) {
  if (data.n() != n) throw config_error("propose_random_unseen: dataset dimension mismatch");
  if (data.full()) throw space_exhausted("propose_random_unseen: all 2^" + std::to_string(n) + " configurations are in the dataset");
  if (n < 64 && data.distinct() > data.space_size() / 2) {
    std::vector<std::uint64_t> unseen;
    unseen.reserve(static_cast<std::size_t>(data.space_size() - data.distinct()));
    for (std::uint64_t code = 0; code < data.space_size(); ++code) {
      if (!data.contains(Configuration::from_index(code, n))) unseen.push_back(code);
    }
    return Configuration::from_index(unseen[static_cast<std::size_t>(rng.below(unseen.size()))], n);
  }
  for (;;) {
    Configuration x = Configuration::random(n, rng);
    if (!data.contains(x)) return x;
  }
}

struct RunConfig {
  Variant variant;
  std::size_t max_iters = 2000;
  AnnealSchedule schedule = AnnealSchedule::standard(1e4);
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  double tau_threshold = 1e-3;
  bool early_stop = false;
  SaReturn sa_return = SaReturn::best;
  SweepOrder sweep_order = SweepOrder::sequential;
  bool overlap_include_constant = true;

  // Defaults tied to the coupling scale: sigma_pr = J, sigma_y = 0.1 J,
  // beta_init = 1e-3 / J, beta_final given in units of 1/J.
  static RunConfig for_instance(const SkInstance& inst, Variant v, double beta_final_times_j,
                                std::uint64_t seed) {
    RunConfig cfg;
    cfg.variant = v;
    cfg.schedule = AnnealSchedule::standard(beta_final_times_j, inst.j_scale);
    cfg.hyper = Hyperparameters::for_coupling_scale(inst.j_scale);
    cfg.seed = seed;
    return cfg;
  }

  void validate() const {
    if (max_iters < 1) throw config_error("run config: max_iters must be >= 1");
    if (!(tau_threshold > 0.0)) throw config_error("run config: tau_threshold must be > 0");
    if (!(hyper.sigma_y > 0.0) || !(hyper.sigma_pr > 0.0)) throw config_error("run config: sigmas must be > 0");
    schedule.validate();
  }
};

// Labels of the independent substreams derived from RunConfig::seed.
namespace stream {
inline constexpr std::string_view initial = "initial-point";
inline constexpr std::string_view annealer = "annealer";
inline constexpr std::string_view thompson = "thompson";
inline constexpr std::string_view postprocess = "postprocess";
}  // namespace stream

// Passed to the optional observer once per iteration, after the new point is stored.
struct IterationInfo {
  std::size_t t;
  const Dataset& data;
  const SurrogateParams& acquisition;
  const Configuration& proposal;  // annealer output before postprocessing
  bool duplicate;
};

using RunObserver = std::function<void(const IterationInfo&)>;

inline RunTrace run(const SkInstance& inst, const Extrema& ext, const RunConfig& cfg,
                    const RunObserver& observer = {}) {
  validate_instance(inst);
  cfg.validate();
  if (!(ext.h_max > ext.h_min)) throw config_error("run: extrema have h_max <= h_min, u(t) is undefined");

  const std::size_t n = inst.n;
  const auto p = static_cast<Eigen::Index>(param_count(n));
  const SurrogateParams w_true = true_params(inst);

  Rng init_rng(derive_seed(cfg.seed, stream::initial));
  Rng sa_rng(derive_seed(cfg.seed, stream::annealer));
  Rng ts_rng(derive_seed(cfg.seed, stream::thompson));
  Rng post_rng(derive_seed(cfg.seed, stream::postprocess));

  Dataset data(n);
  std::vector<std::vector<std::size_t>> active;  // nonzero feature indices per entry
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);

  auto store = [&](Configuration x) {
    const double h = energy(inst, x);
    auto on = active_features(x);
    for (std::size_t a : on)
      for (std::size_t b : on) gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1.0;
    active.push_back(std::move(on));
    data.add(std::move(x), h);
    return h;
  };

  RunTrace trace;
  trace.extrema_verified = ext.verified();

  double h_best = store(Configuration::random(n, init_rng));
  auto record = [&](std::size_t t, double r, bool dup) {
    const double u = normalized_energy(h_best, ext);
    trace.rows.push_back({t, h_best, u, r, dup});
    if (!trace.tau && u <= cfg.tau_threshold) trace.tau = t;
  };
  record(0, 0.0, false);

  const bool random_post = cfg.variant.postprocess;
  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    if (cfg.early_stop && trace.tau) {
      trace.status = RunStatus::early_stopped;
      break;
    }
    if (random_post && data.full()) {
      trace.status = RunStatus::space_exhausted;
      break;
    }

    const std::vector<double> energies = data.energies();
    const NormalizedTargets targets = normalize_targets(energies);
    Eigen::VectorXd zty = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double y = targets.y[static_cast<Eigen::Index>(k)];
      if (y == 0.0) continue;
      for (std::size_t a : active[k]) zty[static_cast<Eigen::Index>(a)] += y;
    }
    const Posterior post = fit_posterior_from_gram(gram, zty, data.size(), cfg.hyper.sigma_y, cfg.hyper.sigma_pr);
    const SurrogateParams acq =
        cfg.variant.acquisition == Acquisition::ts ? thompson_sample(post, ts_rng) : map_params(post);

    AnnealOptions opts;
    opts.order = cfg.sweep_order;
    const AnnealResult sa = anneal(acq, n, cfg.schedule, sa_rng, opts);
    const Configuration& proposal = sa.proposal(cfg.sa_return);

    const bool duplicate = data.contains(proposal);
    if (duplicate) ++trace.duplicate_events;
    Configuration next = (duplicate && random_post) ? propose_random_unseen(n, data, post_rng) : proposal;

    h_best = std::min(h_best, store(std::move(next)));
    record(t, overlap(acq, w_true, cfg.overlap_include_constant), duplicate);
    if (observer) observer({t, data, acq, proposal, duplicate});
  }
  return trace;
}

}  // namespace nbocs
