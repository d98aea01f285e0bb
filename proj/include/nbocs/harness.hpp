#pragma once

// Experiment orchestration: fan-out over (N, beta_final, variant, instance, seed),
// trace persistence, resumable manifest, aggregates, scaling fits and figure data.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "nbocs/io.hpp"
#include "nbocs/metrics.hpp"
#include "nbocs/optimizer.hpp"
#include "nbocs/sk_model.hpp"

namespace nbocs {

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<std::size_t> n_values;
  std::vector<double> beta_final_values;  // units of 1/J
  std::size_t n_instances = 100;
  std::size_t seeds_per_instance = 1;
  std::vector<Variant> variants;
  std::size_t max_iters = 2000;
  double tau_threshold = 1e-3;
  bool early_stop = false;
  SaReturn sa_return = SaReturn::best;
  std::size_t r_total = 10000;
  double j_scale = 1.0;
  std::uint64_t master_seed = 0;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  bool unsafe_large_n = false;
  bool overlap_include_constant = true;
  // Execution-only settings; they do not enter the spec hash.
  std::filesystem::path out_dir = "out";
  std::size_t threads = 1;
  bool resume = true;

  void validate() const {
    if (n_values.empty()) throw config_error("spec: n_values must be nonempty");
    if (beta_final_values.empty()) throw config_error("spec: beta_final_values must be nonempty");
    if (variants.empty()) throw config_error("spec: variants must be nonempty");
    if (n_instances < 1) throw config_error("spec: n_instances must be >= 1");
    if (seeds_per_instance < 1) throw config_error("spec: seeds_per_instance must be >= 1");
    if (max_iters < 1) throw config_error("spec: max_iters must be >= 1");
    if (!(tau_threshold > 0.0)) throw config_error("spec: tau_threshold must be > 0");
    if (!(j_scale > 0.0)) throw config_error("spec: j_scale must be > 0");
    if (r_total < 1) throw config_error("spec: r_total must be >= 1");
    for (auto n : n_values) {
      if (n < 2) throw config_error("spec: every N must be >= 2");
      if (n > enumeration_cap && !unsafe_large_n)
        throw config_error("spec: N = " + std::to_string(n) + " exceeds the enumeration cap " +
                           std::to_string(enumeration_cap) + " (set unsafe_large_n to use heuristic extrema)");
    }
    for (double b : beta_final_values)
      if (!(b > 0.0)) throw config_error("spec: beta_final values must be > 0");
  }

  std::size_t expected_runs() const {
    return n_values.size() * beta_final_values.size() * variants.size() * n_instances * seeds_per_instance;
  }
};

// Fields that determine results (keys serialize sorted).
inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["n_values"] = s.n_values;
  j["beta_final_values"] = s.beta_final_values;
  j["n_instances"] = s.n_instances;
  j["seeds_per_instance"] = s.seeds_per_instance;
  std::vector<std::string> vs;
  for (const auto& v : s.variants) vs.push_back(v.name());
  j["variants"] = vs;
  j["max_iters"] = s.max_iters;
  j["tau_threshold"] = s.tau_threshold;
  j["early_stop"] = s.early_stop;
  j["sa_return"] = to_string(s.sa_return);
  j["r_total"] = s.r_total;
  j["j_scale"] = s.j_scale;
  j["master_seed"] = s.master_seed;
  j["enumeration_cap"] = s.enumeration_cap;
  j["unsafe_large_n"] = s.unsafe_large_n;
  j["overlap_include_constant"] = s.overlap_include_constant;
  return j;
}

inline std::string spec_hash(const ExperimentSpec& s) { return hex64(fnv1a64(spec_to_json(s).dump())); }

// Reads a spec from JSON. Unknown keys and type errors name the offending field.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "name", "n_values", "beta_final_values", "n_instances", "seeds_per_instance", "variants",
      "max_iters", "tau_threshold", "early_stop", "sa_return", "r_total", "j_scale", "master_seed",
      "enumeration_cap", "unsafe_large_n", "overlap_include_constant", "out_dir", "threads", "resume"};
  if (!j.is_object()) throw config_error("spec: top level must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw config_error("spec: unknown field '" + key + "'");

  ExperimentSpec s;
  auto field = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("spec: field '") + key + "': " + e.what());
    }
  };
  field("name", s.name);
  field("n_values", s.n_values);
  field("beta_final_values", s.beta_final_values);
  field("n_instances", s.n_instances);
  field("seeds_per_instance", s.seeds_per_instance);
  std::vector<std::string> variant_names;
  field("variants", variant_names);
  for (const auto& v : variant_names) {
    try {
      s.variants.push_back(parse_variant(v));
    } catch (const config_error& e) {
      throw config_error(std::string("spec: field 'variants': ") + e.what());
    }
  }
  field("max_iters", s.max_iters);
  field("tau_threshold", s.tau_threshold);
  field("early_stop", s.early_stop);
  std::string sa_return = to_string(s.sa_return);
  field("sa_return", sa_return);
  s.sa_return = parse_sa_return(sa_return);
  field("r_total", s.r_total);
  field("j_scale", s.j_scale);
  field("master_seed", s.master_seed);
  field("enumeration_cap", s.enumeration_cap);
  field("unsafe_large_n", s.unsafe_large_n);
  field("overlap_include_constant", s.overlap_include_constant);
  std::string out_dir = s.out_dir.string();
  field("out_dir", out_dir);
  s.out_dir = out_dir;
  field("threads", s.threads);
  field("resume", s.resume);
  return s;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return spec_from_json(j);
}

// Seed fan-out. Instance seeds depend only on (master, N, instance index); run
// seeds only on the instance seed and seed index, so every variant and every
// beta_final of one (instance, seed) cell shares its random streams.
inline std::uint64_t instance_seed_for(std::uint64_t master, std::size_t n, std::size_t index) {
  return derive_seed(derive_seed(master, "instance", n), "index", index);
}

inline std::uint64_t run_seed_for(std::uint64_t instance_seed, std::size_t seed_index) {
  return derive_seed(instance_seed, "run", seed_index);
}

// Extrema for N above the enumeration cap: best and worst of repeated
// annealing on +-w_J. Heuristic only, flagged as external.
inline Extrema heuristic_extrema(const SkInstance& inst, std::size_t restarts = 16) {
  const SurrogateParams w = true_params(inst);
  SurrogateParams neg(Eigen::VectorXd(-w.w));
  Rng rng(derive_seed(inst.seed, "heuristic-extrema"));
  const auto sched = AnnealSchedule::standard(1e4, inst.j_scale);
  Extrema ext;
  ext.method = ExtremaMethod::external;
  ext.h_min = std::numeric_limits<double>::infinity();
  ext.h_max = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    const auto lo = anneal(w, inst.n, sched, rng);
    const double e_lo = energy(inst, lo.x_best);
    if (e_lo < ext.h_min) {
      ext.h_min = e_lo;
      ext.x_min = lo.x_best;
    }
    const auto hi = anneal(neg, inst.n, sched, rng);
    ext.h_max = std::max(ext.h_max, energy(inst, hi.x_best));
  }
  return ext;
}

struct RunRecord {
  std::string file;
  Variant variant;
  std::size_t n = 0;
  double beta_final = 0.0;
  std::size_t instance_index = 0;
  std::uint64_t instance_seed = 0;
  std::size_t seed_index = 0;
  std::uint64_t run_seed = 0;
  bool ok = false;
  std::string run_status;
  std::optional<std::size_t> tau;
  std::size_t iterations = 0;
  std::size_t duplicate_events = 0;
  bool extrema_verified = true;
  double wall_ms = 0.0;
  std::string error;

  auto key() const { return std::tuple(n, beta_final, variant, instance_index, seed_index); }
};

struct AggregateRecord {
  Variant variant;
  std::size_t n = 0;
  double beta_final = 0.0;
  std::string u_file;
  std::string r_file;
  std::size_t n_runs = 0;
};

struct ScalingRecord {
  Variant variant;
  double beta_final = 0.0;
  std::string file;
  double z = 0.0;
  double z_stderr = 0.0;
  double prefactor = 0.0;
  std::size_t censored = 0;
};

struct RunManifest {
  std::string spec_hash;
  ExperimentSpec spec;
  std::filesystem::path root;  // directory holding manifest.json
  std::vector<RunRecord> runs;
  std::vector<AggregateRecord> aggregates;
  std::vector<ScalingRecord> scaling;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return !r.ok; }));
  }
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["spec_hash"] = m.spec_hash;
  j["spec"] = spec_to_json(m.spec);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : m.runs) {
    nlohmann::json e;
    e["file"] = r.file;
    e["variant"] = r.variant.name();
    e["n"] = r.n;
    e["beta_final"] = r.beta_final;
    e["instance_index"] = r.instance_index;
    e["instance_seed"] = r.instance_seed;
    e["seed_index"] = r.seed_index;
    e["run_seed"] = r.run_seed;
    e["status"] = r.ok ? "ok" : "failed";
    e["run_status"] = r.run_status;
    e["tau"] = r.tau ? nlohmann::json(*r.tau) : nlohmann::json(nullptr);
    e["iterations"] = r.iterations;
    e["duplicate_events"] = r.duplicate_events;
    e["extrema_verified"] = r.extrema_verified;
    e["wall_ms"] = r.wall_ms;
    if (!r.error.empty()) e["error"] = r.error;
    runs.push_back(e);
  }
  j["runs"] = runs;
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : m.aggregates)
    aggs.push_back({{"variant", a.variant.name()}, {"n", a.n}, {"beta_final", a.beta_final},
                    {"u_file", a.u_file}, {"r_file", a.r_file}, {"n_runs", a.n_runs}});
  j["aggregates"] = aggs;
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : m.scaling)
    sc.push_back({{"variant", s.variant.name()}, {"beta_final", s.beta_final}, {"file", s.file}, {"z", s.z},
                  {"z_stderr", s.z_stderr}, {"prefactor", s.prefactor}, {"censored", s.censored}});
  j["scaling"] = sc;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root) {
  RunManifest m;
  try {
    m.root = root;
    m.spec_hash = j.at("spec_hash").get<std::string>();
    m.spec = spec_from_json(j.at("spec"));
    m.spec.out_dir = root;
    for (const auto& e : j.at("runs")) {
      RunRecord r;
      r.file = e.at("file").get<std::string>();
      r.variant = parse_variant(e.at("variant").get<std::string>());
      r.n = e.at("n").get<std::size_t>();
      r.beta_final = e.at("beta_final").get<double>();
      r.instance_index = e.at("instance_index").get<std::size_t>();
      r.instance_seed = e.at("instance_seed").get<std::uint64_t>();
      r.seed_index = e.at("seed_index").get<std::size_t>();
      r.run_seed = e.at("run_seed").get<std::uint64_t>();
      r.ok = e.at("status").get<std::string>() == "ok";
      r.run_status = e.value("run_status", std::string());
      if (!e.at("tau").is_null()) r.tau = e.at("tau").get<std::size_t>();
      r.iterations = e.value("iterations", std::size_t{0});
      r.duplicate_events = e.value("duplicate_events", std::size_t{0});
      r.extrema_verified = e.value("extrema_verified", true);
      r.wall_ms = e.value("wall_ms", 0.0);
      r.error = e.value("error", std::string());
      m.runs.push_back(r);
    }
    for (const auto& e : j.value("aggregates", nlohmann::json::array())) {
      AggregateRecord a;
      a.variant = parse_variant(e.at("variant").get<std::string>());
      a.n = e.at("n").get<std::size_t>();
      a.beta_final = e.at("beta_final").get<double>();
      a.u_file = e.at("u_file").get<std::string>();
      a.r_file = e.at("r_file").get<std::string>();
      a.n_runs = e.at("n_runs").get<std::size_t>();
      m.aggregates.push_back(a);
    }
    for (const auto& e : j.value("scaling", nlohmann::json::array())) {
      ScalingRecord s;
      s.variant = parse_variant(e.at("variant").get<std::string>());
      s.beta_final = e.at("beta_final").get<double>();
      s.file = e.at("file").get<std::string>();
      s.z = e.at("z").get<double>();
      s.z_stderr = e.at("z_stderr").get<double>();
      s.prefactor = e.at("prefactor").get<double>();
      s.censored = e.at("censored").get<std::size_t>();
      m.scaling.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("manifest: ") + e.what());
  }
  return m;
}

inline constexpr const char* kManifestName = "manifest.json";

inline void save_manifest(const RunManifest& m) {
  write_text_file(m.root / kManifestName, manifest_to_json(m).dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& dir_or_file) {
  std::filesystem::path file = dir_or_file;
  if (std::filesystem::is_directory(file)) file /= kManifestName;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(file.string() + ": " + e.what());
  }
  return manifest_from_json(j, file.parent_path());
}

// Fingerprint of the results; timing fields are left out so replays hash equal.
inline std::string manifest_hash(const RunManifest& m) {
  auto j = manifest_to_json(m);
  for (auto& r : j["runs"]) r.erase("wall_ms");
  return hex64(fnv1a64(j.dump()));
}

// Line-delimited JSON progress records.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
  void emit(const nlohmann::json& record) {
    if (!out_) return;
    std::lock_guard lock(mu_);
    *out_ << record.dump() << '\n';
    out_->flush();
  }

 private:
  std::ostream* out_;
  std::mutex mu_;
};

namespace detail {

inline std::string aggregate_file_name(const char* field, const Variant& v, std::size_t n, double beta) {
  return std::string("aggregates/") + field + "_" + v.name() + "_" + std::to_string(n) + "_" + format_beta(beta) + ".csv";
}

inline std::vector<RunTrace> load_cell_traces(const RunManifest& m, const Variant& v, std::size_t n, double beta) {
  std::vector<RunTrace> traces;
  for (const auto& r : m.runs) {
    if (!r.ok || r.variant != v || r.n != n || r.beta_final != beta) continue;
    traces.push_back(load_trace(m.root / r.file, m.spec.tau_threshold));
  }
  return traces;
}

inline void write_aggregates(RunManifest& m) {
  m.aggregates.clear();
  m.scaling.clear();
  const auto& spec = m.spec;
  const std::string header = "spec_hash " + m.spec_hash;
  for (std::size_t n : spec.n_values) {
    for (double beta : spec.beta_final_values) {
      for (const auto& v : spec.variants) {
        const auto traces = load_cell_traces(m, v, n, beta);
        if (traces.empty()) continue;
        AggregateRecord a{v, n, beta, aggregate_file_name("u", v, n, beta), aggregate_file_name("r", v, n, beta),
                          traces.size()};
        const auto cu = aggregate(std::span<const RunTrace>(traces), TraceField::u);
        const auto cr = aggregate(std::span<const RunTrace>(traces), TraceField::r);
        write_text_file(m.root / a.u_file, aggregate_to_csv(cu, "[u(t)] " + v.name() + " N=" + std::to_string(n) +
                                                                   " beta_final=" + format_beta(beta) + "/J; " + header));
        write_text_file(m.root / a.r_file, aggregate_to_csv(cr, "R(t) " + v.name() + " N=" + std::to_string(n) +
                                                                   " beta_final=" + format_beta(beta) + "/J; " + header));
        m.aggregates.push_back(a);
      }
    }
  }

  // Scaling fits need >= 3 values of N with >= 10 reached taus each.
  for (double beta : spec.beta_final_values) {
    for (const auto& v : spec.variants) {
      std::map<std::size_t, std::vector<double>> taus;
      std::size_t censored = 0;
      for (const auto& r : m.runs) {
        if (!r.ok || r.variant != v || r.beta_final != beta) continue;
        if (r.tau) taus[r.n].push_back(static_cast<double>(*r.tau));
        else ++censored;
      }
      std::erase_if(taus, [](const auto& kv) { return kv.second.size() < 10; });
      if (taus.size() < 3) continue;
      const ScalingFit fit = fit_scaling(taus);
      ScalingRecord s{v, beta, "scaling/" + v.name() + "_" + format_beta(beta) + ".json", fit.z, fit.z_stderr,
                      fit.prefactor, censored};
      auto j = scaling_to_json(fit, taus);
      j["censored"] = censored;
      j["spec_hash"] = m.spec_hash;
      write_text_file(m.root / s.file, j.dump(2) + "\n");
      m.scaling.push_back(s);
    }
  }
}

}  // namespace detail

// Runs every cell of the spec, skipping runs already completed under the same
// spec hash when spec.resume is set. Per-run failures are recorded, not thrown.
inline RunManifest run_experiment(const ExperimentSpec& spec, EventLog* log = nullptr) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir / "traces");
  EventLog quiet;
  EventLog& events = log ? *log : quiet;

  RunManifest m;
  m.spec = spec;
  m.spec_hash = spec_hash(spec);
  m.root = spec.out_dir;

  std::map<std::tuple<std::size_t, double, Variant, std::size_t, std::size_t>, RunRecord> previous;
  if (spec.resume && std::filesystem::exists(spec.out_dir / kManifestName)) {
    try {
      const RunManifest old = load_manifest(spec.out_dir);
      if (old.spec_hash == m.spec_hash)
        for (const auto& r : old.runs) previous.emplace(r.key(), r);
    } catch (const std::exception& e) {
      events.emit({{"event", "manifest_unreadable"}, {"error", e.what()}});
    }
  }

  // Instances, in canonical order.
  struct InstanceSlot {
    std::size_t n;
    std::size_t index;
    std::uint64_t seed;
  };
  std::vector<InstanceSlot> slots;
  for (std::size_t n : spec.n_values)
    for (std::size_t i = 0; i < spec.n_instances; ++i) slots.push_back({n, i, instance_seed_for(spec.master_seed, n, i)});

  for (const auto& slot : slots)
    for (double beta : spec.beta_final_values)
      for (const auto& v : spec.variants)
        for (std::size_t s = 0; s < spec.seeds_per_instance; ++s) {
          RunRecord r;
          r.variant = v;
          r.n = slot.n;
          r.beta_final = beta;
          r.instance_index = slot.index;
          r.instance_seed = slot.seed;
          r.seed_index = s;
          r.run_seed = run_seed_for(slot.seed, s);
          r.file = "traces/" + trace_file_name(v, slot.n, beta, slot.seed, r.run_seed);
          m.runs.push_back(r);
        }

  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < m.runs.size(); ++k) {
    auto it = previous.find(m.runs[k].key());
    if (it != previous.end() && it->second.ok && it->second.file == m.runs[k].file &&
        std::filesystem::exists(spec.out_dir / it->second.file)) {
      try {
        load_trace(spec.out_dir / it->second.file, spec.tau_threshold);
        m.runs[k] = it->second;
        continue;
      } catch (const std::exception&) {
      }
    }
    todo.push_back(k);
  }
  events.emit({{"event", "experiment_start"}, {"name", spec.name}, {"spec_hash", m.spec_hash},
               {"runs_total", m.runs.size()}, {"runs_todo", todo.size()}});

  // Extrema are computed lazily once per instance that still has work.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> slot_of;
  for (std::size_t k = 0; k < slots.size(); ++k) slot_of[{slots[k].n, slots[k].index}] = k;
  std::vector<std::once_flag> slot_once(slots.size());
  std::vector<std::optional<SkInstance>> instances(slots.size());
  std::vector<std::optional<Extrema>> extrema(slots.size());
  std::vector<std::string> slot_error(slots.size());

  auto prepare = [&](std::size_t k) {
    std::call_once(slot_once[k], [&] {
      try {
        SkInstance inst = generate_instance(slots[k].n, spec.j_scale, slots[k].seed);
        extrema[k] = slots[k].n <= spec.enumeration_cap ? exact_extrema(inst, spec.enumeration_cap)
                                                        : heuristic_extrema(inst);
        instances[k] = std::move(inst);
      } catch (const std::exception& e) {
        slot_error[k] = e.what();
      }
    });
  };

  std::mutex manifest_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= todo.size()) return;
      RunRecord r = m.runs[todo[job]];
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t k = slot_of.at({r.n, r.instance_index});
      prepare(k);
      try {
        if (!slot_error[k].empty()) throw std::runtime_error(slot_error[k]);
        RunConfig cfg = RunConfig::for_instance(*instances[k], r.variant, r.beta_final, r.run_seed);
        cfg.schedule.r_total = spec.r_total;
        cfg.max_iters = spec.max_iters;
        cfg.tau_threshold = spec.tau_threshold;
        cfg.early_stop = spec.early_stop;
        cfg.sa_return = spec.sa_return;
        cfg.overlap_include_constant = spec.overlap_include_constant;
        const RunTrace trace = run(*instances[k], *extrema[k], cfg);
        save_trace(spec.out_dir / r.file, trace);
        r.ok = true;
        r.error.clear();
        r.run_status = to_string(trace.status);
        r.tau = trace.tau;
        r.iterations = trace.iterations();
        r.duplicate_events = trace.duplicate_events;
        r.extrema_verified = trace.extrema_verified;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      {
        std::lock_guard lock(manifest_mu);
        m.runs[todo[job]] = r;
        save_manifest(m);
      }
      nlohmann::json ev = {{"event", r.ok ? "run_done" : "run_failed"}, {"file", r.file}, {"wall_ms", r.wall_ms}};
      if (r.tau) ev["tau"] = *r.tau;
      if (!r.extrema_verified) ev["warning"] = "extrema unverified";
      if (!r.ok) ev["error"] = r.error;
      events.emit(ev);
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(spec.threads, todo.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  detail::write_aggregates(m);
  save_manifest(m);
  events.emit({{"event", "experiment_done"}, {"spec_hash", m.spec_hash}, {"failures", m.failures()},
               {"manifest_hash", manifest_hash(m)}});
  return m;
}

enum class Figure { f1, f2, f3, f4 };

inline Figure parse_figure(const std::string& s) {
  if (s == "f1") return Figure::f1;
  if (s == "f2") return Figure::f2;
  if (s == "f3") return Figure::f3;
  if (s == "f4") return Figure::f4;
  throw config_error("unknown figure '" + s + "' (expected f1, f2, f3 or f4)");
}

class coverage_error : public std::runtime_error {
 public:
  coverage_error(const std::string& what, std::vector<std::string> missing)
      : std::runtime_error(what), missing_cells(std::move(missing)) {}
  std::vector<std::string> missing_cells;
};

namespace detail {

inline bool cell_covered(const RunManifest& m, const Variant& v, std::size_t n, double beta) {
  return std::any_of(m.runs.begin(), m.runs.end(),
                     [&](const RunRecord& r) { return r.ok && r.variant == v && r.n == n && r.beta_final == beta; });
}

inline std::string cell_name(const Variant& v, std::size_t n, double beta) {
  return "(" + v.name() + ", N=" + std::to_string(n) + ", beta_final=" + format_beta(beta) + "/J)";
}

inline void require_cells(const RunManifest& m, const std::vector<Variant>& variants, const std::vector<std::size_t>& ns,
                          const std::vector<double>& betas) {
  std::vector<std::string> missing;
  for (const auto& v : variants)
    for (std::size_t n : ns)
      for (double b : betas)
        if (!cell_covered(m, v, n, b)) missing.push_back(cell_name(v, n, b));
  if (!missing.empty()) {
    std::string msg = "manifest lacks " + std::to_string(missing.size()) + " cell(s):";
    for (const auto& c : missing) msg += " " + c;
    throw coverage_error(msg, missing);
  }
}

inline std::string curve_rows(const RunManifest& m, const Variant& v, std::size_t n, double beta, TraceField field) {
  const auto traces = load_cell_traces(m, v, n, beta);
  const auto c = aggregate(std::span<const RunTrace>(traces), field);
  std::string out;
  for (std::size_t k = 0; k < c.t.size(); ++k)
    out += v.name() + "," + std::to_string(n) + "," + format_beta(beta) + "," + std::to_string(c.t[k]) + "," +
           format_double(c.mean[k]) + "," + format_double(c.stderr_[k]) + "," + std::to_string(c.n_instances) + "\n";
  return out;
}

}  // namespace detail

// Writes figure data as plain CSV under <out_dir>/figures and returns the paths.
//   f1: [u(t)] of nbocs-ts and nbocs-random-ts, every N and beta_final
//   f2: [u(t)] of nbocs-map and nbocs-random-map, every N and beta_final
//   f3: [tau] against N at the largest beta_final with power-law fits
//   f4: R(t) of all four variants at the largest N and beta_final
inline std::vector<std::filesystem::path> emit_figure_data(const RunManifest& m, Figure fig,
                                                           std::filesystem::path out_dir = {}) {
  if (out_dir.empty()) out_dir = m.root / "figures";
  const auto& spec = m.spec;
  const std::string stamp = "spec_hash " + m.spec_hash;
  const double beta_max = *std::max_element(spec.beta_final_values.begin(), spec.beta_final_values.end());
  const std::size_t n_max = *std::max_element(spec.n_values.begin(), spec.n_values.end());
  std::vector<std::filesystem::path> written;

  switch (fig) {
    case Figure::f1:
    case Figure::f2: {
      const bool ts = fig == Figure::f1;
      const std::vector<Variant> vs = {{ts ? Acquisition::ts : Acquisition::map, false},
                                       {ts ? Acquisition::ts : Acquisition::map, true}};
      detail::require_cells(m, vs, spec.n_values, spec.beta_final_values);
      std::string out = "# [u(t)] normalized smallest energy (dimensionless, 0 = ground state); t in iterations; "
                        "beta_final in units of 1/J; " + stamp + "\n";
      out += "variant,n,beta_final,t,mean,stderr,n_runs\n";
      for (const auto& v : vs)
        for (std::size_t n : spec.n_values)
          for (double b : spec.beta_final_values) out += detail::curve_rows(m, v, n, b, TraceField::u);
      const auto path = out_dir / (ts ? "f1.csv" : "f2.csv");
      write_text_file(path, out);
      written.push_back(path);
      break;
    }
    case Figure::f3: {
      const std::vector<Variant> vs = {{Acquisition::ts, false}, {Acquisition::ts, true}, {Acquisition::map, true}};
      detail::require_cells(m, vs, spec.n_values, {beta_max});
      std::string pts = "# [tau]: iterations until u(t) <= " + format_double(spec.tau_threshold) +
                        "; N spins; beta_final = " + format_beta(beta_max) + "/J; " + stamp + "\n";
      pts += "variant,n,mean_tau,stderr_tau,median_tau,count,censored\n";
      std::string fits = "# power law [tau] = prefactor * N^z, least squares in log-log; " + stamp + "\n";
      fits += "variant,z,z_stderr,prefactor\n";
      for (const auto& v : vs) {
        std::map<std::size_t, std::vector<double>> taus;
        for (std::size_t n : spec.n_values) {
          std::vector<double> samples;
          std::size_t censored = 0;
          for (const auto& r : m.runs) {
            if (!r.ok || r.variant != v || r.n != n || r.beta_final != beta_max) continue;
            if (r.tau) samples.push_back(static_cast<double>(*r.tau));
            else ++censored;
          }
          double mean = std::nan(""), se = std::nan("");
          if (!samples.empty()) {
            mean = 0.0;
            for (double s : samples) mean += s;
            mean /= static_cast<double>(samples.size());
            double ss = 0.0;
            for (double s : samples) ss += (s - mean) * (s - mean);
            se = samples.size() > 1 ? std::sqrt(ss / static_cast<double>(samples.size() - 1) /
                                                static_cast<double>(samples.size()))
                                    : 0.0;
          }
          pts += v.name() + "," + std::to_string(n) + "," + format_double(mean) + "," + format_double(se) + "," +
                 format_double(median_of(samples)) + "," + std::to_string(samples.size()) + "," +
                 std::to_string(censored) + "\n";
          if (!samples.empty()) taus[n] = samples;
        }
        if (taus.size() >= 3) {
          const ScalingFit fit = fit_scaling(taus, 1);
          fits += v.name() + "," + format_double(fit.z) + "," + format_double(fit.z_stderr) + "," +
                  format_double(fit.prefactor) + "\n";
        } else {
          fits += v.name() + ",nan,nan,nan\n";
        }
      }
      write_text_file(out_dir / "f3.csv", pts);
      write_text_file(out_dir / "f3_fit.csv", fits);
      written.push_back(out_dir / "f3.csv");
      written.push_back(out_dir / "f3_fit.csv");
      break;
    }
    case Figure::f4: {
      const auto vs = all_variants();
      detail::require_cells(m, vs, {n_max}, {beta_max});
      std::string out = "# R(t) cosine overlap with w_J (dimensionless); t in iterations; N = " +
                        std::to_string(n_max) + "; beta_final = " + format_beta(beta_max) + "/J; " + stamp + "\n";
      out += "variant,n,beta_final,t,mean,stderr,n_runs\n";
      for (const auto& v : vs) out += detail::curve_rows(m, v, n_max, beta_max, TraceField::r);
      const auto path = out_dir / "f4.csv";
      write_text_file(path, out);
      written.push_back(path);
      break;
    }
  }
  return written;
}

struct CellSummary {
  Variant variant;
  std::size_t n = 0;
  double beta_final = 0.0;
  std::size_t runs_ok = 0;
  std::size_t runs_failed = 0;
  std::size_t censored = 0;
  double mean_tau = std::nan("");
  double median_tau = std::nan("");
  double final_u = std::nan("");
  double final_r = std::nan("");
  double duplicate_rate = std::nan("");
  bool extrema_verified = true;
};

// Per-cell statistics for the report subcommand.
inline std::vector<CellSummary> summarize(const RunManifest& m) {
  std::vector<CellSummary> cells;
  for (std::size_t n : m.spec.n_values)
    for (double beta : m.spec.beta_final_values)
      for (const auto& v : m.spec.variants) {
        CellSummary c{v, n, beta};
        std::vector<double> taus;
        std::size_t dups = 0, iters = 0;
        for (const auto& r : m.runs) {
          if (r.variant != v || r.n != n || r.beta_final != beta) continue;
          if (!r.ok) {
            ++c.runs_failed;
            continue;
          }
          ++c.runs_ok;
          c.extrema_verified = c.extrema_verified && r.extrema_verified;
          if (r.tau) taus.push_back(static_cast<double>(*r.tau));
          else ++c.censored;
          dups += r.duplicate_events;
          iters += r.iterations;
        }
        if (!taus.empty()) {
          double sum = 0.0;
          for (double t : taus) sum += t;
          c.mean_tau = sum / static_cast<double>(taus.size());
          c.median_tau = median_of(taus);
        }
        if (iters > 0) c.duplicate_rate = static_cast<double>(dups) / static_cast<double>(iters);
        if (c.runs_ok > 0) {
          const auto traces = detail::load_cell_traces(m, v, n, beta);
          const auto cu = aggregate(std::span<const RunTrace>(traces), TraceField::u);
          const auto cr = aggregate(std::span<const RunTrace>(traces), TraceField::r);
          c.final_u = cu.mean.back();
          c.final_r = cr.mean.back();
        }
        cells.push_back(c);
      }
  return cells;
}

}  // namespace nbocs
