// nbocs command-line front end.
//
//   nbocs instance gen    --n 16 --seed 7 --out inst.json
//   nbocs instance solve  inst.json
//   nbocs run             --instance inst.json --variant random-map --beta-final 1e4 --out traces/
//   nbocs experiment      samples/fig2_desk.json --threads 4 --resume
//   nbocs figure          out/fig2 --figure f2
//   nbocs report          out/fig2
//
// Exit codes: 0 success, 1 partial failures, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nbocs/nbocs.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

struct InstanceGenArgs {
  std::size_t n = 16;
  double j_scale = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  bool no_couplings = false;
  bool solve = false;
};

struct InstanceSolveArgs {
  std::string file;
  std::string out;
  std::size_t cap = nbocs::kDefaultEnumerationCap;
  bool unsafe_large_n = false;
};

struct RunArgs {
  std::string instance;
  std::size_t n = 16;
  std::uint64_t instance_seed = 0;
  double j_scale = 1.0;
  std::string variant = "random-map";
  double beta_final = 1e4;
  std::size_t max_iters = 2000;
  double tau_threshold = 1e-3;
  bool early_stop = false;
  std::string sa_return = "best";
  std::size_t r_total = 10000;
  std::uint64_t run_seed = 0;
  std::string out = ".";
  bool unsafe_large_n = false;
};

struct ExperimentArgs {
  std::string spec_file;
  std::vector<std::size_t> n;
  std::vector<double> beta_final;
  std::vector<std::string> variants;
  std::optional<std::size_t> instances, seeds, max_iters, threads, r_total;
  std::optional<double> tau_threshold;
  std::optional<std::string> sa_return, out;
  std::optional<std::uint64_t> master_seed;
  bool resume = false;
  bool fresh = false;
  bool early_stop = false;
  bool unsafe_large_n = false;
  bool quiet = false;
};

struct FigureArgs {
  std::string manifest;
  std::string figure;
  std::string out;
};

struct ReportArgs {
  std::string manifest;
  bool json = false;
};

int cmd_instance_gen(const InstanceGenArgs& a) {
  nbocs::InstanceFile f;
  f.instance = nbocs::generate_instance(a.n, a.j_scale, a.seed);
  f.couplings_stored = !a.no_couplings;
  if (a.solve) f.extrema = nbocs::exact_extrema(f.instance);
  const auto j = nbocs::instance_to_json(f);
  if (a.out.empty()) print_json(j);
  else nbocs::save_instance(a.out, f);
  return kExitOk;
}

int cmd_instance_solve(const InstanceSolveArgs& a) {
  nbocs::InstanceFile f = nbocs::load_instance(a.file);
  if (f.instance.n > a.cap) {
    if (!a.unsafe_large_n) throw nbocs::oracle_unavailable(
        "N = " + std::to_string(f.instance.n) + " exceeds the enumeration cap " + std::to_string(a.cap) +
        "; pass --unsafe-large-n for heuristic extrema or supply extrema in the file");
    f.extrema = nbocs::heuristic_extrema(f.instance);
    std::cerr << "warning: extrema unverified (heuristic annealing)\n";
  } else {
    f.extrema = nbocs::exact_extrema(f.instance, a.cap);
  }
  nbocs::save_instance(a.out.empty() ? a.file : a.out, f);
  print_json({{"h_min", f.extrema->h_min},
              {"h_max", f.extrema->h_max},
              {"x_min", f.extrema->x_min.to_string()},
              {"method", nbocs::to_string(f.extrema->method)}});
  return kExitOk;
}

int cmd_run(const RunArgs& a) {
  nbocs::InstanceFile f;
  if (!a.instance.empty()) {
    f = nbocs::load_instance(a.instance);
  } else {
    f.instance = nbocs::generate_instance(a.n, a.j_scale, a.instance_seed);
  }
  if (!f.extrema) {
    if (f.instance.n <= nbocs::kDefaultEnumerationCap) f.extrema = nbocs::exact_extrema(f.instance);
    else if (a.unsafe_large_n) f.extrema = nbocs::heuristic_extrema(f.instance);
    else throw nbocs::oracle_unavailable("no extrema for N = " + std::to_string(f.instance.n) +
                                         "; solve the instance file or pass --unsafe-large-n");
  }
  const auto variant = nbocs::parse_variant(a.variant);
  auto cfg = nbocs::RunConfig::for_instance(f.instance, variant, a.beta_final, a.run_seed);
  cfg.max_iters = a.max_iters;
  cfg.tau_threshold = a.tau_threshold;
  cfg.early_stop = a.early_stop;
  cfg.sa_return = nbocs::parse_sa_return(a.sa_return);
  cfg.schedule.r_total = a.r_total;
  const auto trace = nbocs::run(f.instance, *f.extrema, cfg);
  const auto path = std::filesystem::path(a.out) /
                    nbocs::trace_file_name(variant, f.instance.n, a.beta_final, f.instance.seed, a.run_seed);
  nbocs::save_trace(path, trace);
  nlohmann::json summary = {{"trace", path.string()},
                            {"status", nbocs::to_string(trace.status)},
                            {"iterations", trace.iterations()},
                            {"final_u", trace.rows.back().u},
                            {"h_best", trace.rows.back().h_best},
                            {"duplicate_events", trace.duplicate_events},
                            {"tau", trace.tau ? nlohmann::json(*trace.tau) : nlohmann::json(nullptr)}};
  if (!trace.extrema_verified) summary["warning"] = "extrema unverified";
  print_json(summary);
  return kExitOk;
}

int cmd_experiment(const ExperimentArgs& a) {
  nbocs::ExperimentSpec spec;
  if (!a.spec_file.empty()) spec = nbocs::load_spec(a.spec_file);
  if (!a.n.empty()) spec.n_values = a.n;
  if (!a.beta_final.empty()) spec.beta_final_values = a.beta_final;
  if (!a.variants.empty()) {
    spec.variants.clear();
    for (const auto& v : a.variants) spec.variants.push_back(nbocs::parse_variant(v));
  }
  if (a.instances) spec.n_instances = *a.instances;
  if (a.seeds) spec.seeds_per_instance = *a.seeds;
  if (a.max_iters) spec.max_iters = *a.max_iters;
  if (a.threads) spec.threads = *a.threads;
  if (a.r_total) spec.r_total = *a.r_total;
  if (a.tau_threshold) spec.tau_threshold = *a.tau_threshold;
  if (a.sa_return) spec.sa_return = nbocs::parse_sa_return(*a.sa_return);
  if (a.out) spec.out_dir = *a.out;
  if (a.master_seed) spec.master_seed = *a.master_seed;
  if (a.resume) spec.resume = true;
  if (a.fresh) spec.resume = false;
  if (a.early_stop) spec.early_stop = true;
  if (a.unsafe_large_n) spec.unsafe_large_n = true;

  nbocs::EventLog log(a.quiet ? nullptr : &std::cerr);
  const auto manifest = nbocs::run_experiment(spec, &log);
  print_json({{"manifest", (manifest.root / nbocs::kManifestName).string()},
              {"runs", manifest.runs.size()},
              {"failures", manifest.failures()},
              {"aggregates", manifest.aggregates.size()},
              {"manifest_hash", nbocs::manifest_hash(manifest)}});
  return manifest.failures() == 0 ? kExitOk : kExitPartial;
}

int cmd_figure(const FigureArgs& a) {
  const auto manifest = nbocs::load_manifest(a.manifest);
  try {
    const auto files = nbocs::emit_figure_data(manifest, nbocs::parse_figure(a.figure), a.out);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : files) out.push_back(f.string());
    print_json({{"files", out}});
    return kExitOk;
  } catch (const nbocs::coverage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
}

std::string fmt(double v, const char* spec = "%.4g") {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int cmd_report(const ReportArgs& a) {
  const auto manifest = nbocs::load_manifest(a.manifest);
  const auto cells = nbocs::summarize(manifest);
  if (a.json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cells)
      out.push_back({{"variant", c.variant.name()}, {"n", c.n}, {"beta_final", c.beta_final},
                     {"runs_ok", c.runs_ok}, {"runs_failed", c.runs_failed}, {"censored", c.censored},
                     {"mean_tau", c.mean_tau}, {"median_tau", c.median_tau}, {"final_u", c.final_u},
                     {"final_r", c.final_r}, {"duplicate_rate", c.duplicate_rate},
                     {"extrema_verified", c.extrema_verified}});
    nlohmann::json sc = nlohmann::json::array();
    for (const auto& s : manifest.scaling)
      sc.push_back({{"variant", s.variant.name()}, {"beta_final", s.beta_final}, {"z", s.z}, {"z_stderr", s.z_stderr}});
    print_json({{"spec_hash", manifest.spec_hash}, {"cells", out}, {"scaling", sc}});
  } else {
    std::printf("experiment %s  spec_hash %s  runs %zu  failures %zu\n", manifest.spec.name.c_str(),
                manifest.spec_hash.c_str(), manifest.runs.size(), manifest.failures());
    std::printf("%-18s %4s %8s %5s %5s %5s %9s %9s %9s %7s %7s\n", "variant", "N", "beta", "ok", "fail", "cens",
                "[tau]", "med tau", "[u] end", "R end", "dup");
    for (const auto& c : cells)
      std::printf("%-18s %4zu %8s %5zu %5zu %5zu %9s %9s %9s %7s %7s%s\n", c.variant.name().c_str(), c.n,
                  nbocs::format_beta(c.beta_final).c_str(), c.runs_ok, c.runs_failed, c.censored,
                  fmt(c.mean_tau, "%.1f").c_str(), fmt(c.median_tau, "%.1f").c_str(), fmt(c.final_u).c_str(),
                  fmt(c.final_r, "%.3f").c_str(), fmt(c.duplicate_rate, "%.3f").c_str(),
                  c.extrema_verified ? "" : "  (extrema unverified)");
    for (const auto& s : manifest.scaling)
      std::printf("scaling %-18s beta %s: z = %.3f +- %.3f (censored %zu)\n", s.variant.name().c_str(),
                  nbocs::format_beta(s.beta_final).c_str(), s.z, s.z_stderr, s.censored);
  }
  return manifest.failures() == 0 ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with a normal-prior quadratic surrogate on SK spin glasses"};
  app.require_subcommand(1);

  auto* instance = app.add_subcommand("instance", "Generate or solve SK instances");
  instance->require_subcommand(1);

  InstanceGenArgs gen;
  auto* gen_cmd = instance->add_subcommand("gen", "Generate an instance file");
  gen_cmd->add_option("--n", gen.n, "Number of spins")->required();
  gen_cmd->add_option("--j-scale", gen.j_scale, "Coupling standard deviation J");
  gen_cmd->add_option("--seed", gen.seed, "Instance seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output JSON path (stdout if omitted)");
  gen_cmd->add_flag("--no-couplings", gen.no_couplings, "Omit couplings; readers regenerate them from the seed");
  gen_cmd->add_flag("--solve", gen.solve, "Also store exact extrema");

  InstanceSolveArgs solve;
  auto* solve_cmd = instance->add_subcommand("solve", "Compute exact extrema by enumeration and store them");
  solve_cmd->add_option("file", solve.file, "Instance JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", solve.out, "Write to this path instead of updating in place");
  solve_cmd->add_option("--cap", solve.cap, "Largest N solved by enumeration");
  solve_cmd->add_flag("--unsafe-large-n", solve.unsafe_large_n, "Use heuristic annealing above the cap");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one optimization and write its trace");
  run_cmd->add_option("--instance", run.instance, "Instance JSON (otherwise generated from --n/--instance-seed)");
  run_cmd->add_option("--n", run.n, "Number of spins when generating");
  run_cmd->add_option("--instance-seed", run.instance_seed, "Instance seed when generating");
  run_cmd->add_option("--j-scale", run.j_scale, "Coupling scale J when generating");
  run_cmd->add_option("--variant", run.variant, "ts | map | random-ts | random-map");
  run_cmd->add_option("--beta-final", run.beta_final, "Final inverse temperature in units of 1/J");
  run_cmd->add_option("--max-iters", run.max_iters, "Iterations");
  run_cmd->add_option("--tau-threshold", run.tau_threshold, "u threshold defining tau");
  run_cmd->add_flag("--early-stop", run.early_stop, "Stop once u <= tau threshold");
  run_cmd->add_option("--sa-return", run.sa_return, "best | final")->check(CLI::IsMember({"best", "final"}));
  run_cmd->add_option("--r-total", run.r_total, "Annealing sweeps per proposal");
  run_cmd->add_option("--seed,--master-seed", run.run_seed, "Run seed");
  run_cmd->add_option("--out", run.out, "Directory for the trace CSV");
  run_cmd->add_flag("--unsafe-large-n", run.unsafe_large_n, "Allow heuristic extrema above the cap");

  ExperimentArgs ex;
  auto* ex_cmd = app.add_subcommand("experiment", "Run a full experiment from a spec file");
  ex_cmd->add_option("spec", ex.spec_file, "Experiment spec (JSON)")->check(CLI::ExistingFile);
  ex_cmd->add_option("--n", ex.n, "Spin counts")->delimiter(',');
  ex_cmd->add_option("--beta-final", ex.beta_final, "beta_final values in units of 1/J")->delimiter(',');
  ex_cmd->add_option("--variants", ex.variants, "Variants")->delimiter(',');
  ex_cmd->add_option("--instances", ex.instances, "Disorder instances per N");
  ex_cmd->add_option("--seeds", ex.seeds, "Runs per instance");
  ex_cmd->add_option("--max-iters", ex.max_iters, "Iterations per run");
  ex_cmd->add_option("--tau-threshold", ex.tau_threshold, "u threshold defining tau");
  ex_cmd->add_option("--sa-return", ex.sa_return, "best | final");
  ex_cmd->add_option("--r-total", ex.r_total, "Annealing sweeps per proposal");
  ex_cmd->add_option("--out", ex.out, "Output directory");
  ex_cmd->add_option("--threads", ex.threads, "Worker threads");
  ex_cmd->add_option("--master-seed", ex.master_seed, "Master seed");
  ex_cmd->add_flag("--resume", ex.resume, "Skip runs already completed under the same spec hash");
  ex_cmd->add_flag("--fresh", ex.fresh, "Recompute every run");
  ex_cmd->add_flag("--early-stop", ex.early_stop, "Stop runs once u <= tau threshold");
  ex_cmd->add_flag("--unsafe-large-n", ex.unsafe_large_n, "Heuristic extrema above the enumeration cap");
  ex_cmd->add_flag("--quiet", ex.quiet, "Suppress progress records on stderr");

  FigureArgs fig;
  auto* fig_cmd = app.add_subcommand("figure", "Emit figure data from a manifest");
  fig_cmd->add_option("manifest", fig.manifest, "Experiment output directory or manifest.json")->required();
  fig_cmd->add_option("--figure", fig.figure, "f1 | f2 | f3 | f4")->required();
  fig_cmd->add_option("--out", fig.out, "Output directory (default <manifest dir>/figures)");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Summarize a manifest");
  rep_cmd->add_option("manifest", rep.manifest, "Experiment output directory or manifest.json")->required();
  rep_cmd->add_flag("--json", rep.json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_instance_gen(gen);
    if (*solve_cmd) return cmd_instance_solve(solve);
    if (*run_cmd) return cmd_run(run);
    if (*ex_cmd) return cmd_experiment(ex);
    if (*fig_cmd) return cmd_figure(fig);
    if (*rep_cmd) return cmd_report(rep);
  } catch (const nbocs::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nbocs::oracle_unavailable& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  return kExitOk;
}
