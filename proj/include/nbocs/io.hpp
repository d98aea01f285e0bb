#pragma once

// File formats: instance JSON, per-run trace CSV, aggregate CSV.

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbocs/metrics.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/sk_model.hpp"
#include "nbocs/trace.hpp"

namespace nbocs {

inline constexpr int kInstanceSchemaVersion = 1;

// %.17g: shortest fixed format that round-trips every double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_beta(double beta_final_times_j) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", beta_final_times_j);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

struct InstanceFile {
  SkInstance instance;
  std::optional<Extrema> extrema;
  bool couplings_stored = true;
};

// FNV-1a-64 over "n=..;j_scale=..;seed=..[;couplings=c1,c2,..][;h_min=..;h_max=..;method=..]"
// with every real printed as %.17g.
inline std::string instance_checksum(const SkInstance& inst, bool with_couplings,
                                     const std::optional<Extrema>& ext) {
  std::string canon = "n=" + std::to_string(inst.n) + ";j_scale=" + format_double(inst.j_scale) +
                      ";seed=" + std::to_string(inst.seed);
  if (with_couplings) {
    canon += ";couplings=";
    for (std::size_t k = 0; k < inst.couplings.size(); ++k) {
      if (k) canon += ',';
      canon += format_double(inst.couplings[k]);
    }
  }
  if (ext) {
    canon += ";h_min=" + format_double(ext->h_min) + ";h_max=" + format_double(ext->h_max) +
             ";method=" + to_string(ext->method);
  }
  return "fnv1a64:" + hex64(fnv1a64(canon));
}

inline nlohmann::json instance_to_json(const InstanceFile& f) {
  nlohmann::json j;
  j["schema_version"] = kInstanceSchemaVersion;
  j["n"] = f.instance.n;
  j["j_scale"] = f.instance.j_scale;
  j["seed"] = f.instance.seed;
  if (f.couplings_stored) j["couplings"] = f.instance.couplings;
  if (f.extrema) {
    nlohmann::json e;
    e["h_min"] = f.extrema->h_min;
    e["h_max"] = f.extrema->h_max;
    e["method"] = to_string(f.extrema->method);
    if (f.extrema->x_min.size() == f.instance.n) e["x_min"] = f.extrema->x_min.to_string();
    j["extrema"] = e;
  }
  j["checksum"] = instance_checksum(f.instance, f.couplings_stored, f.extrema);
  return j;
}

inline InstanceFile instance_from_json(const nlohmann::json& j) {
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw config_error(std::string("instance file: missing field '") + key + "'");
    return j.at(key);
  };
  try {
    const int version = require("schema_version").get<int>();
    if (version != kInstanceSchemaVersion)
      throw config_error("instance file: unsupported schema_version " + std::to_string(version));
    const auto n = require("n").get<std::size_t>();
    const auto j_scale = require("j_scale").get<double>();
    const auto seed = require("seed").get<std::uint64_t>();

    InstanceFile f;
    if (j.contains("couplings")) {
      f.instance = SkInstance{n, j_scale, seed, j.at("couplings").get<std::vector<double>>()};
      f.couplings_stored = true;
    } else {
      f.instance = generate_instance(n, j_scale, seed);
      f.couplings_stored = false;
    }
    validate_instance(f.instance);

    if (j.contains("extrema")) {
      const auto& e = j.at("extrema");
      Extrema ext;
      ext.h_min = e.at("h_min").get<double>();
      ext.h_max = e.at("h_max").get<double>();
      const std::string method = e.value("method", std::string("external"));
      if (method == "exhaustive") ext.method = ExtremaMethod::exhaustive;
      else if (method == "external") ext.method = ExtremaMethod::external;
      else throw config_error("instance file: extrema.method must be 'exhaustive' or 'external'");
      if (e.contains("x_min")) ext.x_min = Configuration::from_string(e.at("x_min").get<std::string>());
      if (!(ext.h_min <= ext.h_max)) throw config_error("instance file: extrema.h_min > extrema.h_max");
      f.extrema = ext;
    }

    if (j.contains("checksum")) {
      const std::string expected = instance_checksum(f.instance, f.couplings_stored, f.extrema);
      if (j.at("checksum").get<std::string>() != expected)
        throw config_error("instance file: checksum mismatch (file is corrupt or was edited)");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("instance file: ") + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_instance(const std::filesystem::path& path, const InstanceFile& f) {
  write_text_file(path, instance_to_json(f).dump(2) + "\n");
}

inline InstanceFile load_instance(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

// {variant}_{n}_{betafinal}_{instanceseed}_{runseed}.csv
inline std::string trace_file_name(const Variant& v, std::size_t n, double beta_final_times_j,
                                   std::uint64_t instance_seed, std::uint64_t run_seed) {
  return v.name() + "_" + std::to_string(n) + "_" + format_beta(beta_final_times_j) + "_" +
         std::to_string(instance_seed) + "_" + std::to_string(run_seed) + ".csv";
}

inline constexpr const char* kTraceHeader = "t,h_best,u,r_overlap,duplicate_event";

inline std::string trace_to_csv(const RunTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace.rows) {
    out += std::to_string(r.t) + ',' + format_double(r.h_best) + ',' + format_double(r.u) + ',' +
           format_double(r.r_overlap) + ',' + (r.duplicate_event ? '1' : '0') + '\n';
  }
  return out;
}

// tau is recovered from the u column with the given threshold.
inline RunTrace trace_from_csv(const std::string& text, double tau_threshold = 1e-3) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw config_error("trace CSV: bad or missing header");
  RunTrace trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TraceRow row;
    int dup = 0;
    unsigned long long t = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%d", &t, &row.h_best, &row.u, &row.r_overlap, &dup) != 5)
      throw config_error("trace CSV: malformed line " + std::to_string(line_no));
    row.t = static_cast<std::size_t>(t);
    row.duplicate_event = dup != 0;
    if (row.duplicate_event) ++trace.duplicate_events;
    if (!trace.tau && row.u <= tau_threshold) trace.tau = row.t;
    trace.rows.push_back(row);
  }
  if (trace.rows.empty()) throw config_error("trace CSV: no rows");
  return trace;
}

inline void save_trace(const std::filesystem::path& path, const RunTrace& trace) {
  write_text_file(path, trace_to_csv(trace));
}

inline RunTrace load_trace(const std::filesystem::path& path, double tau_threshold = 1e-3) {
  return trace_from_csv(read_text_file(path), tau_threshold);
}

inline std::string aggregate_to_csv(const AggregateCurve& c, const std::string& comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "t,mean,stderr\n";
  for (std::size_t k = 0; k < c.t.size(); ++k)
    out += std::to_string(c.t[k]) + ',' + format_double(c.mean[k]) + ',' + format_double(c.stderr_[k]) + '\n';
  return out;
}

inline nlohmann::json scaling_to_json(const ScalingFit& fit, const std::map<std::size_t, std::vector<double>>& taus) {
  nlohmann::json j;
  j["z"] = fit.z;
  j["z_stderr"] = fit.z_stderr;
  j["prefactor"] = fit.prefactor;
  nlohmann::json per_n = nlohmann::json::object();
  for (const auto& [n, samples] : taus) per_n[std::to_string(n)] = samples;
  j["per_N"] = per_n;
  j["mean_tau"] = fit.mean_tau;
  j["median_tau"] = fit.median_tau;
  j["n_values"] = fit.n_values;
  return j;
}

}  // namespace nbocs
