#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nbocs/configuration.hpp"

namespace nbocs {

enum class Acquisition { ts, map };

// One of the four algorithm variants: acquisition rule x random postprocessing.
struct Variant {
  Acquisition acquisition = Acquisition::map;
  bool postprocess = true;

  // nbocs-ts, nbocs-random-ts, nbocs-map, nbocs-random-map
  std::string name() const {
    return std::string("nbocs-") + (postprocess ? "random-" : "") + (acquisition == Acquisition::ts ? "ts" : "map");
  }

  friend bool operator==(const Variant&, const Variant&) = default;
  friend auto operator<=>(const Variant&, const Variant&) = default;
};

// Accepts the canonical names above as well as the short forms
// ts, map, random-ts, random-map (and plain-ts / plain-map).
inline Variant parse_variant(std::string s) {
  if (s.rfind("nbocs-", 0) == 0) s = s.substr(6);
  if (s == "ts" || s == "plain-ts") return {Acquisition::ts, false};
  if (s == "map" || s == "plain-map") return {Acquisition::map, false};
  if (s == "random-ts") return {Acquisition::ts, true};
  if (s == "random-map") return {Acquisition::map, true};
  throw config_error("unknown variant '" + s + "' (expected ts, map, random-ts or random-map)");
}

inline std::vector<Variant> all_variants() {
  return {{Acquisition::ts, false}, {Acquisition::ts, true}, {Acquisition::map, false}, {Acquisition::map, true}};
}

struct TraceRow {
  std::size_t t = 0;
  double h_best = 0.0;
  double u = 0.0;
  double r_overlap = 0.0;
  bool duplicate_event = false;
};

enum class RunStatus { completed, early_stopped, space_exhausted };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::early_stopped: return "early_stopped";
    case RunStatus::space_exhausted: return "space_exhausted";
  }
  return "unknown";
}

struct RunTrace {
  std::vector<TraceRow> rows;
  std::optional<std::size_t> tau;  // first t with u(t) <= threshold
  // Annealer proposals that were already in the dataset. With postprocessing
  // on, each one triggered a random replacement; otherwise it was appended.
  std::size_t duplicate_events = 0;
  RunStatus status = RunStatus::completed;
  bool extrema_verified = true;

  std::size_t iterations() const noexcept { return rows.empty() ? 0 : rows.back().t; }

  std::vector<double> u_series() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.u);
    return v;
  }

  std::vector<double> r_series() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.r_overlap);
    return v;
  }
};

}  // namespace nbocs
