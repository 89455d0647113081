#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "runtime.hpp"
#include "simulator.hpp"
#include "workload.hpp"

namespace aidsched {

inline constexpr int kReportSchemaVersion = 1;

/// One completed run (real loop or simulation), reduced to the numbers the
/// harness reports on.
struct RunStats {
  std::int64_t makespan_ns = 0;  // wall time (real) or virtual makespan (sim)
  double estimated_sf = 1.0;
  double imbalance = 1.0;
  std::int64_t iterations = 0;
  std::int64_t assignment_calls = 0;
  std::vector<std::int64_t> per_thread_iterations;
};

inline RunStats run_stats_from(const LoopReport& r) {
  RunStats s;
  s.makespan_ns = r.wall_ns;
  s.estimated_sf = r.estimated_sf;
  s.imbalance = r.imbalance();
  s.iterations = r.total_iterations();
  for (const auto& t : r.threads) {
    s.per_thread_iterations.push_back(t.iterations);
    s.assignment_calls += t.take_calls;
  }
  return s;
}

inline RunStats run_stats_from(const SimResult& r) {
  RunStats s;
  s.makespan_ns = r.makespan_ns;
  s.estimated_sf = r.estimated_sf;
  s.iterations = r.total_iterations();
  std::int64_t max_finish = 0;
  double busy_sum = 0.0;
  for (const auto& t : r.threads) {
    s.per_thread_iterations.push_back(t.iterations);
    s.assignment_calls += t.assignment_calls;
    max_finish = std::max(max_finish, t.finish_ns);
    busy_sum += static_cast<double>(t.busy_ns);
  }
  const double mean_busy = r.threads.empty() ? 0.0 : busy_sum / r.threads.size();
  s.imbalance = mean_busy > 0.0 ? static_cast<double>(max_finish) / mean_busy : 1.0;
  return s;
}

struct Aggregates {
  double mean_ns = 0.0;
  double gmean_ns = 0.0;
  std::int64_t min_ns = 0;
  std::int64_t max_ns = 0;
  int runs = 0;
};

inline Aggregates aggregate_makespans(const std::vector<RunStats>& runs) {
  Aggregates a;
  a.runs = static_cast<int>(runs.size());
  if (runs.empty()) return a;
  double sum = 0.0;
  double log_sum = 0.0;
  a.min_ns = runs.front().makespan_ns;
  a.max_ns = runs.front().makespan_ns;
  for (const auto& r : runs) {
    sum += static_cast<double>(r.makespan_ns);
    log_sum += std::log(std::max<double>(1.0, static_cast<double>(r.makespan_ns)));
    a.min_ns = std::min(a.min_ns, r.makespan_ns);
    a.max_ns = std::max(a.max_ns, r.makespan_ns);
  }
  a.mean_ns = sum / a.runs;
  a.gmean_ns = std::exp(log_sum / a.runs);
  return a;
}

/// Full effective configuration echoed into every report, after env-var
/// resolution, so runs can be audited and replayed.
struct ConfigEcho {
  std::string mode;  // "sim" or "real"
  ScheduleConfig schedule;
  BindingPolicy binding = BindingPolicy::BS;
  std::string topology;
  std::vector<double> type_ratios;
  WorkloadSpec workload;
  std::int64_t overhead_ns = 0;
  bool emulation = false;
  int repeats = 1;
  bool discard_first = false;
  std::vector<std::string> env_overrides;
};

struct ExperimentEntry {
  std::string label;  // schedule spec or sweep parameter value
  std::vector<RunStats> runs;
  Aggregates aggregates;
  double normalized = 1.0;  // baseline gmean / this gmean (higher is better)
};

struct ExperimentReport {
  int schema_version = kReportSchemaVersion;
  std::string command;
  ConfigEcho config;
  std::string baseline;  // label normalization refers to; empty if n/a
  std::string prng = "splitmix64";
  std::uint64_t seed = 0;
  std::vector<ExperimentEntry> entries;
};

// --- serialization -----------------------------------------------------------

// Doubles are emitted with max_digits10 precision in every format so the
// JSON and CSV views of one experiment carry identical values.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json to_json(const WorkloadSpec& w) {
  nlohmann::json j{{"shape", to_string(w.shape)},
                   {"ni", w.ni},
                   {"base_cost_ns", w.base_cost_ns},
                   {"seed", w.seed}};
  if (w.shape == WorkloadShape::LinearIncreasing ||
      w.shape == WorkloadShape::LinearDecreasing) {
    j["slope"] = w.slope;
  }
  if (w.shape == WorkloadShape::RandomUniform) j["spread"] = w.spread;
  if (w.shape == WorkloadShape::Phased) {
    nlohmann::json ph = nlohmann::json::array();
    for (const auto& p : w.phases) {
      ph.push_back({{"start_fraction", p.start_fraction},
                    {"cost_multiplier", p.cost_multiplier}});
    }
    j["phases"] = ph;
  }
  return j;
}

inline nlohmann::json to_json(const RunStats& r) {
  return nlohmann::json{{"makespan_ns", r.makespan_ns},
                        {"estimated_sf", r.estimated_sf},
                        {"imbalance", r.imbalance},
                        {"iterations", r.iterations},
                        {"assignment_calls", r.assignment_calls},
                        {"per_thread_iterations", r.per_thread_iterations}};
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
  nlohmann::json j;
  j["schema_version"] = rep.schema_version;
  j["command"] = rep.command;
  j["prng"] = rep.prng;
  j["seed"] = rep.seed;
  if (!rep.baseline.empty()) j["baseline"] = rep.baseline;
  j["config"] = {{"mode", rep.config.mode},
                 {"schedule", rep.config.schedule.to_spec_string()},
                 {"binding", to_string(rep.config.binding)},
                 {"topology", rep.config.topology},
                 {"type_ratios", rep.config.type_ratios},
                 {"workload", to_json(rep.config.workload)},
                 {"overhead_ns", rep.config.overhead_ns},
                 {"emulation", rep.config.emulation},
                 {"repeats", rep.config.repeats},
                 {"discard_first", rep.config.discard_first},
                 {"env_overrides", rep.config.env_overrides}};
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : rep.entries) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : e.runs) runs.push_back(to_json(r));
    entries.push_back({{"label", e.label},
                       {"runs", runs},
                       {"mean_ns", e.aggregates.mean_ns},
                       {"gmean_ns", e.aggregates.gmean_ns},
                       {"min_ns", e.aggregates.min_ns},
                       {"max_ns", e.aggregates.max_ns},
                       {"normalized", e.normalized}});
  }
  j["entries"] = entries;
  return j;
}

inline std::string to_csv(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "label,runs,mean_ns,gmean_ns,min_ns,max_ns,normalized\n";
  for (const auto& e : rep.entries) {
    os << e.label << ',' << e.aggregates.runs << ','
       << format_double(e.aggregates.mean_ns) << ','
       << format_double(e.aggregates.gmean_ns) << ',' << e.aggregates.min_ns << ','
       << e.aggregates.max_ns << ',' << format_double(e.normalized) << '\n';
  }
  return os.str();
}

inline std::string to_table(const ExperimentReport& rep) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "label" << std::right << std::setw(6) << "runs"
     << std::setw(16) << "gmean_ms" << std::setw(16) << "mean_ms" << std::setw(12)
     << "normalized" << "\n";
  for (const auto& e : rep.entries) {
    os << std::left << std::setw(28) << e.label << std::right << std::setw(6)
       << e.aggregates.runs << std::setw(16) << std::fixed << std::setprecision(3)
       << e.aggregates.gmean_ns / 1e6 << std::setw(16) << e.aggregates.mean_ns / 1e6
       << std::setw(12) << std::setprecision(4) << e.normalized << "\n";
    os.unsetf(std::ios::fixed);
  }
  if (!rep.baseline.empty()) {
    os << "baseline: " << rep.baseline << " (normalized = baseline gmean / entry gmean)\n";
  }
  return os.str();
}

}  // namespace aidsched
