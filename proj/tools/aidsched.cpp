// aidsched: benchmark harness for the asymmetry-aware loop schedulers.
//
//   aidsched run        one experiment (simulator or real threads)
//   aidsched sweep      run the experiment across a parameter range
//   aidsched sf-profile per-loop speedup-factor table
//   aidsched compare    several schedules on an identical workload
//
// Reports embed the full effective configuration (defaults, then AIDSCHED_*
// environment variables, then flags) so runs can be audited and replayed.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <aidsched/aidsched.hpp>

namespace {

using namespace aidsched;

struct ExperimentArgs {
  std::string mode = "sim";
  std::string schedule_spec;

  std::string topology_file;
  int big = 0;
  int small = 0;
  double ratio = 4.0;
  std::vector<int> big_cores;
  std::vector<int> small_cores;

  std::string workload_file;
  std::string shape = "uniform";
  std::int64_t ni = 100000;
  std::int64_t cost = 1000;
  double slope = 1.0;
  double spread = 0.5;
  std::uint64_t wseed = 1;
  std::string phases;

  std::int64_t overhead = 0;
  std::string binding;
  bool emulate = false;
  std::int64_t major_chunk = -1;
  double hybrid_pct = -1.0;

  int repeats = 1;
  bool discard_first = false;

  std::string out;
  std::string format;
};

void add_experiment_flags(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("--mode", a.mode, "Execution mode: sim or real")
      ->check(CLI::IsMember({"sim", "real"}));
  cmd->add_option("--schedule", a.schedule_spec,
                  "Schedule spec 'kind[(binding)][,chunk]' "
                  "(kinds: " +
                      std::string(kScheduleKindNames) + ")");
  cmd->add_option("--topology", a.topology_file, "Topology file (aidsched-topology-v1)");
  cmd->add_option("--big", a.big, "Big-core thread count (inline topology)");
  cmd->add_option("--small", a.small, "Small-core thread count (inline topology)");
  cmd->add_option("--ratio", a.ratio, "Big-to-small speed ratio (inline topology)");
  cmd->add_option("--big-cores", a.big_cores, "Core ids for the big type")->delimiter(',');
  cmd->add_option("--small-cores", a.small_cores, "Core ids for the small type")
      ->delimiter(',');
  cmd->add_option("--workload", a.workload_file, "Workload file (aidsched-workload-v1)");
  cmd->add_option("--shape", a.shape,
                  "Workload shape: uniform, linear_increasing, linear_decreasing, "
                  "random_uniform, phased");
  cmd->add_option("--ni", a.ni, "Iteration count");
  cmd->add_option("--cost", a.cost, "Base per-iteration cost on the slow core (ns)");
  cmd->add_option("--slope", a.slope, "Relative rise for the linear shapes");
  cmd->add_option("--spread", a.spread, "Relative spread for random_uniform, in [0,1)");
  cmd->add_option("--workload-seed", a.wseed, "Seed for random workload shapes");
  cmd->add_option("--phases", a.phases, "Phased shape segments 'start:mult,...'");
  cmd->add_option("--overhead", a.overhead, "Simulated per-assignment overhead (ns)");
  cmd->add_option("--binding", a.binding, "Thread binding: BS, SB or none");
  cmd->add_flag("--emulate", a.emulate,
                "Real mode: emulate the topology's speed ratios in software");
  cmd->add_option("--major-chunk", a.major_chunk, "AID-dynamic major chunk M");
  cmd->add_option("--hybrid-pct", a.hybrid_pct, "AID-hybrid planned fraction, in (0,1]");
  cmd->add_option("--repeats", a.repeats, "Runs per configuration")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--discard-first", a.discard_first,
                "Drop the first run from the aggregates");
  cmd->add_option("--out", a.out, "Write the report to this path instead of stdout");
  cmd->add_option("--format", a.format, "Output format: json, csv or table")
      ->check(CLI::IsMember({"json", "csv", "table"}));
}

struct Resolved {
  WorkloadSpec workload;
  CoreTopology topology;
  ScheduleConfig schedule;
  BindingPolicy binding = BindingPolicy::BS;
  bool sim = true;
  std::int64_t overhead = 0;
  bool emulate = false;
  int repeats = 1;
  bool discard_first = false;
  std::vector<std::string> env_echo;
};

std::vector<std::string> echo_env() {
  std::vector<std::string> out;
  for (const char* name :
       {"AIDSCHED_SCHEDULE", "AIDSCHED_CHUNK", "AIDSCHED_MAJOR_CHUNK",
        "AIDSCHED_HYBRID_PCT", "AIDSCHED_AFFINITY", "AIDSCHED_TOPOLOGY"}) {
    if (const char* v = std::getenv(name); v && *v) {
      out.push_back(std::string(name) + "=" + v);
    }
  }
  return out;
}

Resolved resolve(const ExperimentArgs& a) {
  Resolved r;
  r.sim = a.mode == "sim";
  r.overhead = a.overhead;
  r.emulate = a.emulate;
  r.repeats = a.repeats;
  r.discard_first = a.discard_first;
  r.env_echo = echo_env();

  // Workload: file wins over inline flags.
  if (!a.workload_file.empty()) {
    r.workload = load_workload(a.workload_file);
  } else {
    r.workload.shape = parse_workload_shape(a.shape);
    r.workload.ni = a.ni;
    r.workload.base_cost_ns = a.cost;
    r.workload.slope = a.slope;
    r.workload.spread = a.spread;
    r.workload.seed = a.wseed;
    if (!a.phases.empty()) {
      std::stringstream ss(a.phases);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos) {
          throw std::invalid_argument("--phases segment '" + tok +
                                      "' needs start:multiplier");
        }
        r.workload.phases.push_back(
            {std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
      }
    }
    r.workload.validate();
  }

  // Topology: file, else inline big/small flags, else a stock 4B+4S machine.
  const auto env = load_config_from_env();
  if (!a.topology_file.empty()) {
    r.topology = load_topology(a.topology_file);
  } else if (env.topology_path) {
    r.topology = load_topology(*env.topology_path);
  } else if (a.big > 0) {
    r.topology = CoreTopology::big_little(a.big, a.small > 0 ? a.small : a.big,
                                          a.ratio, a.big_cores, a.small_cores);
  } else if (a.small > 0) {
    r.topology = CoreTopology::symmetric(a.small);
  } else {
    r.topology = CoreTopology::big_little(4, 4, a.ratio);
  }

  // Schedule: defaults, then environment, then flags.
  std::optional<BindingPolicy> annotated;
  if (env.kind) r.schedule.kind = *env.kind;
  if (env.chunk) r.schedule.chunk = *env.chunk;
  if (env.major_chunk) r.schedule.major_chunk = *env.major_chunk;
  if (env.hybrid_pct) r.schedule.hybrid_fraction = *env.hybrid_pct;
  if (!a.schedule_spec.empty()) {
    const auto parsed = parse_schedule_spec(a.schedule_spec);
    r.schedule.kind = parsed.config.kind;
    r.schedule.chunk = parsed.config.chunk;
    annotated = parsed.binding;
  }
  if (a.major_chunk > 0) r.schedule.major_chunk = a.major_chunk;
  if (a.hybrid_pct > 0) r.schedule.hybrid_fraction = a.hybrid_pct;
  r.schedule.validate();

  // Binding precedence: --binding flag, spec annotation, environment, default.
  if (!a.binding.empty()) {
    r.binding = parse_binding(a.binding);
  } else if (annotated) {
    r.binding = *annotated;
  } else if (env.binding) {
    r.binding = *env.binding;
  } else if (r.sim) {
    r.binding = BindingPolicy::BS;
  } else {
    // Real mode: pin when the topology names cores, otherwise run unpinned.
    bool has_ids = true;
    for (int j = 0; j < r.topology.type_count(); ++j) {
      if (r.topology.type(j).core_ids.empty()) has_ids = false;
    }
    r.binding = has_ids ? BindingPolicy::BS : BindingPolicy::None;
  }
  return r;
}

RuntimeConfig runtime_config(const Resolved& r, const ScheduleConfig& sched,
                             BindingPolicy binding) {
  RuntimeConfig cfg;
  cfg.schedule = sched;
  cfg.topology = r.topology;
  cfg.binding = binding;
  if (r.emulate) {
    cfg.emulation_multipliers = RuntimeConfig::emulation_from_topology(r.topology);
  }
  return cfg;
}

std::vector<RunStats> run_one(const Resolved& r, const ScheduleConfig& sched,
                              BindingPolicy binding) {
  std::vector<RunStats> runs;
  if (r.sim) {
    SimOptions opts;
    opts.binding = binding;
    opts.record_trace = false;
    for (int i = 0; i < r.repeats; ++i) {
      runs.push_back(run_stats_from(simulate(r.workload.space(), sched, r.topology,
                                             r.workload.cost_model(r.overhead), opts)));
    }
  } else {
    ParallelRuntime rt(runtime_config(r, sched, binding));
    for (int i = 0; i < r.repeats; ++i) {
      runs.push_back(
          run_stats_from(rt.parallel_for(r.workload.space(), r.workload.body())));
    }
  }
  if (r.discard_first && runs.size() > 1) runs.erase(runs.begin());
  return runs;
}

ConfigEcho make_echo(const Resolved& r, const ScheduleConfig& sched,
                     BindingPolicy binding) {
  ConfigEcho echo;
  echo.mode = r.sim ? "sim" : "real";
  echo.schedule = sched;
  echo.binding = binding;
  echo.topology = r.topology.describe();
  for (int j = 0; j < r.topology.type_count(); ++j) {
    echo.type_ratios.push_back(r.topology.type(j).speed_ratio);
  }
  echo.workload = r.workload;
  echo.overhead_ns = r.overhead;
  echo.emulation = r.emulate;
  echo.repeats = r.repeats;
  echo.discard_first = r.discard_first;
  echo.env_overrides = r.env_echo;
  return echo;
}

void emit(const ExperimentReport& rep, const std::string& format,
          const std::string& default_format, const std::string& out) {
  const std::string fmt = format.empty() ? default_format : format;
  std::string text;
  if (fmt == "json") {
    text = to_json(rep).dump(2) + "\n";
  } else if (fmt == "csv") {
    text = to_csv(rep);
  } else {
    text = to_table(rep);
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write to '" + out + "'");
    f << text;
  }
}

int cmd_run(const ExperimentArgs& a) {
  const Resolved r = resolve(a);
  ExperimentReport rep;
  rep.command = "run";
  rep.seed = r.workload.seed;
  rep.config = make_echo(r, r.schedule, r.binding);

  ExperimentEntry entry;
  entry.label = r.schedule.to_spec_string() + "(" + to_string(r.binding) + ")";
  entry.runs = run_one(r, r.schedule, r.binding);
  entry.aggregates = aggregate_makespans(entry.runs);
  entry.normalized = 1.0;
  rep.entries.push_back(std::move(entry));
  emit(rep, a.format, "json", a.out);
  return 0;
}

int cmd_compare(const ExperimentArgs& a, const std::vector<std::string>& schedules,
                std::string baseline) {
  if (schedules.empty()) {
    throw std::invalid_argument("compare: at least one --schedules entry required");
  }
  const Resolved base = resolve(a);
  if (baseline.empty()) baseline = schedules.front();

  ExperimentReport rep;
  rep.command = "compare";
  rep.seed = base.workload.seed;
  rep.baseline = baseline;

  double baseline_gmean = 0.0;
  for (const auto& spec : schedules) {
    const auto parsed = parse_schedule_spec(spec);
    ScheduleConfig sched = parsed.config;
    if (a.major_chunk > 0) sched.major_chunk = a.major_chunk;
    if (a.hybrid_pct > 0) sched.hybrid_fraction = a.hybrid_pct;
    sched.validate();
    const BindingPolicy binding = parsed.binding.value_or(base.binding);
    ExperimentEntry entry;
    entry.label = spec;
    entry.runs = run_one(base, sched, binding);
    entry.aggregates = aggregate_makespans(entry.runs);
    rep.entries.push_back(std::move(entry));
    if (spec == baseline) baseline_gmean = rep.entries.back().aggregates.gmean_ns;
  }
  if (baseline_gmean == 0.0) {
    throw std::invalid_argument("compare: baseline '" + baseline +
                                "' is not in the schedule list");
  }
  for (auto& e : rep.entries) {
    e.normalized =
        e.aggregates.gmean_ns > 0 ? baseline_gmean / e.aggregates.gmean_ns : 1.0;
  }
  rep.config = make_echo(base, base.schedule, base.binding);
  emit(rep, a.format, "table", a.out);
  return 0;
}

int cmd_sweep(const ExperimentArgs& a, const std::string& parameter,
              const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("sweep: --values must not be empty");
  }
  static const std::vector<std::string> kParams = {"chunk", "major_chunk", "hybrid_pct",
                                                   "speed_ratio", "overhead"};
  if (std::find(kParams.begin(), kParams.end(), parameter) == kParams.end()) {
    throw std::invalid_argument(
        "sweep: unknown parameter '" + parameter +
        "' (expected chunk, major_chunk, hybrid_pct, speed_ratio or overhead)");
  }

  ExperimentReport rep;
  rep.command = "sweep";

  double best_gmean = 0.0;
  std::string best_label;
  for (double v : values) {
    ExperimentArgs varied = a;
    if (parameter == "speed_ratio") varied.ratio = v;
    Resolved r = resolve(varied);
    ScheduleConfig sched = r.schedule;
    if (parameter == "chunk") sched.chunk = static_cast<std::int64_t>(v);
    if (parameter == "major_chunk") sched.major_chunk = static_cast<std::int64_t>(v);
    if (parameter == "hybrid_pct") sched.hybrid_fraction = v;
    if (parameter == "overhead") r.overhead = static_cast<std::int64_t>(v);
    sched.validate();

    ExperimentEntry entry;
    std::ostringstream label;
    label << parameter << "=" << v;
    entry.label = label.str();
    entry.runs = run_one(r, sched, r.binding);
    entry.aggregates = aggregate_makespans(entry.runs);
    rep.entries.push_back(entry);
    if (best_label.empty() || entry.aggregates.gmean_ns < best_gmean) {
      best_gmean = entry.aggregates.gmean_ns;
      best_label = entry.label;
    }
    if (rep.entries.size() == 1) {
      rep.seed = r.workload.seed;
      rep.config = make_echo(r, sched, r.binding);
    }
  }
  rep.baseline = rep.entries.front().label;
  const double base_gmean = rep.entries.front().aggregates.gmean_ns;
  for (auto& e : rep.entries) {
    e.normalized = e.aggregates.gmean_ns > 0 ? base_gmean / e.aggregates.gmean_ns : 1.0;
  }
  // Flag the best value for the sweep consumer.
  ExperimentEntry best;
  best.label = "best:" + best_label;
  best.aggregates.gmean_ns = best_gmean;
  best.aggregates.runs = 0;
  best.normalized = base_gmean > 0 && best_gmean > 0 ? base_gmean / best_gmean : 1.0;
  rep.entries.push_back(best);
  emit(rep, a.format, "table", a.out);
  return 0;
}

// Times one full pass of the workload on the calling thread, pinned to the
// given core for the duration.
std::int64_t timed_pass_on_core(const WorkloadSpec& w, int core_id) {
#if defined(__linux__)
  cpu_set_t old_set;
  const bool restore =
      pthread_getaffinity_np(pthread_self(), sizeof(old_set), &old_set) == 0;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core_id, &set);
  if (pthread_setaffinity_np(pthread_self(), sizeof(set), &set) != 0) {
    throw std::runtime_error("sf-profile: cannot pin to core " +
                             std::to_string(core_id));
  }
  const auto body = w.body();
  const std::int64_t t0 = steady_now_ns();
  for (std::int64_t idx = 0; idx < w.ni; ++idx) body(idx, 1.0);
  const std::int64_t elapsed = steady_now_ns() - t0;
  if (restore) pthread_setaffinity_np(pthread_self(), sizeof(old_set), &old_set);
  return elapsed;
#else
  (void)w;
  (void)core_id;
  throw std::runtime_error("sf-profile: pinned runs need Linux affinity support");
#endif
}

// Per-loop SF: simulated single-thread ratio; in real mode, paired
// single-thread timed runs either pinned to a big and a small core (when the
// topology names core ids) or under software emulation.
int cmd_sf_profile(const ExperimentArgs& a, int loops,
                   const std::vector<std::string>& workload_files) {
  const Resolved base = resolve(a);
  if (base.topology.type_count() < 2) {
    throw std::invalid_argument("sf-profile: the topology needs at least two core types");
  }
  const bool pinnable = !base.topology.type(0).core_ids.empty() &&
                        !base.topology.type(base.topology.type_count() - 1)
                             .core_ids.empty();

  std::vector<WorkloadSpec> specs;
  if (!workload_files.empty()) {
    for (const auto& f : workload_files) specs.push_back(load_workload(f));
  } else {
    for (int i = 0; i < std::max(1, loops); ++i) {
      WorkloadSpec w = base.workload;
      w.seed = base.workload.seed + static_cast<std::uint64_t>(i);
      specs.push_back(w);
    }
  }

  nlohmann::json out;
  out["schema_version"] = kReportSchemaVersion;
  out["command"] = "sf-profile";
  out["mode"] = base.sim ? "sim" : "real";
  out["topology"] = base.topology.describe();
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << "loop,shape,seed,sf\n";

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& w = specs[i];
    double sf = 1.0;
    if (base.sim) {
      sf = offline_sf(w.space(), w.cost_model(), base.topology).back();
    } else if (base.emulate) {
      const double mult = RuntimeConfig::emulation_from_topology(base.topology).front();
      const auto body = w.body();
      const std::int64_t t0 = steady_now_ns();
      for (std::int64_t idx = 0; idx < w.ni; ++idx) body(idx, 1.0);
      const std::int64_t fast_ns = steady_now_ns() - t0;
      const std::int64_t t1 = steady_now_ns();
      for (std::int64_t idx = 0; idx < w.ni; ++idx) body(idx, mult);
      const std::int64_t slow_ns = steady_now_ns() - t1;
      sf = fast_ns > 0 ? static_cast<double>(slow_ns) / static_cast<double>(fast_ns)
                       : 1.0;
    } else if (pinnable) {
      const int big_core =
          base.topology.type(base.topology.type_count() - 1).core_ids.front();
      const int small_core = base.topology.type(0).core_ids.front();
      const std::int64_t big_ns = timed_pass_on_core(w, big_core);
      const std::int64_t small_ns = timed_pass_on_core(w, small_core);
      sf = big_ns > 0 ? static_cast<double>(small_ns) / static_cast<double>(big_ns)
                      : 1.0;
    } else {
      throw std::invalid_argument(
          "sf-profile: real mode needs --emulate, or a topology with core ids "
          "for pinned big/small runs");
    }
    rows.push_back(
        {{"loop", i}, {"shape", to_string(w.shape)}, {"seed", w.seed}, {"sf", sf}});
    csv << i << ',' << to_string(w.shape) << ',' << w.seed << ',' << format_double(sf)
        << '\n';
  }
  out["loops"] = rows;

  const std::string fmt = a.format.empty() ? "table" : a.format;
  std::string text;
  if (fmt == "json") {
    text = out.dump(2) + "\n";
  } else if (fmt == "csv") {
    text = csv.str();
  } else {
    std::ostringstream t;
    t << "loop  shape               seed        sf\n";
    for (const auto& row : rows) {
      t << std::left << std::setw(6) << row["loop"].get<int>() << std::setw(20)
        << row["shape"].get<std::string>() << std::setw(12)
        << row["seed"].get<std::uint64_t>() << std::setprecision(6)
        << row["sf"].get<double>() << "\n";
    }
    text = t.str();
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write to '" + a.out + "'");
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aidsched: asymmetry-aware loop scheduling workbench"};
  app.require_subcommand(1);

  ExperimentArgs run_args;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_experiment_flags(run, run_args);

  ExperimentArgs sweep_args;
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter across values");
  add_experiment_flags(sweep, sweep_args);
  sweep->add_option("--parameter", sweep_parameter,
                    "chunk, major_chunk, hybrid_pct, speed_ratio or overhead")
      ->required();
  sweep->add_option("--values", sweep_values, "Comma-separated parameter values")
      ->delimiter(',');

  ExperimentArgs sf_args;
  int sf_loops = 1;
  std::vector<std::string> sf_workloads;
  auto* sfp = app.add_subcommand("sf-profile", "Per-loop speedup factor table");
  add_experiment_flags(sfp, sf_args);
  sfp->add_option("--loops", sf_loops,
                  "Number of seeded workload variants to treat as loops");
  sfp->add_option("--workloads", sf_workloads, "Explicit workload files, one per loop");

  ExperimentArgs cmp_args;
  std::vector<std::string> cmp_schedules;
  std::string cmp_baseline;
  auto* cmp = app.add_subcommand("compare", "Compare schedules on one workload");
  add_experiment_flags(cmp, cmp_args);
  cmp->add_option("--schedules", cmp_schedules,
                  "Schedule specs, e.g. static(SB) static(BS) dynamic,1 aid_static")
      ->required()
      ->expected(-1);
  cmp->add_option("--baseline", cmp_baseline,
                  "Entry to normalize against (default: the first)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_parameter, sweep_values);
    if (sfp->parsed()) return cmd_sf_profile(sf_args, sf_loops, sf_workloads);
    if (cmp->parsed()) return cmd_compare(cmp_args, cmp_schedules, cmp_baseline);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
