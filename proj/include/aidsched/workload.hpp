#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "simulator.hpp"
#include "timing.hpp"

namespace aidsched {

enum class WorkloadShape {
  Uniform,
  LinearIncreasing,
  LinearDecreasing,
  RandomUniform,
  Phased,
};

inline const char* to_string(WorkloadShape s) {
  switch (s) {
    case WorkloadShape::Uniform: return "uniform";
    case WorkloadShape::LinearIncreasing: return "linear_increasing";
    case WorkloadShape::LinearDecreasing: return "linear_decreasing";
    case WorkloadShape::RandomUniform: return "random_uniform";
    case WorkloadShape::Phased: return "phased";
  }
  return "?";
}

inline WorkloadShape parse_workload_shape(const std::string& s) {
  if (s == "uniform") return WorkloadShape::Uniform;
  if (s == "linear_increasing") return WorkloadShape::LinearIncreasing;
  if (s == "linear_decreasing") return WorkloadShape::LinearDecreasing;
  if (s == "random_uniform") return WorkloadShape::RandomUniform;
  if (s == "phased") return WorkloadShape::Phased;
  throw std::invalid_argument(
      "unknown workload shape '" + s +
      "' (expected uniform, linear_increasing, linear_decreasing, "
      "random_uniform or phased)");
}

// Per-index hash for random costs; any well-mixed 64-bit permutation works
// since only seed reproducibility is promised (the seed is recorded in every
// report).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// A phased workload segment: from `start_fraction` of the loop onward,
/// iterations cost base * cost_multiplier.
struct PhaseSegment {
  double start_fraction = 0.0;
  double cost_multiplier = 1.0;
};

/// Synthetic loop description: iteration count, nominal per-iteration cost
/// on the reference core, and a cost shape over the index space.
struct WorkloadSpec {
  WorkloadShape shape = WorkloadShape::Uniform;
  std::int64_t ni = 0;
  std::int64_t base_cost_ns = 1000;
  double slope = 1.0;    // linear shapes: relative rise across the loop
  double spread = 0.5;   // random_uniform: costs in base * [1-spread, 1+spread]
  std::uint64_t seed = 1;
  std::vector<PhaseSegment> phases;

  void validate() const {
    if (ni < 0) throw std::invalid_argument("workload: ni must be >= 0");
    if (base_cost_ns < 1) throw std::invalid_argument("workload: base cost must be >= 1ns");
    if (slope <= -1.0) throw std::invalid_argument("workload: slope must be > -1");
    if (!(spread >= 0.0 && spread < 1.0)) {
      throw std::invalid_argument("workload: spread must be in [0, 1)");
    }
    if (shape == WorkloadShape::Phased) {
      if (phases.empty() || phases.front().start_fraction != 0.0) {
        throw std::invalid_argument("workload: phased shape needs segments starting at 0");
      }
      for (std::size_t i = 0; i < phases.size(); ++i) {
        if (phases[i].cost_multiplier <= 0.0) {
          throw std::invalid_argument("workload: phase multipliers must be positive");
        }
        if (i > 0 && phases[i].start_fraction <= phases[i - 1].start_fraction) {
          throw std::invalid_argument("workload: phase boundaries must increase");
        }
        if (phases[i].start_fraction < 0.0 || phases[i].start_fraction >= 1.0) {
          throw std::invalid_argument("workload: phase boundaries must be in [0, 1)");
        }
      }
    }
  }

  /// Cost of iteration i in nanoseconds on the reference core; always >= 1.
  [[nodiscard]] std::int64_t cost_at(std::int64_t i) const {
    double c = static_cast<double>(base_cost_ns);
    const double f =
        ni > 1 ? static_cast<double>(i) / static_cast<double>(ni - 1) : 0.0;
    switch (shape) {
      case WorkloadShape::Uniform:
        break;
      case WorkloadShape::LinearIncreasing:
        c *= 1.0 + slope * f;
        break;
      case WorkloadShape::LinearDecreasing:
        c *= 1.0 + slope * (1.0 - f);
        break;
      case WorkloadShape::RandomUniform: {
        // Random access into the canonical splitmix64 stream for this seed.
        const std::uint64_t word =
            splitmix64(seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL);
        const double u = static_cast<double>(word) /
                         static_cast<double>(std::numeric_limits<std::uint64_t>::max());
        c *= 1.0 - spread + 2.0 * spread * u;
        break;
      }
      case WorkloadShape::Phased: {
        double mult = 1.0;
        for (const auto& p : phases) {
          if (f >= p.start_fraction) mult = p.cost_multiplier;
        }
        c *= mult;
        break;
      }
    }
    return std::max<std::int64_t>(1, std::llround(c));
  }

  [[nodiscard]] IterationSpace space() const { return IterationSpace(0, ni, 1); }

  [[nodiscard]] CostModel cost_model(std::int64_t overhead_ns = 0) const {
    CostModel m;
    m.iteration_cost = [self = *this](std::int64_t i) { return self.cost_at(i); };
    m.overhead_ns = overhead_ns;
    return m;
  }

  /// Spin body for real-mode runs. The two-argument form is the emulation
  /// hook: slow-type threads pass their work multiplier and the body scales
  /// its own spin.
  [[nodiscard]] auto body() const {
    return [self = *this](std::int64_t i, double scale = 1.0) {
      spin_for_ns(std::llround(static_cast<double>(self.cost_at(i)) * scale));
    };
  }
};

// --- workload file (key/value text, versioned) -------------------------------
//
//   schema = aidsched-workload-v1
//   shape = random_uniform
//   ni = 100000
//   base_cost_ns = 1000
//   spread = 0.5
//   seed = 42
//   # linear shapes:  slope = 2.0
//   # phased shape:   phases = 0:1.0,0.5:3.0

inline WorkloadSpec parse_workload(std::istream& in, const std::string& origin) {
  WorkloadSpec w;
  bool schema_seen = false;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "schema") {
        if (value != "aidsched-workload-v1") {
          throw std::invalid_argument("unsupported schema '" + value + "'");
        }
        schema_seen = true;
      } else if (key == "shape") {
        w.shape = parse_workload_shape(value);
      } else if (key == "ni") {
        w.ni = std::stoll(value);
      } else if (key == "base_cost_ns") {
        w.base_cost_ns = std::stoll(value);
      } else if (key == "slope") {
        w.slope = std::stod(value);
      } else if (key == "spread") {
        w.spread = std::stod(value);
      } else if (key == "seed") {
        w.seed = std::stoull(value);
      } else if (key == "phases") {
        w.phases.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          const auto colon = tok.find(':');
          if (colon == std::string::npos) {
            throw std::invalid_argument("phase segment '" + tok + "' needs start:multiplier");
          }
          w.phases.push_back({std::stod(tok.substr(0, colon)),
                              std::stod(tok.substr(colon + 1))});
        }
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ": " + e.what());
    }
  }
  if (!schema_seen) {
    throw std::invalid_argument(origin + ": missing 'schema = aidsched-workload-v1'");
  }
  w.validate();
  return w;
}

inline WorkloadSpec load_workload(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open workload file '" + path + "'");
  return parse_workload(f, path);
}

}  // namespace aidsched
