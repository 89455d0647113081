#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aidsched {

/// Thread-to-core placement order. BS puts low thread ids on the fastest
/// cores (the convention the AID schedulers assume); SB is the mirror image;
/// None leaves threads unpinned.
enum class BindingPolicy { BS, SB, None };

inline const char* to_string(BindingPolicy b) {
  switch (b) {
    case BindingPolicy::BS: return "BS";
    case BindingPolicy::SB: return "SB";
    case BindingPolicy::None: return "none";
  }
  return "?";
}

inline BindingPolicy parse_binding(const std::string& s) {
  if (s == "BS" || s == "bs") return BindingPolicy::BS;
  if (s == "SB" || s == "sb") return BindingPolicy::SB;
  if (s == "none" || s == "NONE") return BindingPolicy::None;
  throw std::invalid_argument("unknown binding policy '" + s +
                              "' (expected BS, SB or none)");
}

/// One core type: thread count, nominal speed relative to the slowest type
/// (used by the simulator and the emulation mode), and optional concrete
/// core ids for pinning.
struct CoreTypeSpec {
  std::string name;
  int thread_count = 0;
  double speed_ratio = 1.0;
  std::vector<int> core_ids;
};

/// The machine as the scheduler sees it: NC >= 1 core types ordered slowest
/// first (type 0 is the reference, ratio exactly 1.0).
///
/// Worker thread ids map onto types fastest-first: ids 0..N_fastest-1 belong
/// to the fastest type and the highest ids to the slowest. This mirrors the
/// BS placement the AID math assumes; the binding policy only decides where
/// threads are physically pinned.
class CoreTopology {
 public:
  CoreTopology() = default;

  explicit CoreTopology(std::vector<CoreTypeSpec> types) : types_(std::move(types)) {
    if (types_.empty()) {
      throw std::invalid_argument("CoreTopology: at least one core type required");
    }
    std::stable_sort(types_.begin(), types_.end(),
                     [](const CoreTypeSpec& a, const CoreTypeSpec& b) {
                       return a.speed_ratio < b.speed_ratio;
                     });
    if (types_.front().speed_ratio != 1.0) {
      throw std::invalid_argument(
          "CoreTopology: slowest type must have speed ratio 1.0");
    }
    for (const auto& t : types_) {
      if (t.thread_count < 1) {
        throw std::invalid_argument("CoreTopology: every type needs >= 1 thread");
      }
      if (!(t.speed_ratio > 0.0)) {
        throw std::invalid_argument("CoreTopology: speed ratios must be positive");
      }
      if (!t.core_ids.empty() &&
          t.core_ids.size() != static_cast<std::size_t>(t.thread_count)) {
        throw std::invalid_argument(
            "CoreTopology: core id list must match the type's thread count");
      }
    }
  }

  static CoreTopology symmetric(int n_threads) {
    return CoreTopology({CoreTypeSpec{"core", n_threads, 1.0, {}}});
  }

  /// Two-type shorthand; `big_ratio` is the big-to-small speed ratio.
  static CoreTopology big_little(int n_big, int n_small, double big_ratio,
                                 std::vector<int> big_cores = {},
                                 std::vector<int> small_cores = {}) {
    return CoreTopology({CoreTypeSpec{"small", n_small, 1.0, std::move(small_cores)},
                         CoreTypeSpec{"big", n_big, big_ratio, std::move(big_cores)}});
  }

  [[nodiscard]] int type_count() const { return static_cast<int>(types_.size()); }
  [[nodiscard]] const CoreTypeSpec& type(int j) const { return types_.at(j); }
  [[nodiscard]] const std::vector<CoreTypeSpec>& types() const { return types_; }

  [[nodiscard]] int total_threads() const {
    int n = 0;
    for (const auto& t : types_) n += t.thread_count;
    return n;
  }

  /// BS-convention mapping: thread 0 lands on the fastest type. Types are
  /// stored slowest-first, so we walk from the back.
  [[nodiscard]] int type_of_thread(int tid) const {
    int offset = 0;
    for (int j = type_count() - 1; j >= 0; --j) {
      offset += types_[j].thread_count;
      if (tid < offset) return j;
    }
    throw std::out_of_range("type_of_thread: thread id out of range");
  }

  [[nodiscard]] bool is_symmetric() const { return type_count() == 1; }

  /// Two-type helpers (paper notation). For NC == 1 everything is "small".
  [[nodiscard]] int n_small() const { return types_.front().thread_count; }
  [[nodiscard]] int n_big() const {
    return is_symmetric() ? 0 : types_.back().thread_count;
  }

  [[nodiscard]] std::string describe() const {
    std::ostringstream os;
    for (int j = type_count() - 1; j >= 0; --j) {
      if (j != type_count() - 1) os << "+";
      os << types_[j].thread_count << types_[j].name[0];
    }
    return os.str();
  }

 private:
  std::vector<CoreTypeSpec> types_;
};

// --- topology file (key/value text, versioned) ------------------------------
//
//   schema = aidsched-topology-v1
//   type = big    threads=4 ratio=4.0 cores=4,5,6,7
//   type = small  threads=4 ratio=1.0 cores=0,1,2,3
//
// `cores` is optional (needed only for pinning); the slowest type must have
// ratio 1.0. Blank lines and '#' comments are ignored.

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

}  // namespace detail

inline CoreTopology parse_topology(std::istream& in, const std::string& origin) {
  std::vector<CoreTypeSpec> types;
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
    if (key == "schema") {
      if (value != "aidsched-topology-v1") {
        throw std::invalid_argument(origin + ": unsupported schema '" + value + "'");
      }
      schema_seen = true;
    } else if (key == "type") {
      CoreTypeSpec t;
      std::stringstream ss(value);
      std::string tok;
      ss >> t.name;
      while (ss >> tok) {
        const auto e2 = tok.find('=');
        if (e2 == std::string::npos) {
          throw std::invalid_argument(origin + ": bad type attribute '" + tok + "'");
        }
        const std::string k2 = tok.substr(0, e2);
        const std::string v2 = tok.substr(e2 + 1);
        if (k2 == "threads") {
          t.thread_count = std::stoi(v2);
        } else if (k2 == "ratio") {
          t.speed_ratio = std::stod(v2);
        } else if (k2 == "cores") {
          t.core_ids = detail::parse_int_list(v2);
        } else {
          throw std::invalid_argument(origin + ": unknown type attribute '" + k2 + "'");
        }
      }
      types.push_back(std::move(t));
    } else {
      throw std::invalid_argument(origin + ": unknown key '" + key + "'");
    }
  }
  if (!schema_seen) {
    throw std::invalid_argument(origin + ": missing 'schema = aidsched-topology-v1'");
  }
  return CoreTopology(std::move(types));
}

inline CoreTopology load_topology(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open topology file '" + path + "'");
  return parse_topology(f, path);
}

}  // namespace aidsched
