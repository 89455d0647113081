#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "topology.hpp"

namespace aidsched {

enum class ScheduleKind {
  Static,
  Dynamic,
  Guided,
  AidStatic,
  AidHybrid,
  AidDynamic,
};

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Static: return "static";
    case ScheduleKind::Dynamic: return "dynamic";
    case ScheduleKind::Guided: return "guided";
    case ScheduleKind::AidStatic: return "aid_static";
    case ScheduleKind::AidHybrid: return "aid_hybrid";
    case ScheduleKind::AidDynamic: return "aid_dynamic";
  }
  return "?";
}

inline constexpr const char* kScheduleKindNames =
    "static, dynamic, guided, aid_static, aid_hybrid, aid_dynamic";

inline std::optional<ScheduleKind> schedule_kind_from_string(const std::string& s) {
  if (s == "static") return ScheduleKind::Static;
  if (s == "dynamic") return ScheduleKind::Dynamic;
  if (s == "guided") return ScheduleKind::Guided;
  if (s == "aid_static") return ScheduleKind::AidStatic;
  if (s == "aid_hybrid") return ScheduleKind::AidHybrid;
  if (s == "aid_dynamic") return ScheduleKind::AidDynamic;
  return std::nullopt;
}

/// A loop schedule and its parameters.
///
/// `chunk` is the dynamic/guided chunk, the AID sampling chunk, and
/// AID-dynamic's minor chunk m. `major_chunk` (M) and `hybrid_fraction` (the
/// share of NI distributed statically) only matter for AID-dynamic and
/// AID-hybrid respectively.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Static;
  std::int64_t chunk = 1;
  std::int64_t major_chunk = 5;
  double hybrid_fraction = 0.80;

  void validate() const {
    if (chunk < 1) throw std::invalid_argument("schedule: chunk must be >= 1");
    if (kind == ScheduleKind::AidDynamic && major_chunk < chunk) {
      throw std::invalid_argument(
          "schedule: major chunk M must be >= the minor chunk m");
    }
    if (kind == ScheduleKind::AidHybrid &&
        !(hybrid_fraction > 0.0 && hybrid_fraction <= 1.0)) {
      throw std::invalid_argument("schedule: hybrid fraction must be in (0, 1]");
    }
  }

  [[nodiscard]] std::string to_spec_string() const {
    std::ostringstream os;
    os << to_string(kind);
    os << "," << chunk;
    if (kind == ScheduleKind::AidDynamic) os << ",M=" << major_chunk;
    if (kind == ScheduleKind::AidHybrid) os << ",P=" << hybrid_fraction;
    return os.str();
  }
};

/// Parses "kind[(binding)][,chunk]", e.g. "dynamic,1", "static(SB)",
/// "aid_dynamic". The chunk suffix sets the minor/sampling chunk; M and P
/// come from their own knobs. The binding annotation, when present, is
/// returned alongside the schedule.
struct ParsedSchedule {
  ScheduleConfig config;
  std::optional<BindingPolicy> binding;
};

inline ParsedSchedule parse_schedule_spec(const std::string& spbody) {
  std::string s = detail::trim(spbody);
  ParsedSchedule out;

  std::string chunk_part;
  const auto comma = s.find(',');
  if (comma != std::string::npos) {
    chunk_part = detail::trim(s.substr(comma + 1));
    s = detail::trim(s.substr(0, comma));
  }
  const auto paren = s.find('(');
  if (paren != std::string::npos) {
    if (s.back() != ')') {
      throw std::invalid_argument("schedule '" + spbody + "': unbalanced '('");
    }
    out.binding = parse_binding(s.substr(paren + 1, s.size() - paren - 2));
    s = detail::trim(s.substr(0, paren));
  }
  const auto kind = schedule_kind_from_string(s);
  if (!kind) {
    throw std::invalid_argument("unknown schedule '" + s + "' (valid kinds: " +
                                std::string(kScheduleKindNames) + ")");
  }
  out.config.kind = *kind;
  if (!chunk_part.empty()) {
    try {
      std::size_t pos = 0;
      out.config.chunk = std::stoll(chunk_part, &pos);
      if (pos != chunk_part.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw std::invalid_argument("schedule '" + spbody + "': bad chunk value '" +
                                  chunk_part + "'");
    }
  }
  out.config.validate();
  return out;
}

}  // namespace aidsched
