#pragma once

// Raw [0,1] relevance -> integer label scale 0..max_value.

#include "scoring.hpp"

namespace tripscore {

enum class MappingKind { lin, log, range };

inline std::string_view to_string(MappingKind k) {
  switch (k) {
    case MappingKind::lin: return "lin";
    case MappingKind::log: return "log";
    case MappingKind::range: return "range";
  }
  return "?";
}

inline MappingKind parse_mapping(std::string_view s) {
  if (s == "lin") return MappingKind::lin;
  if (s == "log") return MappingKind::log;
  if (s == "range") return MappingKind::range;
  throw ConfigError("unknown mapping '" + std::string(s) + "' (expected lin|log|range)");
}

struct MappingSpec {
  MappingKind kind = MappingKind::lin;
  int max_value = 7;
  double log_floor = 1e-4;

  void validate() const {
    if (max_value < 1) throw ConfigError("max score must be >= 1");
    if (!(log_floor > 0.0 && log_floor < 1.0)) throw ConfigError("log floor must lie in (0, 1)");
  }
};

// Snaps to 12 decimal places. Scores are decimal quantities; this removes
// the binary representation error (e.g. 7*(0.5-0.2)/(0.8-0.2) evaluating to
// 3.4999999999999996) before rounding. Monotone non-decreasing.
inline double snap(double x) { return std::round(x * 1e12) / 1e12; }

inline int round_half_up(double x) { return static_cast<int>(std::floor(snap(x) + 0.5)); }

inline void check_raw(double raw) {
  if (!(raw >= 0.0 && raw <= 1.0)) throw Error("raw score " + std::to_string(raw) + " outside [0, 1]");
}

inline int map_lin(double raw, int max_value = 7) {
  check_raw(raw);
  return std::clamp(round_half_up(raw * max_value), 0, max_value);
}

// Linear in log space between log_floor (-> 0) and 1 (-> max_value).
inline int map_log(double raw, int max_value = 7, double log_floor = 1e-4) {
  check_raw(raw);
  const double p = std::clamp(raw, log_floor, 1.0);
  const double score = max_value * (1.0 - std::log(p) / std::log(log_floor));
  return std::clamp(round_half_up(score), 0, max_value);
}

// max_value * (raw - min(A)) / (max(A) - min(A)); max_value when A is flat.
// Unrounded.
inline double map_range(std::span<const double> all_raws, double raw, int max_value = 7) {
  if (all_raws.empty()) throw Error("map_range needs a non-empty score array");
  const auto [lo, hi] = std::minmax_element(all_raws.begin(), all_raws.end());
  if (raw < *lo || raw > *hi) throw Error("map_range: value lies outside its score array");
  if (*hi == *lo) return static_cast<double>(max_value);
  return snap(max_value * (raw - *lo) / (*hi - *lo));
}

// Fills `mapped` for every record. Range mapping uses each subject's own
// raw scores as the array.
inline std::vector<ScoreRecord> apply_mapping(std::vector<ScoreRecord> records, const MappingSpec& spec) {
  spec.validate();
  auto context = [](const ScoreRecord& r, const Error& e) {
    return Error("mapping '" + r.subject + "' / '" + r.value + "': " + e.what());
  };
  if (spec.kind != MappingKind::range) {
    for (auto& r : records) {
      try {
        r.mapped = spec.kind == MappingKind::lin ? map_lin(r.raw, spec.max_value)
                                                 : map_log(r.raw, spec.max_value, spec.log_floor);
      } catch (const Error& e) {
        throw context(r, e);
      }
    }
    return records;
  }

  std::map<std::string, std::vector<double>, std::less<>> by_subject;
  for (const auto& r : records) by_subject[r.subject].push_back(r.raw);
  for (auto& r : records) {
    try {
      check_raw(r.raw);
      r.mapped = std::clamp(round_half_up(map_range(by_subject[r.subject], r.raw, spec.max_value)), 0,
                            spec.max_value);
    } catch (const Error& e) {
      throw context(r, e);
    }
  }
  return records;
}

}  // namespace tripscore
