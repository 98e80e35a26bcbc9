#ifndef RATETUNE_SCHEDULE_IO_HPP
#define RATETUNE_SCHEDULE_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ratetune/errors.hpp"
#include "ratetune/rng.hpp"
#include "ratetune/trace_gen.hpp"

namespace ratetune {

inline constexpr std::string_view schedule_header = "signature_id,intro_day,removal_day,severity,update_days";

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) return out;
    s.remove_prefix(pos + 1);
  }
}

inline int parse_int(std::string_view s, std::size_t line, const char* field) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw parse_error(line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

/// Reads the comma-separated schedule format. Malware lead/lag are applied to
/// every row. Throws parse_error with the offending line number.
inline std::vector<SignatureLifecycle> parse_schedule(std::istream& in, int lead = default_lead_days,
                                                      int lag = default_lag_days) {
  std::vector<SignatureLifecycle> out;
  std::set<std::string, std::less<>> ids;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      if (text != schedule_header) throw parse_error(lineno, "expected header '" + std::string(schedule_header) + "'");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(text, ',');
    if (fields.size() != 5) throw parse_error(lineno, "expected 5 fields, got " + std::to_string(fields.size()));
    const std::string id(fields[0]);
    if (id.empty()) throw parse_error(lineno, "empty signature_id");
    if (ids.contains(id)) throw parse_error(lineno, "duplicate signature_id '" + id + "'");
    ids.insert(id);
    const int intro = detail::parse_int(fields[1], lineno, "intro_day");
    const int removal = detail::parse_int(fields[2], lineno, "removal_day");
    const int severity = fields[3].empty() ? 1 : detail::parse_int(fields[3], lineno, "severity");
    std::vector<int> updates;
    if (!fields[4].empty())
      for (auto u : detail::split(fields[4], ';')) updates.push_back(detail::parse_int(u, lineno, "update day"));
    try {
      out.push_back(make_lifecycle(id, intro, removal, severity, std::move(updates), lead, lag));
    } catch (const std::invalid_argument& e) {
      throw parse_error(lineno, e.what());
    }
  }
  if (!header_seen) throw parse_error(lineno == 0 ? 1 : lineno, "missing header");
  return out;
}

inline std::vector<SignatureLifecycle> parse_schedule(const std::filesystem::path& path, int lead = default_lead_days,
                                                      int lag = default_lag_days) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule '" + path.string() + "'");
  return parse_schedule(in, lead, lag);
}

inline void write_schedule(std::ostream& os, const std::vector<SignatureLifecycle>& schedule) {
  os << schedule_header << '\n';
  for (const auto& lc : schedule) {
    os << lc.signature_id << ',' << lc.intro_day << ',' << lc.removal_day << ',' << lc.severity << ',';
    for (std::size_t i = 0; i < lc.update_days.size(); ++i) os << (i ? ";" : "") << lc.update_days[i];
    os << '\n';
  }
}

/// Random schedule for desk-scale experiments: lifespans log-uniform in
/// [7, min(365, days)] days, 0-3 updates, severity 1-3.
inline std::vector<SignatureLifecycle> generate_schedule(std::size_t signatures, int days, std::uint64_t seed) {
  if (days < 8) throw std::invalid_argument("schedule horizon must be at least 8 days");
  Rng rng(derive_seed(seed, "schedule"));
  const double lo = std::log(7.0), hi = std::log(static_cast<double>(std::min(365, days)));
  std::vector<SignatureLifecycle> out;
  out.reserve(signatures);
  for (std::size_t i = 0; i < signatures; ++i) {
    const int life = static_cast<int>(std::lround(std::exp(rng.uniform(lo, hi))));
    const int intro = static_cast<int>(rng.between(0, days - life));
    const int severity = static_cast<int>(rng.between(1, 3));
    const int n_updates = static_cast<int>(std::min<std::int64_t>(rng.between(0, 3), life - 1));
    std::set<int> updates;
    while (static_cast<int>(updates.size()) < n_updates) updates.insert(static_cast<int>(rng.between(intro + 1, intro + life - 1)));
    char id[32];
    std::snprintf(id, sizeof id, "sig%05zu", i);
    out.push_back(make_lifecycle(id, intro, intro + life, severity, {updates.begin(), updates.end()}));
  }
  return out;
}

}  // namespace ratetune

#endif  // RATETUNE_SCHEDULE_IO_HPP
