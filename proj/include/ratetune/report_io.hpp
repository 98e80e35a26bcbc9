#ifndef RATETUNE_REPORT_IO_HPP
#define RATETUNE_REPORT_IO_HPP

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ratetune/sim_driver.hpp"

namespace ratetune {

inline constexpr const char* day_csv_header =
    "day,active_signatures,tp_generated,fp_generated,tp_caught,fp_raised,update_performed,select_ms,infer_ms,"
    "fallback_used";

inline constexpr const char* summary_csv_header =
    "theta,beta,overlap,tp_removed_pct,fp_removed_pct,precision,recall,median_solve_ms,p98_solve_ms,fallback_count";

/// Fixed-point text for a value; absent values become an empty field.
inline std::string format_real(std::optional<double> v, int digits = 6) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

/// Shortest round-trip text, used for grid parameters.
inline std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void write_days_csv(std::ostream& os, const SimReport& report) {
  os << day_csv_header << '\n';
  for (const auto& d : report.days) {
    os << d.day << ',' << d.active_signatures << ',' << d.tp_generated << ',' << d.fp_generated << ',' << d.tp_caught
       << ',' << d.fp_raised << ',' << (d.update_performed ? 1 : 0) << ',' << format_real(d.select_ms, 3) << ','
       << format_real(d.infer_ms, 3) << ',' << (d.fallback_used ? 1 : 0) << '\n';
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<Summary>& summaries) {
  os << summary_csv_header << '\n';
  for (const auto& s : summaries) {
    os << format_param(s.theta) << ',' << format_param(s.beta) << ',' << (s.overlap ? "on" : "off") << ','
       << format_real(s.tp_removed_pct) << ',' << format_real(s.fp_removed_pct) << ',' << format_real(s.precision)
       << ',' << format_real(s.recall) << ',' << format_real(s.median_solve_ms, 3) << ','
       << format_real(s.p98_solve_ms, 3) << ',' << s.fallback_count << '\n';
  }
}

/// File name of a cell's per-day report, e.g. `days_t0.05_b1_on.csv`.
inline std::string day_csv_name(const SimReport& r) {
  return "days_t" + format_param(r.theta) + "_b" + format_param(r.beta) + (r.overlap ? "_on" : "_off") + ".csv";
}

}  // namespace ratetune

#endif  // RATETUNE_REPORT_IO_HPP
