#ifndef RATETUNE_RUN_HPP
#define RATETUNE_RUN_HPP

#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "ratetune/config.hpp"
#include "ratetune/report_io.hpp"
#include "ratetune/schedule_io.hpp"
#include "ratetune/sim_driver.hpp"
#include "ratetune/svg_plot.hpp"

namespace ratetune {

/// Reads the configured schedule and drops short-lived or out-of-window
/// signatures. Without an explicit window the whole schedule is in range.
inline std::vector<SignatureLifecycle> load_schedule(const RunConfig& cfg, std::ostream& log) {
  if (cfg.schedule.empty()) throw std::invalid_argument("no schedule given (use --schedule or schedule=)");
  auto raw = parse_schedule(cfg.schedule, cfg.lead_days, cfg.lag_days);
  ScheduleWindow window{std::numeric_limits<int>::min(), std::numeric_limits<int>::max()};
  if (cfg.window_start) window.start_day = *cfg.window_start;
  if (cfg.window_end) window.end_day = *cfg.window_end;
  auto filtered = filter_schedule(std::move(raw), window);
  if (filtered.dropped_short || filtered.dropped_outside_window)
    log << "schedule: kept " << filtered.kept.size() << ", dropped " << filtered.dropped_short << " short-lived and "
        << filtered.dropped_outside_window << " outside the window\n";
  return std::move(filtered.kept);
}

struct RunOutput {
  std::vector<SimReport> reports;
  std::vector<Summary> summaries;
  std::vector<std::filesystem::path> files;
};

inline std::filesystem::path write_text(const std::filesystem::path& path, auto&& writer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  writer(os);
  return path;
}

/// Runs every grid cell of `cfg` and writes the reports into cfg.out_dir.
/// A single cell writes `days.csv`; a larger grid writes one `days_*.csv` per cell.
inline RunOutput run_and_report(const RunConfig& cfg, const std::vector<SignatureLifecycle>& schedule,
                                std::ostream& log) {
  GridConfig grid{cfg.sim, cfg.thetas, cfg.betas, cfg.overlap_values(), cfg.threads};
  RunOutput out;
  out.reports = sweep(schedule, grid);
  for (const auto& r : out.reports) out.summaries.push_back(summarize(r));

  std::filesystem::create_directories(cfg.out_dir);
  const bool single = out.reports.size() == 1;
  for (const auto& r : out.reports)
    out.files.push_back(write_text(cfg.out_dir / (single ? std::string("days.csv") : day_csv_name(r)),
                                   [&](std::ostream& os) { write_days_csv(os, r); }));
  out.files.push_back(
      write_text(cfg.out_dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, out.summaries); }));
  if (cfg.plots) {
    auto svgs = emit_plots(out.summaries, out.reports, cfg.out_dir, PlotFlags::all(), log);
    out.files.insert(out.files.end(), svgs.begin(), svgs.end());
  }
  return out;
}

}  // namespace ratetune

#endif  // RATETUNE_RUN_HPP
