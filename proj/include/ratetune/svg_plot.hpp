#ifndef RATETUNE_SVG_PLOT_HPP
#define RATETUNE_SVG_PLOT_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ratetune/report_io.hpp"
#include "ratetune/sim_driver.hpp"

namespace ratetune {

namespace svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = true;
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  std::vector<Series> series;
};

inline constexpr double panel_width = 420.0;
inline constexpr double panel_height = 320.0;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Draws `chart` into a panel whose top-left corner is at (ox, oy).
inline void render(std::ostream& os, const Chart& c, double ox, double oy) {
  const double left = ox + 60, right = ox + panel_width - 20, top = oy + 35, bottom = oy + panel_height - 50;
  const double xs = c.x_max > c.x_min ? (right - left) / (c.x_max - c.x_min) : 1.0;
  const double ys = c.y_max > c.y_min ? (bottom - top) / (c.y_max - c.y_min) : 1.0;
  auto px = [&](double x) { return left + (x - c.x_min) * xs; };
  auto py = [&](double y) { return bottom - (y - c.y_min) * ys; };

  os << "<g>\n";
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(oy + 20)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(c.title) << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
     << num(bottom - top) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = c.x_min + (c.x_max - c.x_min) * i / 4.0;
    const double fy = c.y_min + (c.y_max - c.y_min) * i / 4.0;
    os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(bottom + 15) << "\" text-anchor=\"middle\" font-size=\"10\">"
       << format_param(fx) << "</text>\n";
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(py(fy) + 3) << "\" text-anchor=\"end\" font-size=\"10\">"
       << format_param(fy) << "</text>\n";
  }
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(bottom + 35)
     << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(c.x_label) << "</text>\n";
  os << "<text transform=\"translate(" << num(ox + 15) << ',' << num((top + bottom) / 2)
     << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << escape(c.y_label) << "</text>\n";

  double legend_y = top + 12;
  for (const auto& s : c.series) {
    if (s.line && s.points.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
      if (s.dashed) os << " stroke-dasharray=\"6,4\"";
      os << " points=\"";
      for (const auto& [x, y] : s.points) os << num(px(x)) << ',' << num(py(y)) << ' ';
      os << "\"/>\n";
    }
    if (s.markers)
      for (const auto& [x, y] : s.points)
        os << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    if (!s.label.empty()) {
      os << "<text x=\"" << num(right - 8) << "\" y=\"" << num(legend_y) << "\" text-anchor=\"end\" font-size=\"10\" fill=\""
         << s.color << "\">" << escape(s.label) << "</text>\n";
      legend_y += 13;
    }
  }
  os << "</g>\n";
}

/// Writes `charts` as a grid with `columns` panels per row.
inline void write_document(std::ostream& os, const std::vector<Chart>& charts, int columns = 1) {
  const int rows = (static_cast<int>(charts.size()) + columns - 1) / columns;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(panel_width * columns) << "\" height=\""
     << num(panel_height * rows) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i)
    render(os, charts[i], panel_width * static_cast<double>(i % columns), panel_height * static_cast<double>(i / columns));
  os << "</svg>\n";
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return colors[i % 7];
}

}  // namespace svg

struct PlotFlags {
  bool removal = true;
  bool precision_recall = true;
  bool solve_time_cdf = true;

  static PlotFlags all() { return {}; }
  static PlotFlags none() { return {false, false, false}; }
  bool any() const { return removal || precision_recall || solve_time_cdf; }
};

/// %FP removed against %TP removed per cell, with the y = x reference line.
inline std::optional<svg::Chart> removal_chart(const std::vector<Summary>& summaries) {
  svg::Chart c{"FP removed vs TP removed", "% true positives removed", "% false positives removed", 0, 100, 0, 100, {}};
  c.series.push_back({"equal loss", {{0, 0}, {100, 100}}, "#777", true, false, true});
  for (bool overlap : {false, true}) {
    svg::Series s{overlap ? "with overlap" : "without overlap", {}, svg::palette(overlap ? 1 : 0), false, true, false};
    for (const auto& x : summaries)
      if (x.overlap == overlap && x.tp_removed_pct && x.fp_removed_pct)
        s.points.emplace_back(*x.tp_removed_pct, *x.fp_removed_pct);
    if (!s.points.empty()) c.series.push_back(std::move(s));
  }
  if (c.series.size() == 1) return std::nullopt;
  return c;
}

/// Precision and recall against theta, one line per beta; one column per overlap mode.
inline std::vector<svg::Chart> precision_recall_charts(const std::vector<Summary>& summaries) {
  std::vector<svg::Chart> out;
  double theta_max = 0.0;
  for (const auto& s : summaries) theta_max = std::max(theta_max, s.theta);
  if (theta_max <= 0.0) theta_max = 1.0;
  for (int metric = 0; metric < 2; ++metric) {
    for (bool overlap : {false, true}) {
      svg::Chart c;
      c.title = std::string(metric == 0 ? "precision" : "recall") + (overlap ? " with overlap" : " without overlap");
      c.x_label = "theta";
      c.y_label = metric == 0 ? "precision" : "recall";
      c.x_max = theta_max;
      std::map<double, std::vector<std::pair<double, double>>> by_beta;
      for (const auto& s : summaries) {
        const auto v = metric == 0 ? s.precision : s.recall;
        if (s.overlap == overlap && v) by_beta[s.beta].emplace_back(s.theta, *v);
      }
      if (by_beta.empty()) continue;
      std::size_t k = 0;
      for (auto& [beta, pts] : by_beta) {
        std::sort(pts.begin(), pts.end());
        c.series.push_back({"beta=" + format_param(beta), std::move(pts), svg::palette(k++), true, true, false});
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Empirical CDF of per-update solve times, one curve per overlap mode.
inline std::optional<svg::Chart> solve_time_cdf_chart(const std::vector<SimReport>& reports) {
  svg::Chart c{"Cumulative distribution of solve times", "solve time (ms)", "fraction of updates", 0, 1, 0, 1, {}};
  double t_max = 0.0;
  for (bool overlap : {false, true}) {
    std::vector<double> times;
    for (const auto& r : reports)
      if (r.overlap == overlap) {
        auto t = solve_times_ms(r);
        times.insert(times.end(), t.begin(), t.end());
      }
    if (times.empty()) continue;
    std::sort(times.begin(), times.end());
    svg::Series s{overlap ? "with overlap" : "without overlap", {}, svg::palette(overlap ? 1 : 0), true, false, false};
    for (std::size_t i = 0; i < times.size(); ++i)
      s.points.emplace_back(times[i], static_cast<double>(i + 1) / static_cast<double>(times.size()));
    t_max = std::max(t_max, times.back());
    c.series.push_back(std::move(s));
  }
  if (c.series.empty()) return std::nullopt;
  c.x_max = t_max > 0.0 ? t_max : 1.0;
  return c;
}

/// Writes the enabled plots into `dir` and returns the files produced.
/// Plots without usable data are skipped with a note on `warnings`.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<Summary>& summaries,
                                                     const std::vector<SimReport>& reports,
                                                     const std::filesystem::path& dir, const PlotFlags& flags,
                                                     std::ostream& warnings) {
  std::vector<std::filesystem::path> written;
  if (!flags.any()) return written;
  std::filesystem::create_directories(dir);
  auto save = [&](const std::string& name, const std::vector<svg::Chart>& charts, int columns) {
    const auto path = dir / name;
    std::ofstream os(path);
    svg::write_document(os, charts, columns);
    written.push_back(path);
  };
  if (flags.removal) {
    if (auto c = removal_chart(summaries)) save("removal.svg", {*c}, 1);
    else warnings << "warning: no removal percentages to plot; removal.svg skipped\n";
  }
  if (flags.precision_recall) {
    auto charts = precision_recall_charts(summaries);
    if (!charts.empty()) save("precision_recall.svg", charts, 2);
    else warnings << "warning: no precision/recall values to plot; precision_recall.svg skipped\n";
  }
  if (flags.solve_time_cdf) {
    if (auto c = solve_time_cdf_chart(reports)) save("solve_time_cdf.svg", {*c}, 1);
    else warnings << "warning: no solve times recorded; solve_time_cdf.svg skipped\n";
  }
  return written;
}

}  // namespace ratetune

#endif  // RATETUNE_SVG_PLOT_HPP
