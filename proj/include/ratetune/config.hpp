#ifndef RATETUNE_CONFIG_HPP
#define RATETUNE_CONFIG_HPP

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ratetune/errors.hpp"
#include "ratetune/schedule_io.hpp"
#include "ratetune/sim_driver.hpp"

namespace ratetune {

enum class OverlapMode { on, off, both };

/// Everything a CLI run needs: simulation knobs, the sweep grid and paths.
struct RunConfig {
  SimConfig sim;
  std::vector<double> thetas{0.1};
  std::vector<double> betas{1.0};
  OverlapMode overlap = OverlapMode::on;
  std::filesystem::path schedule;
  std::filesystem::path out_dir = "report";
  bool plots = false;
  int lead_days = default_lead_days;
  int lag_days = default_lag_days;
  std::optional<int> window_start;
  std::optional<int> window_end;
  unsigned threads = 0;

  std::vector<bool> overlap_values() const {
    switch (overlap) {
      case OverlapMode::on: return {true};
      case OverlapMode::off: return {false};
      case OverlapMode::both: break;
    }
    return {false, true};
  }
};

namespace detail {

inline double parse_real(std::string_view s) {
  std::string str(trim(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid number '" + str + "'");
  }
  if (used != str.size()) throw std::invalid_argument("invalid number '" + str + "'");
  return v;
}

inline long long parse_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("invalid integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<double> parse_real_list(std::string_view s) {
  std::vector<double> out;
  for (auto part : split(s, ',')) out.push_back(parse_real(part));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline bool parse_switch(std::string_view s) {
  s = trim(s);
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw std::invalid_argument("expected on/off, got '" + std::string(s) + "'");
}

// none | drop_old:<days> | exponential:<w0>:<delta> | inverse_rate
inline WeightPolicy parse_weight_policy(std::string_view s) {
  const auto parts = split(s, ':');
  if (parts[0] == "none" && parts.size() == 1) return weighting::None{};
  if (parts[0] == "inverse_rate" && parts.size() == 1) return weighting::InverseRate{};
  if (parts[0] == "drop_old" && parts.size() == 2)
    return weighting::DropOld{static_cast<int>(parse_integer(parts[1]))};
  if (parts[0] == "exponential" && parts.size() == 3)
    return weighting::Exponential{parse_real(parts[1]), parse_real(parts[2])};
  throw std::invalid_argument("unknown weight policy '" + std::string(s) + "'");
}

// "<severity>=<value>,...,default=<value>"
inline void parse_min_rate_table(std::string_view s, MinRatePolicy& policy) {
  policy.by_severity.clear();
  policy.default_value.reset();
  for (auto item : split(s, ',')) {
    const auto kv = split(item, '=');
    if (kv.size() != 2) throw std::invalid_argument("expected severity=value, got '" + std::string(item) + "'");
    if (kv[0] == "default") {
      policy.default_value = parse_real(kv[1]);
    } else {
      policy.by_severity[static_cast<int>(parse_integer(kv[0]))] = parse_real(kv[1]);
    }
  }
}

}  // namespace detail

/// Applies one `key=value` setting. Throws std::invalid_argument on unknown
/// keys or malformed values.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  using namespace detail;
  key = trim(key);
  value = trim(value);
  auto& sim = cfg.sim;
  if (key == "theta") {
    cfg.thetas = parse_real_list(value);
  } else if (key == "beta") {
    cfg.betas = parse_real_list(value);
  } else if (key == "overlap") {
    if (value == "on") cfg.overlap = OverlapMode::on;
    else if (value == "off") cfg.overlap = OverlapMode::off;
    else if (value == "both") cfg.overlap = OverlapMode::both;
    else throw std::invalid_argument("overlap must be on, off or both");
  } else if (key == "overlap_table") {
    sim.overlap = OverlapDistribution(parse_real_list(value));
  } else if (key == "update_period") {
    sim.update_period_days = static_cast<int>(parse_integer(value));
  } else if (key == "seed") {
    sim.seed = static_cast<std::uint64_t>(parse_integer(value));
  } else if (key == "schedule") {
    cfg.schedule = std::string(value);
  } else if (key == "out") {
    cfg.out_dir = std::string(value);
  } else if (key == "plots") {
    cfg.plots = parse_switch(value);
  } else if (key == "weight_policy") {
    sim.weight_policy = parse_weight_policy(value);
  } else if (key == "min_rate_form") {
    if (value == "lower_bound") sim.min_rate_policy.form = MinRateForm::lower_bound;
    else if (value == "additive") sim.min_rate_policy.form = MinRateForm::additive;
    else if (value == "proportional") sim.min_rate_policy.form = MinRateForm::proportional;
    else throw std::invalid_argument("unknown min_rate_form '" + std::string(value) + "'");
  } else if (key == "min_rate") {
    parse_min_rate_table(value, sim.min_rate_policy);
  } else if (key == "normalization") {
    if (value == "conventional") sim.normalization = Normalization::conventional;
    else if (value == "paper_exact") sim.normalization = Normalization::paper_exact;
    else throw std::invalid_argument("normalization must be conventional or paper_exact");
  } else if (key == "timing") {
    sim.record_timing = parse_switch(value);
  } else if (key == "jitter") {
    sim.jitter = parse_switch(value);
  } else if (key == "initial_count") {
    sim.initial_count = parse_real(value);
  } else if (key == "decay_floor") {
    sim.decay_floor = parse_real(value);
  } else if (key == "update_bump") {
    sim.update_bump = parse_real(value);
  } else if (key == "lead_days") {
    cfg.lead_days = static_cast<int>(parse_integer(value));
  } else if (key == "lag_days") {
    cfg.lag_days = static_cast<int>(parse_integer(value));
  } else if (key == "window_start") {
    cfg.window_start = static_cast<int>(parse_integer(value));
  } else if (key == "window_end") {
    cfg.window_end = static_cast<int>(parse_integer(value));
  } else if (key == "prune_weight") {
    sim.prune_weight = parse_real(value);
  } else if (key == "replication") {
    if (value == "single") sim.replication = Replication::single;
    else if (value == "weighted") sim.replication = Replication::weighted;
    else throw std::invalid_argument("replication must be single or weighted");
  } else if (key == "inference_max_iterations") {
    sim.inference.max_iterations = static_cast<int>(parse_integer(value));
  } else if (key == "inference_damping") {
    sim.inference.damping = parse_real(value);
  } else if (key == "inference_floor") {
    sim.inference.message_floor = parse_real(value);
  } else if (key == "inference_tolerance") {
    sim.inference.tolerance = parse_real(value);
  } else if (key == "inference_prior") {
    sim.inference.prior = parse_real(value);
  } else if (key == "inference_timeout_ms") {
    sim.inference.timeout = std::chrono::milliseconds(parse_integer(value));
  } else if (key == "threads") {
    cfg.threads = static_cast<unsigned>(parse_integer(value));
  } else {
    throw std::invalid_argument("unknown key '" + std::string(key) + "'");
  }
}

/// Flat `key=value` file; blank lines and `#` comments are ignored.
inline void load_config(std::istream& in, RunConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = detail::trim(text.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw parse_error(lineno, "expected key=value");
    try {
      apply_setting(cfg, text.substr(0, eq), text.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw parse_error(lineno, e.what());
    }
  }
}

inline void load_config(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  load_config(in, cfg);
}

}  // namespace ratetune

#endif  // RATETUNE_CONFIG_HPP
