#ifndef RATETUNE_TRACE_GEN_HPP
#define RATETUNE_TRACE_GEN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratetune/core_model.hpp"
#include "ratetune/rng.hpp"

namespace ratetune {

/// Life of one simulated signature, in days since the schedule epoch.
///
/// The malware it targets appears `lead` days before the signature is
/// introduced and disappears `lag` days before the signature is removed.
struct SignatureLifecycle {
  std::string signature_id;
  int intro_day = 0;
  int removal_day = 0;
  int severity = 1;
  std::vector<int> update_days;
  int malware_appear_day = 0;
  int malware_disappear_day = 0;

  int lifespan() const noexcept { return removal_day - intro_day; }
  bool active_on(int day) const noexcept { return day >= intro_day && day < removal_day; }

  friend bool operator==(const SignatureLifecycle&, const SignatureLifecycle&) = default;
};

inline constexpr int default_lead_days = 3;
inline constexpr int default_lag_days = 3;

/// Builds a validated lifecycle. Update days must lie strictly inside
/// (intro_day, removal_day); they are sorted and deduplicated here.
inline SignatureLifecycle make_lifecycle(std::string id, int intro_day, int removal_day, int severity,
                                         std::vector<int> update_days, int lead = default_lead_days,
                                         int lag = default_lag_days) {
  if (id.empty()) throw std::invalid_argument("signature id must not be empty");
  if (intro_day >= removal_day) throw std::invalid_argument("signature '" + id + "': intro_day must precede removal_day");
  if (severity < 0) throw std::invalid_argument("signature '" + id + "': negative severity");
  if (lead < 0 || lag < 0) throw std::invalid_argument("lead and lag must be nonnegative");
  std::sort(update_days.begin(), update_days.end());
  update_days.erase(std::unique(update_days.begin(), update_days.end()), update_days.end());
  for (int u : update_days)
    if (u <= intro_day || u >= removal_day)
      throw std::invalid_argument("signature '" + id + "': update day " + std::to_string(u) + " outside active window");
  SignatureLifecycle lc;
  lc.signature_id = std::move(id);
  lc.intro_day = intro_day;
  lc.removal_day = removal_day;
  lc.severity = severity;
  lc.update_days = std::move(update_days);
  lc.malware_appear_day = intro_day - lead;
  lc.malware_disappear_day = removal_day - lag;
  return lc;
}

/// y(t) = y0 * (t + 1)^-gamma, t in days since the malware appeared.
struct DecayCurve {
  double y0 = 500.0;
  double gamma = 1.0;
  double floor = 1.0;

  double at(double t) const { return y0 * std::pow(t + 1.0, -gamma); }
};

/// Fits gamma so the curve starts at y0 and reaches `floor` on the last day
/// of a `lifespan_days`-day life.
inline DecayCurve calibrate_decay(double y0, int lifespan_days, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("decay floor must be positive");
  if (!(y0 > floor)) throw std::invalid_argument("initial count must exceed the floor");
  if (lifespan_days < 2) throw std::invalid_argument("lifespan must be at least 2 days");
  return {y0, std::log(y0 / floor) / std::log(static_cast<double>(lifespan_days)), floor};
}

/// Daily counts for days [first_day, first_day + counts.size()); zero elsewhere.
struct DailyCounts {
  int first_day = 0;
  std::vector<std::int64_t> counts;

  std::int64_t at(int day) const {
    const long i = static_cast<long>(day) - first_day;
    if (i < 0 || i >= static_cast<long>(counts.size())) return 0;
    return counts[static_cast<std::size_t>(i)];
  }
};

struct TpTraceOptions {
  double update_bump = 1.5;  // rho
  bool jitter = true;        // multiply by U(0.9, 1.1)
};

/// True-positive counts over [malware_appear_day, malware_disappear_day).
///
/// Between updates the level follows the decay curve. On an update day the
/// level becomes min(y0, rho * previous day's level) and keeps decaying with
/// the curve's shape from there, which yields a sawtooth.
inline DailyCounts generate_tp_trace(const SignatureLifecycle& lc, const DecayCurve& curve,
                                     const TpTraceOptions& opt, Rng& rng) {
  DailyCounts out;
  out.first_day = lc.malware_appear_day;
  const int days = lc.malware_disappear_day - lc.malware_appear_day;
  if (days <= 0) return out;
  out.counts.resize(static_cast<std::size_t>(days));
  double scale = 1.0;
  auto next_update = lc.update_days.begin();
  for (int t = 0; t < days; ++t) {
    const int day = lc.malware_appear_day + t;
    while (next_update != lc.update_days.end() && *next_update < day) ++next_update;
    if (next_update != lc.update_days.end() && *next_update == day && t > 0) {
      const double previous = scale * curve.at(t - 1);
      scale = std::min(curve.y0, opt.update_bump * previous) / curve.at(t);
    }
    double level = scale * curve.at(t);
    if (opt.jitter) level *= rng.uniform(0.9, 1.1);
    out.counts[static_cast<std::size_t>(t)] = std::llround(level);
  }
  return out;
}

/// False-positive counts over the signature's active window [intro, removal):
/// round(theta * TP count on the most recent of intro/update days).
inline DailyCounts generate_fp_trace(const DailyCounts& tp, const SignatureLifecycle& lc, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must be in [0,1]");
  DailyCounts out;
  out.first_day = lc.intro_day;
  out.counts.resize(static_cast<std::size_t>(lc.lifespan()));
  std::int64_t level = std::llround(theta * static_cast<double>(tp.at(lc.intro_day)));
  auto next_update = lc.update_days.begin();
  for (int day = lc.intro_day; day < lc.removal_day; ++day) {
    if (next_update != lc.update_days.end() && *next_update == day) {
      level = std::llround(theta * static_cast<double>(tp.at(day)));
      ++next_update;
    }
    out.counts[static_cast<std::size_t>(day - lc.intro_day)] = level;
  }
  return out;
}

/// Probability of an observation overlapping with k additional signatures.
class OverlapDistribution {
 public:
  OverlapDistribution() : OverlapDistribution(std::vector<double>{0.85, 0.10, 0.04, 0.01}) {}

  explicit OverlapDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
    if (p_.empty()) throw std::invalid_argument("overlap distribution must support k = 0");
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw std::invalid_argument("overlap probabilities must be nonnegative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("overlap probabilities must sum to 1");
  }

  static OverlapDistribution none() { return OverlapDistribution(std::vector<double>{1.0}); }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < p_.size(); ++k) {
      acc += p_[k];
      if (u < acc) return k;
    }
    return p_.size() - 1;
  }

  std::span<const double> probabilities() const noexcept { return p_; }
  bool overlap_free() const noexcept { return p_[0] == 1.0; }

 private:
  std::vector<double> p_;
};

/// Flag set of one observation: its origin plus k other active signatures
/// drawn without replacement (k truncated to what is available).
inline FlagSet assign_overlap(ClassifierIndex origin, std::span<const ClassifierIndex> active,
                              const OverlapDistribution& dist, Rng& rng) {
  FlagSet flags{origin};
  const std::size_t others = active.size() - static_cast<std::size_t>(std::count(active.begin(), active.end(), origin));
  const std::size_t k = std::min(dist.sample(rng), others);
  while (flags.size() < k + 1) {
    const ClassifierIndex c = active[rng.below(active.size())];
    if (std::find(flags.begin(), flags.end(), c) == flags.end()) flags.push_back(c);
  }
  std::sort(flags.begin(), flags.end());
  return flags;
}

/// Flag sets for a batch of observations, one per origin.
inline std::vector<FlagSet> assign_overlap(std::span<const ClassifierIndex> origins,
                                           std::span<const ClassifierIndex> active, const OverlapDistribution& dist,
                                           Rng& rng) {
  std::vector<FlagSet> out;
  out.reserve(origins.size());
  for (auto o : origins) out.push_back(assign_overlap(o, active, dist, rng));
  return out;
}

struct ScheduleWindow {
  int start_day = 0;
  int end_day = 0;
};

struct FilterResult {
  std::vector<SignatureLifecycle> kept;
  std::size_t dropped_short = 0;
  std::size_t dropped_outside_window = 0;
};

/// Drops short-lived signatures and those introduced or removed outside the window.
inline FilterResult filter_schedule(std::vector<SignatureLifecycle> raw, const ScheduleWindow& window,
                                    int min_lifespan_days = 7) {
  FilterResult out;
  for (auto& lc : raw) {
    if (lc.lifespan() < min_lifespan_days) {
      ++out.dropped_short;
    } else if (lc.intro_day < window.start_day || lc.removal_day > window.end_day) {
      ++out.dropped_outside_window;
    } else {
      out.kept.push_back(std::move(lc));
    }
  }
  return out;
}

}  // namespace ratetune

#endif  // RATETUNE_TRACE_GEN_HPP
