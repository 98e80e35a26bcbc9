#ifndef RATETUNE_SIM_DRIVER_HPP
#define RATETUNE_SIM_DRIVER_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ratetune/batch_select.hpp"
#include "ratetune/core_model.hpp"
#include "ratetune/metrics.hpp"
#include "ratetune/rate_inference.hpp"
#include "ratetune/rng.hpp"
#include "ratetune/trace_gen.hpp"

namespace ratetune {

struct SimConfig {
  double theta = 0.1;
  double beta = 1.0;
  bool overlap_enabled = true;
  OverlapDistribution overlap;
  int update_period_days = 3;
  WeightPolicy weight_policy = weighting::Exponential{1.0, 0.9};
  MinRatePolicy min_rate_policy;
  Normalization normalization = Normalization::conventional;
  std::uint64_t seed = 1;

  // Trace shape.
  double initial_count = 500.0;
  double decay_floor = 1.0;
  double update_bump = 1.5;
  bool jitter = true;

  InferenceConfig inference;
  Replication replication = Replication::single;
  /// Training samples whose weight drops below this are forgotten.
  double prune_weight = 1e-6;
  /// Wall-clock solve times are recorded only when set; they are the one
  /// nondeterministic output.
  bool record_timing = true;
  /// Keep per-update decisions and pre-floor rates in the report.
  bool keep_update_details = false;

  void validate() const {
    if (update_period_days < 1) throw std::invalid_argument("update period must be at least 1 day");
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must be in [0,1]");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
    if (!(initial_count > decay_floor && decay_floor > 0.0))
      throw std::invalid_argument("initial count must exceed a positive decay floor");
    if (!(update_bump >= 1.0)) throw std::invalid_argument("update bump must be at least 1");
    if (!(prune_weight >= 0.0 && prune_weight < 1.0)) throw std::invalid_argument("prune weight must be in [0,1)");
    ratetune::validate(weight_policy);
    min_rate_policy.validate();
    inference.validate();
  }
};

struct DayRow {
  int day = 0;
  std::size_t active_signatures = 0;
  std::int64_t tp_generated = 0;
  std::int64_t fp_generated = 0;
  std::int64_t tp_caught = 0;
  std::int64_t fp_raised = 0;
  bool update_performed = false;
  std::optional<double> select_ms;
  std::optional<double> infer_ms;
  bool fallback_used = false;
};

struct UpdateRecord {
  int day = 0;
  std::size_t batches = 0;
  bool overlap_present = false;
  bool inference_run = false;
  bool converged = true;
  bool fallback = false;
  int iterations = 0;
  std::optional<double> select_ms;
  std::optional<double> infer_ms;
  /// Training-set confusion of the rates in force after the update.
  std::optional<ConfusionRates> training_confusion;

  // Filled when keep_update_details is set.
  std::vector<Batch> decided_batches;
  std::vector<std::pair<ClassifierIndex, double>> pre_floor_rates;  // active signatures only
};

struct SimReport {
  double theta = 0.0;
  double beta = 0.0;
  bool overlap = false;
  std::vector<DayRow> days;
  std::vector<UpdateRecord> updates;
  std::size_t fallback_count = 0;
};

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t base, double theta, double beta, bool overlap) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "cell:%.17g:%.17g:%d", theta, beta, overlap ? 1 : 0);
  return derive_seed(base, std::string_view(buf));
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Folds samples with identical (flags, label) together. Sums of weight * multiplicity
// are preserved, so this is exact for policies that never look at sample age.
inline ObservationDataset compact(const ObservationDataset& data) {
  std::map<std::pair<FlagSet, bool>, std::pair<double, double>> merged;  // -> (weighted mass, multiplicity)
  for (const auto& s : data) {
    auto& [mass, mult] = merged[{s.flags, s.malicious}];
    mass += s.weight * s.multiplicity;
    mult += s.multiplicity;
  }
  ObservationDataset out;
  out.reserve(merged.size());
  for (auto& [key, m] : merged) {
    if (m.second <= 0.0) continue;
    Sample s;
    s.flags = key.first;
    s.malicious = key.second;
    s.multiplicity = m.second;
    s.weight = std::min(1.0, m.first / m.second);
    out.push_back(std::move(s));
  }
  return out;
}

class Simulation {
 public:
  Simulation(const std::vector<SignatureLifecycle>& schedule, const SimConfig& cfg)
      : schedule_(schedule),
        cfg_(cfg),
        overlap_rng_(derive_seed(cfg.seed, "overlap")),
        thin_rng_(derive_seed(cell_seed(cfg.seed, cfg.theta, cfg.beta, cfg.overlap_enabled), "thin")) {
    const std::size_t n = schedule.size();
    std::vector<Classifier> cs;
    cs.reserve(n);
    tp_.reserve(n);
    fp_.reserve(n);
    for (const auto& lc : schedule) {
      cs.push_back({lc.signature_id, 0.0, lc.severity});
      const int malware_days = lc.malware_disappear_day - lc.malware_appear_day;
      Rng rng(derive_seed(cfg.seed, lc.signature_id));
      if (malware_days >= 2) {
        const auto curve = calibrate_decay(cfg.initial_count, malware_days, cfg.decay_floor);
        tp_.push_back(generate_tp_trace(lc, curve, {cfg.update_bump, cfg.jitter}, rng));
      } else {
        tp_.push_back({});
      }
      fp_.push_back(generate_fp_trace(tp_.back(), lc, cfg.theta));
    }
    if (!cs.empty()) {
      classifiers_.emplace(std::move(cs));
      cfg_.min_rate_policy.validate(*classifiers_);
    }
    rates_.assign(n, 1.0);
  }

  SimReport run() {
    SimReport report;
    report.theta = cfg_.theta;
    report.beta = cfg_.beta;
    report.overlap = cfg_.overlap_enabled;
    if (schedule_.empty()) return report;

    int first = schedule_.front().intro_day, last = schedule_.front().removal_day;
    for (const auto& lc : schedule_) {
      first = std::min(first, lc.intro_day);
      last = std::max(last, lc.removal_day);
    }

    std::vector<ClassifierIndex> active;
    for (int day = first; day < last; ++day) {
      active.clear();
      for (std::size_t i = 0; i < schedule_.size(); ++i) {
        if (!schedule_[i].active_on(day)) continue;
        active.push_back(i);
        if (schedule_[i].intro_day == day) rates_[i] = 1.0;
      }

      DayRow row;
      row.day = day;
      row.active_signatures = active.size();
      if (day > first && (day - first) % cfg_.update_period_days == 0) {
        row.update_performed = true;
        auto rec = update(day, active);
        row.select_ms = rec.select_ms;
        row.infer_ms = rec.infer_ms;
        row.fallback_used = rec.fallback;
        if (rec.fallback) ++report.fallback_count;
        report.updates.push_back(std::move(rec));
      }
      observe(day, active, row);
      report.days.push_back(row);
    }
    return report;
  }

 private:
  void observe(int day, const std::vector<ClassifierIndex>& active, DayRow& row) {
    std::map<std::pair<FlagSet, bool>, double> caught;
    for (auto origin : active) {
      const std::int64_t counts[2] = {fp_[origin].at(day), tp_[origin].at(day)};
      for (int malicious = 1; malicious >= 0; --malicious) {
        const std::int64_t count = counts[malicious];
        (malicious ? row.tp_generated : row.fp_generated) += count;
        for (std::int64_t k = 0; k < count; ++k) {
          FlagSet flags = cfg_.overlap_enabled ? assign_overlap(origin, active, cfg_.overlap, overlap_rng_)
                                               : FlagSet{origin};
          bool hit = false;
          for (auto c : flags) hit = thin_rng_.bernoulli(rates_[c]) || hit;
          if (!hit) continue;
          (malicious ? row.tp_caught : row.fp_raised) += 1;
          caught[{std::move(flags), malicious == 1}] += 1.0;
        }
      }
    }
    const double w0 = initial_weight(cfg_.weight_policy);
    for (auto& [key, count] : caught) {
      Sample s;
      s.flags = key.first;
      s.malicious = key.second;
      s.weight = w0;
      s.ingestion_day = day;
      s.multiplicity = count;
      store_.push_back(std::move(s));
    }
  }

  UpdateRecord update(int day, const std::vector<ClassifierIndex>& active) {
    using clock = std::chrono::steady_clock;
    UpdateRecord rec;
    rec.day = day;
    const std::size_t n = schedule_.size();

    store_ = apply_weight_policy(std::move(store_), cfg_.weight_policy, day, SamplingVector(rates_));
    std::vector<bool> is_active(n, false);
    for (auto i : active) is_active[i] = true;
    ObservationDataset kept;
    kept.reserve(store_.size());
    for (auto& s : store_) {
      if (s.weight < cfg_.prune_weight || s.weight <= 0.0) continue;
      std::erase_if(s.flags, [&](ClassifierIndex c) { return !is_active[c]; });
      if (s.flags.empty()) continue;
      kept.push_back(std::move(s));
    }
    const bool age_free = std::holds_alternative<weighting::None>(cfg_.weight_policy) ||
                          std::holds_alternative<weighting::Exponential>(cfg_.weight_policy);
    store_ = age_free ? compact(kept) : std::move(kept);

    const auto t_select = clock::now();
    auto partition = partition_batches(store_);
    SelectionProblem problem;
    problem.batches = std::move(partition.batches);
    problem.objective = objective::Budget{cfg_.beta};
    const auto selection = select_batches(problem);
    const auto batches = with_decisions(std::move(problem.batches), selection);
    if (cfg_.record_timing) rec.select_ms = ms_since(t_select);
    rec.batches = batches.size();
    rec.overlap_present = std::any_of(batches.begin(), batches.end(), [](const auto& b) { return b.key.size() > 1; });

    const auto t_infer = clock::now();
    std::optional<SamplingVector> inferred;
    const bool all_enabled = std::all_of(batches.begin(), batches.end(), [](const auto& b) { return *b.enabled; });
    if (!rec.overlap_present) {
      inferred = decisions_to_rates_no_overlap(batches, n);
    } else if (all_enabled) {
      // All-true evidence: the fixed point is full sampling everywhere.
      inferred = SamplingVector::constant(n, 1.0);
    } else {
      rec.inference_run = true;
      try {
        const auto graph = build_factor_graph(batches, n, cfg_.replication);
        const auto result = infer_rates(graph, cfg_.inference);
        rec.converged = result.converged;
        rec.iterations = result.iterations;
        if (result.converged) {
          std::vector<bool> touched(n, false);
          for (const auto& b : batches)
            for (auto c : b.key) touched[c] = true;
          auto r = result.marginals;
          for (std::size_t i = 0; i < n; ++i)
            if (!touched[i]) r[i] = 1.0;
          inferred = SamplingVector(std::move(r));
        }
      } catch (const inference_timeout&) {
        rec.converged = false;
      } catch (const numerical_collapse&) {
        rec.converged = false;
      }
    }
    if (cfg_.record_timing) rec.infer_ms = rec.inference_run ? ms_since(t_infer) : 0.0;

    if (!inferred) {
      rec.fallback = true;
    } else {
      const auto floored = apply_min_rate(*inferred, cfg_.min_rate_policy, *classifiers_);
      for (auto i : active) rates_[i] = floored[i];
      if (cfg_.keep_update_details) {
        rec.decided_batches = batches;
        for (auto i : active) rec.pre_floor_rates.emplace_back(i, (*inferred)[i]);
      }
    }
    try {
      rec.training_confusion = confusion_rates(store_, SamplingVector(rates_), cfg_.normalization);
    } catch (const degenerate_denominator&) {
    }
    return rec;
  }

  const std::vector<SignatureLifecycle>& schedule_;
  SimConfig cfg_;
  std::optional<ClassifierSet> classifiers_;
  std::vector<DailyCounts> tp_, fp_;
  std::vector<double> rates_;
  ObservationDataset store_;
  Rng overlap_rng_;
  Rng thin_rng_;
};

}  // namespace detail

/// Replays `schedule` day by day, re-optimizing rates every update period.
///
/// Each day every active signature emits its TP and FP observations; an
/// observation is caught when at least one flagging classifier samples it,
/// and caught observations join the labelled training set. On update days the
/// training set is reweighted, batched, selected against FP + beta * FN and
/// turned into rates (directly without overlap, by inference with it). Failed
/// inference keeps the previous rates.
inline SimReport run_simulation(const std::vector<SignatureLifecycle>& schedule, const SimConfig& config) {
  config.validate();
  std::map<std::string, int> ids;
  for (const auto& lc : schedule)
    if (++ids[lc.signature_id] > 1) throw std::invalid_argument("duplicate signature id '" + lc.signature_id + "'");
  return detail::Simulation(schedule, config).run();
}

struct GridConfig {
  SimConfig base;
  std::vector<double> thetas;
  std::vector<double> betas;
  std::vector<bool> overlaps;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// One independent simulation per (overlap, theta, beta) cell, in that nesting order.
inline std::vector<SimReport> sweep(const std::vector<SignatureLifecycle>& schedule, const GridConfig& grid) {
  if (grid.thetas.empty() || grid.betas.empty() || grid.overlaps.empty())
    throw std::invalid_argument("sweep grid must be nonempty");
  std::vector<SimConfig> cells;
  for (bool overlap : grid.overlaps)
    for (double theta : grid.thetas)
      for (double beta : grid.betas) {
        SimConfig c = grid.base;
        c.theta = theta;
        c.beta = beta;
        c.overlap_enabled = overlap;
        c.validate();
        cells.push_back(std::move(c));
      }

  std::vector<SimReport> reports(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) reports[i] = run_simulation(schedule, cells[i]);
  };
  unsigned threads = grid.threads ? grid.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return reports;
}

struct Summary {
  double theta = 0.0;
  double beta = 0.0;
  bool overlap = false;
  std::int64_t tp_total = 0;
  std::int64_t fp_total = 0;
  std::int64_t tp_caught = 0;
  std::int64_t fp_raised = 0;
  std::optional<double> tp_remaining_pct;
  std::optional<double> fp_remaining_pct;
  std::optional<double> tp_removed_pct;
  std::optional<double> fp_removed_pct;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> median_solve_ms;
  std::optional<double> p80_solve_ms;
  std::optional<double> p98_solve_ms;
  std::optional<double> max_solve_ms;
  std::size_t fallback_count = 0;
};

/// Nearest-rank percentile of an ascending-sorted sample; q in (0, 1].
inline double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Per-update solve times (selection + inference), in milliseconds.
inline std::vector<double> solve_times_ms(const SimReport& report) {
  std::vector<double> out;
  for (const auto& u : report.updates)
    if (u.select_ms && u.infer_ms) out.push_back(*u.select_ms + *u.infer_ms);
  return out;
}

inline Summary summarize(const SimReport& report) {
  Summary s;
  s.theta = report.theta;
  s.beta = report.beta;
  s.overlap = report.overlap;
  s.fallback_count = report.fallback_count;
  for (const auto& d : report.days) {
    s.tp_total += d.tp_generated;
    s.fp_total += d.fp_generated;
    s.tp_caught += d.tp_caught;
    s.fp_raised += d.fp_raised;
  }
  auto pct = [](std::int64_t part, std::int64_t whole) -> std::optional<double> {
    if (whole <= 0) return std::nullopt;
    return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
  };
  s.tp_remaining_pct = pct(s.tp_caught, s.tp_total);
  s.fp_remaining_pct = pct(s.fp_raised, s.fp_total);
  s.tp_removed_pct = pct(s.tp_total - s.tp_caught, s.tp_total);
  s.fp_removed_pct = pct(s.fp_total - s.fp_raised, s.fp_total);
  if (s.tp_caught + s.fp_raised > 0)
    s.precision = static_cast<double>(s.tp_caught) / static_cast<double>(s.tp_caught + s.fp_raised);
  if (s.tp_total > 0) s.recall = static_cast<double>(s.tp_caught) / static_cast<double>(s.tp_total);

  auto times = solve_times_ms(report);
  if (!times.empty()) {
    std::sort(times.begin(), times.end());
    s.median_solve_ms = percentile(times, 0.5);
    s.p80_solve_ms = percentile(times, 0.8);
    s.p98_solve_ms = percentile(times, 0.98);
    s.max_solve_ms = times.back();
  }
  return s;
}

}  // namespace ratetune

#endif  // RATETUNE_SIM_DRIVER_HPP
