// Independent reference implementations for the test and selftest suites.
// Nothing here calls into the code it is meant to check.
#ifndef RATETUNE_VERIFY_ORACLES_HPP
#define RATETUNE_VERIFY_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "ratetune/batch_select.hpp"
#include "ratetune/core_model.hpp"
#include "ratetune/metrics.hpp"

namespace oracle {

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct MonteCarloConfusion {
  Estimate tp, fp, tn, fn;
};

// Simulates `trials` independent sampling rounds per sample. A sample is
// caught in a round when any flagging classifier draws below its rate.
inline std::vector<std::uint64_t> catch_counts(const ratetune::ObservationDataset& data,
                                               const std::vector<double>& rates, std::uint64_t trials,
                                               std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint64_t> hits(data.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& flags = data[i].flags;
    if (flags.empty()) continue;
    std::uint64_t h = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      for (auto j : flags) {
        if (u(gen) < rates[j]) {
          ++h;
          break;
        }
      }
    }
    hits[i] = h;
  }
  return hits;
}

// Monte-Carlo estimate of the weighted confusion rates with standard errors.
// Samples are independent, so the variance of each ratio is the weighted sum
// of per-sample Bernoulli variances.
inline MonteCarloConfusion monte_carlo_confusion(const ratetune::ObservationDataset& data,
                                                 const std::vector<double>& rates, std::uint64_t trials,
                                                 std::uint64_t seed, bool published_denominators = false) {
  const auto hits = catch_counts(data, rates, trials, seed);
  double pos = 0.0, neg = 0.0;
  for (const auto& s : data) (s.malicious ? pos : neg) += s.weight * s.multiplicity;
  const double tp_den = pos, tn_den = neg;
  const double fp_den = published_denominators ? pos : neg;
  const double fn_den = published_denominators ? neg : pos;

  double tp = 0, fp = 0, tn = 0, fn = 0, var_pos = 0, var_neg = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data[i].weight * data[i].multiplicity;
    const double p = static_cast<double>(hits[i]) / static_cast<double>(trials);
    const double v = w * w * p * (1.0 - p) / static_cast<double>(trials);
    if (data[i].malicious) {
      tp += w * p;
      fn += w * (1.0 - p);
      var_pos += v;
    } else {
      fp += w * p;
      tn += w * (1.0 - p);
      var_neg += v;
    }
  }
  MonteCarloConfusion out;
  out.tp = {tp / tp_den, std::sqrt(var_pos) / tp_den};
  out.fn = {fn / fn_den, std::sqrt(var_pos) / fn_den};
  out.fp = {fp / fp_den, std::sqrt(var_neg) / fp_den};
  out.tn = {tn / tn_den, std::sqrt(var_neg) / tn_den};
  return out;
}

inline Estimate monte_carlo_exploitation(const std::vector<ratetune::ClassifierIndex>& flags,
                                         const std::vector<double>& rates, std::uint64_t trials, std::uint64_t seed) {
  ratetune::ObservationDataset one{{true, flags, 1.0, 0, 1.0}};
  const double p = static_cast<double>(catch_counts(one, rates, trials, seed)[0]) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

// Natural-unit objective of one assignment, computed from the problem
// definition directly. Values are ordered so that smaller is better after
// multiplying by `sense`.
struct Evaluation {
  std::vector<double> values;
  std::vector<double> sense;
  bool feasible = true;
};

inline Evaluation evaluate(const ratetune::SelectionProblem& p, const std::vector<bool>& enabled) {
  namespace obj = ratetune::objective;
  double e_tp = 0, e_fp = 0, d_tp = 0, d_fp = 0;
  for (std::size_t i = 0; i < enabled.size(); ++i) {
    if (enabled[i]) {
      e_tp += p.batches[i].tp_mass;
      e_fp += p.batches[i].fp_mass;
    } else {
      d_tp += p.batches[i].tp_mass;
      d_fp += p.batches[i].fp_mass;
    }
  }
  const double all_tp = p.totals ? p.totals->tp : e_tp + d_tp;
  const double all_fp = p.totals ? p.totals->fp : e_fp + d_fp;
  auto frac = [](double x, double total) { return total > 0 ? x / total : 0.0; };
  const double tp = frac(e_tp, all_tp), fp = frac(e_fp, all_fp);
  const double fn = all_tp > 0 ? 1.0 - tp : 0.0, tn = all_fp > 0 ? 1.0 - fp : 0.0;

  Evaluation ev;
  if (const auto* b = std::get_if<obj::Budget>(&p.objective)) {
    double s_fp = 0, s_tp = 0;
    for (std::size_t i = 0; i < enabled.size(); ++i) {
      if (enabled[i]) s_fp += p.batches[i].fp_mass;
      else s_tp += p.batches[i].tp_mass;
    }
    ev.values = {s_fp + b->beta * s_tp};
    ev.sense = {1.0};
  } else if (const auto* e = std::get_if<obj::Expenses>(&p.objective)) {
    ev.values = {e->cost.cost_fn() * fn + e->cost.cost_fp() * fp};
    ev.sense = {1.0};
  } else if (std::holds_alternative<obj::F1sr>(p.objective)) {
    ev.values = {tp + fp > 0 ? 2.0 * tp * fp / (tp + fp) : 0.0};
    ev.sense = {-1.0};
  } else {
    for (auto c : std::get<obj::Prioritized>(p.objective).order) {
      switch (c) {
        case obj::Criterion::maximize_tp: ev.values.push_back(tp); ev.sense.push_back(-1.0); break;
        case obj::Criterion::maximize_tn: ev.values.push_back(tn); ev.sense.push_back(-1.0); break;
        case obj::Criterion::minimize_fp: ev.values.push_back(fp); ev.sense.push_back(1.0); break;
        case obj::Criterion::minimize_fn: ev.values.push_back(fn); ev.sense.push_back(1.0); break;
      }
    }
  }
  if (p.constraints) {
    const auto& g = *p.constraints;
    if (g.tp_min && tp < *g.tp_min) ev.feasible = false;
    if (g.tn_min && tn < *g.tn_min) ev.feasible = false;
    if (g.fp_max && fp > *g.fp_max) ev.feasible = false;
    if (g.fn_max && fn > *g.fn_max) ev.feasible = false;
  }
  return ev;
}

struct Enumerated {
  std::vector<bool> enabled;
  std::vector<double> values;
};

// Best assignment over all 2^n choices; nullopt when none is feasible.
// Ties keep the first assignment found in counting order.
inline std::optional<Enumerated> enumerate_selection(const ratetune::SelectionProblem& p) {
  const std::size_t n = p.batches.size();
  if (n > 24) throw std::length_error("enumeration limited to 24 batches");
  std::optional<Enumerated> best;
  std::vector<double> best_key;
  std::vector<bool> en(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) en[i] = (mask >> i) & 1u;
    auto ev = evaluate(p, en);
    if (!ev.feasible) continue;
    std::vector<double> key(ev.values.size());
    for (std::size_t t = 0; t < key.size(); ++t) key[t] = ev.sense[t] * ev.values[t];
    if (!best || std::lexicographical_compare(key.begin(), key.end(), best_key.begin(), best_key.end())) {
      best = Enumerated{en, ev.values};
      best_key = std::move(key);
    }
  }
  return best;
}

}  // namespace oracle

#endif  // RATETUNE_VERIFY_ORACLES_HPP
