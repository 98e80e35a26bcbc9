#ifndef RATETUNE_METRICS_HPP
#define RATETUNE_METRICS_HPP

#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratetune/core_model.hpp"
#include "ratetune/errors.hpp"

namespace ratetune {

/// Probability that at least one flagging classifier samples the entry:
/// 1 - prod_j (1 - rate_j). Zero for an empty flag set.
inline double exploitation_probability(std::span<const ClassifierIndex> flags, const SamplingVector& rates) {
  double miss = 1.0;
  for (auto j : flags) miss *= 1.0 - rates[j];
  return 1.0 - miss;
}

/// paper_exact keeps the published denominators (FP over the positive mass,
/// FN over the negative mass); conventional divides each rate by its own class.
enum class Normalization { paper_exact, conventional };

struct ConfusionRates {
  double tp = 0.0;
  double fp = 0.0;
  double tn = 0.0;
  double fn = 0.0;
  Normalization normalization = Normalization::conventional;
};

/// Weighted confusion rates induced by `rates` on `dataset`.
/// Throws degenerate_denominator when either class has zero weighted mass.
inline ConfusionRates confusion_rates(const ObservationDataset& dataset, const SamplingVector& rates,
                                      Normalization normalization = Normalization::conventional) {
  double pos = 0.0, neg = 0.0;
  double tp = 0.0, fp = 0.0, tn = 0.0, fn = 0.0;
  for (const auto& s : dataset) {
    const double w = s.weight * s.multiplicity;
    const double pr = exploitation_probability(s.flags, rates);
    if (s.malicious) {
      pos += w;
      tp += w * pr;
      fn += w * (1.0 - pr);
    } else {
      neg += w;
      fp += w * pr;
      tn += w * (1.0 - pr);
    }
  }
  if (pos <= 0.0) throw degenerate_denominator("no weighted malicious samples");
  if (neg <= 0.0) throw degenerate_denominator("no weighted benign samples");

  ConfusionRates out;
  out.normalization = normalization;
  out.tp = tp / pos;
  out.tn = tn / neg;
  if (normalization == Normalization::paper_exact) {
    out.fp = fp / pos;
    out.fn = fn / neg;
  } else {
    out.fp = fp / neg;
    out.fn = fn / pos;
  }
  return out;
}

/// Expected per-entry scan cost, sum_j cost_j * rate_j.
inline double scan_cost(const SamplingVector& rates, const ClassifierSet& classifiers) {
  if (rates.size() != classifiers.size()) throw std::invalid_argument("scan_cost: length mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < rates.size(); ++j) total += classifiers[j].scan_cost * rates[j];
  return total;
}

inline double expenses(const ConfusionRates& confusion, const CostModel& cost) {
  return cost.cost_fn() * confusion.fn + cost.cost_fp() * confusion.fp;
}

/// 2 * tp * fp / (tp + fp), composed from the TP and FP rates as published.
inline double f1_sr(double tp, double fp) {
  if (tp + fp == 0.0) throw std::domain_error("f1_sr: tp + fp is zero");
  return 2.0 * (tp * fp) / (tp + fp);
}

struct GoalViolation {
  std::string goal;  // "TP", "TN", "FP", "FN" or "Cost"
  double value;
  double threshold;

  /// Distance by which the threshold is missed (always positive).
  double margin() const { return value > threshold ? value - threshold : threshold - value; }

  std::string message() const {
    const char* dir = (goal == "TP" || goal == "TN") ? "falls below" : "exceeds";
    const char* sym = goal == "TP" ? "X_p" : goal == "TN" ? "X_n" : goal == "FP" ? "Y_p" : goal == "FN" ? "Y_n" : "Z";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %s %s by %g", goal.c_str(), dir, sym, margin());
    return buf;
  }
};

/// All violated thresholds; empty means every present goal holds.
inline std::vector<GoalViolation> check_goals(const ConfusionRates& c, double cost, const Goals& goals) {
  std::vector<GoalViolation> out;
  if (goals.tp_min && c.tp < *goals.tp_min) out.push_back({"TP", c.tp, *goals.tp_min});
  if (goals.tn_min && c.tn < *goals.tn_min) out.push_back({"TN", c.tn, *goals.tn_min});
  if (goals.fp_max && c.fp > *goals.fp_max) out.push_back({"FP", c.fp, *goals.fp_max});
  if (goals.fn_max && c.fn > *goals.fn_max) out.push_back({"FN", c.fn, *goals.fn_max});
  if (goals.cost_max && cost > *goals.cost_max) out.push_back({"Cost", cost, *goals.cost_max});
  return out;
}

}  // namespace ratetune

#endif  // RATETUNE_METRICS_HPP
