#ifndef RATETUNE_CORE_MODEL_HPP
#define RATETUNE_CORE_MODEL_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace ratetune {

using ClassifierIndex = std::size_t;

/// Sorted, duplicate-free list of classifier indices.
using FlagSet = std::vector<ClassifierIndex>;

inline FlagSet make_flag_set(std::vector<ClassifierIndex> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return indices;
}

struct Classifier {
  std::string id;
  double scan_cost = 0.0;
  int severity = 1;
};

/// The ensemble under tuning. Validated on construction; immutable afterwards.
class ClassifierSet {
 public:
  explicit ClassifierSet(std::vector<Classifier> classifiers) : classifiers_(std::move(classifiers)) {
    if (classifiers_.empty()) throw std::invalid_argument("classifier set must not be empty");
    std::set<std::string> seen;
    for (const auto& c : classifiers_) {
      if (!seen.insert(c.id).second) throw std::invalid_argument("duplicate classifier id '" + c.id + "'");
      if (!(c.scan_cost >= 0.0)) throw std::invalid_argument("negative scan cost for '" + c.id + "'");
      if (c.severity < 0) throw std::invalid_argument("negative severity for '" + c.id + "'");
    }
  }

  /// `count` classifiers named c0..c{count-1} with zero cost and severity 1.
  static ClassifierSet uniform(std::size_t count, double scan_cost = 0.0) {
    std::vector<Classifier> cs;
    cs.reserve(count);
    for (std::size_t j = 0; j < count; ++j) cs.push_back({"c" + std::to_string(j), scan_cost, 1});
    return ClassifierSet(std::move(cs));
  }

  std::size_t size() const noexcept { return classifiers_.size(); }
  const Classifier& operator[](std::size_t j) const { return classifiers_[j]; }
  auto begin() const noexcept { return classifiers_.begin(); }
  auto end() const noexcept { return classifiers_.end(); }

 private:
  std::vector<Classifier> classifiers_;
};

/// One labelled observation (or `multiplicity` identical ones).
struct Sample {
  bool malicious = false;
  FlagSet flags;
  double weight = 1.0;
  int ingestion_day = 0;
  double multiplicity = 1.0;
};

using ObservationDataset = std::vector<Sample>;

/// Per-classifier sampling rates, each in [0, 1].
class SamplingVector {
 public:
  SamplingVector() = default;

  explicit SamplingVector(std::vector<double> rates) : rates_(std::move(rates)) {
    for (std::size_t j = 0; j < rates_.size(); ++j) {
      if (!(rates_[j] >= 0.0 && rates_[j] <= 1.0))
        throw std::invalid_argument("sampling rate " + std::to_string(j) + " outside [0,1]");
    }
  }

  static SamplingVector constant(std::size_t n, double rate) {
    return SamplingVector(std::vector<double>(n, rate));
  }

  std::size_t size() const noexcept { return rates_.size(); }
  double operator[](std::size_t j) const { return rates_[j]; }
  std::span<const double> values() const noexcept { return rates_; }

  /// Copy with component j replaced.
  SamplingVector with(std::size_t j, double rate) const {
    auto r = rates_;
    r.at(j) = rate;
    return SamplingVector(std::move(r));
  }

  friend bool operator==(const SamplingVector&, const SamplingVector&) = default;

 private:
  std::vector<double> rates_;
};

/// Optional thresholds on the induced rates and on scan cost.
struct Goals {
  std::optional<double> tp_min;
  std::optional<double> tn_min;
  std::optional<double> fp_max;
  std::optional<double> fn_max;
  std::optional<double> cost_max;

  bool empty() const noexcept { return !tp_min && !tn_min && !fp_max && !fn_max && !cost_max; }

  void validate() const {
    for (const auto& v : {tp_min, tn_min, fp_max, fn_max, cost_max})
      if (v && !(*v >= 0.0)) throw std::invalid_argument("goal thresholds must be nonnegative");
  }
};

/// Costs of a false negative and a false positive. beta is their ratio.
class CostModel {
 public:
  CostModel(double cost_fn, double cost_fp) : cost_fn_(cost_fn), cost_fp_(cost_fp) {
    if (!(cost_fn >= 0.0) || !(cost_fp >= 0.0)) throw std::invalid_argument("costs must be nonnegative");
  }

  static CostModel from_beta(double beta) { return CostModel(beta, 1.0); }

  double cost_fn() const noexcept { return cost_fn_; }
  double cost_fp() const noexcept { return cost_fp_; }

  /// cost_fn / cost_fp; infinite when false positives are free but misses are not.
  double beta() const noexcept {
    if (cost_fp_ > 0.0) return cost_fn_ / cost_fp_;
    return cost_fn_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }

 private:
  double cost_fn_;
  double cost_fp_;
};

enum class MinRateForm { lower_bound, additive, proportional };

/// Severity-driven floor on inferred sampling rates.
struct MinRatePolicy {
  MinRateForm form = MinRateForm::lower_bound;
  std::map<int, double> by_severity;
  std::optional<double> default_value = 0.0;

  double value_for(int severity) const {
    if (auto it = by_severity.find(severity); it != by_severity.end()) return it->second;
    if (default_value) return *default_value;
    throw std::out_of_range("no minimum rate for severity " + std::to_string(severity));
  }

  void validate() const {
    auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (const auto& [sev, v] : by_severity)
      if (!ok(v)) throw std::invalid_argument("minimum rate for severity " + std::to_string(sev) + " outside [0,1]");
    if (default_value && !ok(*default_value)) throw std::invalid_argument("default minimum rate outside [0,1]");
  }

  void validate(const ClassifierSet& classifiers) const {
    validate();
    for (const auto& c : classifiers) (void)value_for(c.severity);
  }
};

namespace weighting {

struct None {};

/// Zero weight for samples older than max_age_days.
struct DropOld {
  int max_age_days = 30;
};

/// New samples enter with w0; every application multiplies all weights by delta.
struct Exponential {
  double w0 = 1.0;
  double delta = 0.9;
};

/// Weights inversely proportional to the mean rate of the flagging classifiers.
struct InverseRate {};

}  // namespace weighting

using WeightPolicy = std::variant<weighting::None, weighting::DropOld, weighting::Exponential, weighting::InverseRate>;

inline void validate(const WeightPolicy& policy) {
  if (const auto* d = std::get_if<weighting::DropOld>(&policy); d && d->max_age_days < 0)
    throw std::invalid_argument("drop_old max age must be nonnegative");
  if (const auto* e = std::get_if<weighting::Exponential>(&policy)) {
    if (!(e->w0 > 0.0 && e->w0 <= 1.0)) throw std::invalid_argument("exponential w0 must be in (0,1]");
    if (!(e->delta > 0.0 && e->delta < 1.0)) throw std::invalid_argument("exponential delta must be in (0,1)");
  }
}

/// Weight given to a sample when it enters the dataset.
inline double initial_weight(const WeightPolicy& policy) {
  if (const auto* e = std::get_if<weighting::Exponential>(&policy)) return e->w0;
  return 1.0;
}

struct DatasetViolation {
  std::size_t sample;
  std::string message;
};

/// Every invariant violation in `dataset`; empty means the dataset is usable.
inline std::vector<DatasetViolation> validate_dataset(const ObservationDataset& dataset,
                                                      const ClassifierSet& classifiers) {
  std::vector<DatasetViolation> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    for (auto j : s.flags) {
      if (j >= classifiers.size()) {
        out.push_back({i, "flag index out of range"});
        break;
      }
    }
    if (!std::is_sorted(s.flags.begin(), s.flags.end()) ||
        std::adjacent_find(s.flags.begin(), s.flags.end()) != s.flags.end())
      out.push_back({i, "flags not sorted and unique"});
    if (!(s.weight >= 0.0 && s.weight <= 1.0)) out.push_back({i, "weight out of range"});
    if (!(s.multiplicity >= 0.0)) out.push_back({i, "multiplicity negative"});
  }
  return out;
}

/// Returns a reweighted copy of `dataset`.
///
/// `rates` is only consulted by the inverse-rate policy. For that policy the
/// reference rate of a sample is the mean rate over its flagging classifiers;
/// weights are min_ref / ref, so samples of the least-sampled classifiers get
/// weight 1. A sample touching a zero-rate classifier (or no classifier) gets 1.
inline ObservationDataset apply_weight_policy(ObservationDataset dataset, const WeightPolicy& policy, int current_day,
                                              const SamplingVector& rates = {}) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, weighting::DropOld>) {
          for (auto& s : dataset)
            if (current_day - s.ingestion_day > p.max_age_days) s.weight = 0.0;
        } else if constexpr (std::is_same_v<P, weighting::Exponential>) {
          for (auto& s : dataset) s.weight *= p.delta;
        } else if constexpr (std::is_same_v<P, weighting::InverseRate>) {
          std::vector<double> ref(dataset.size(), 0.0);
          double min_ref = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < dataset.size(); ++i) {
            const auto& flags = dataset[i].flags;
            if (flags.empty()) continue;
            double sum = 0.0;
            bool any_zero = false;
            for (auto j : flags) {
              const double a = j < rates.size() ? rates[j] : 1.0;
              any_zero = any_zero || a == 0.0;
              sum += a;
            }
            if (any_zero) continue;
            ref[i] = sum / static_cast<double>(flags.size());
            min_ref = std::min(min_ref, ref[i]);
          }
          for (std::size_t i = 0; i < dataset.size(); ++i)
            dataset[i].weight = ref[i] > 0.0 ? std::min(1.0, min_ref / ref[i]) : 1.0;
        }
      },
      policy);
  return dataset;
}

}  // namespace ratetune

#endif  // RATETUNE_CORE_MODEL_HPP
