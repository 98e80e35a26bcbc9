#ifndef RATETUNE_RATE_INFERENCE_HPP
#define RATETUNE_RATE_INFERENCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratetune/batch_select.hpp"
#include "ratetune/core_model.hpp"
#include "ratetune/errors.hpp"

namespace ratetune {

/// Observation S == OR(classifiers), repeated `repetition` times.
struct Factor {
  std::vector<ClassifierIndex> classifiers;
  bool observed = true;
  double repetition = 1.0;
};

/// Bipartite graph between classifier enable variables and observed samples.
struct FactorGraph {
  std::size_t classifier_count = 0;
  std::vector<Factor> factors;

  std::size_t variable_count() const noexcept { return classifier_count + factors.size(); }
};

/// How many copies of a batch's factor enter the graph.
enum class Replication {
  single,   // one factor per batch
  weighted  // repetition = batch mass (tp + fp)
};

/// One factor per decided batch; the observation is true iff the batch is enabled.
inline FactorGraph build_factor_graph(std::span<const Batch> batches, std::size_t classifier_count,
                                      Replication replication = Replication::single) {
  FactorGraph g;
  g.classifier_count = classifier_count;
  g.factors.reserve(batches.size());
  for (const auto& b : batches) {
    if (!b.enabled) throw std::invalid_argument("build_factor_graph: batch without a decision");
    if (b.key.empty()) throw std::invalid_argument("build_factor_graph: empty batch key");
    for (auto c : b.key)
      if (c >= classifier_count) throw std::out_of_range("build_factor_graph: classifier index out of range");
    const double rep = replication == Replication::weighted ? b.tp_mass + b.fp_mass : 1.0;
    g.factors.push_back({b.key, *b.enabled, rep});
  }
  return g;
}

/// Plain-text adjacency listing, one factor per line: `F<j> S=<0|1> : C<i1> C<i2> ...`.
inline void write_factor_graph(std::ostream& os, const FactorGraph& g) {
  for (std::size_t j = 0; j < g.factors.size(); ++j) {
    const auto& f = g.factors[j];
    os << 'F' << j << " S=" << (f.observed ? 1 : 0) << " :";
    for (auto c : f.classifiers) os << " C" << c;
    os << '\n';
  }
}

struct InferenceConfig {
  int max_iterations = 200;
  double damping = 0.5;
  double message_floor = 1e-9;
  double tolerance = 1e-7;
  double prior = 0.5;
  std::chrono::milliseconds timeout{60'000};

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("damping must be in [0,1)");
    if (!(message_floor > 0.0 && message_floor < 0.5)) throw std::invalid_argument("message floor must be in (0,0.5)");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (!(prior > 0.0 && prior < 1.0)) throw std::invalid_argument("prior must be in (0,1)");
  }
};

struct InferenceResult {
  std::vector<double> marginals;
  bool converged = false;
  int iterations = 0;
  std::chrono::duration<double> elapsed{};

  SamplingVector rates() const { return SamplingVector(marginals); }
};

namespace detail {

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Approximate posterior P(C_i = true | evidence) by damped loopy sum-product.
///
/// Factor-to-variable messages are normalized, then each component is floored
/// at `message_floor`. A variable caught between a factor that forces it on and
/// one that forces it off therefore receives two opposing messages of equal
/// strength and settles at 0.5 instead of collapsing. The schedule is
/// synchronous: all factors in index order, then all variables.
///
/// Returns converged = false with the last marginals when max_iterations is hit.
/// Throws inference_timeout or numerical_collapse.
inline InferenceResult infer_rates(const FactorGraph& g, const InferenceConfig& cfg = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  const std::size_t n = g.classifier_count;
  std::size_t edges = 0;
  std::vector<std::size_t> offset(g.factors.size() + 1, 0);
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    for (auto c : g.factors[f].classifiers)
      if (c >= n) throw std::out_of_range("infer_rates: classifier index out of range");
    edges += g.factors[f].classifiers.size();
    offset[f + 1] = edges;
  }

  const double eps = cfg.message_floor;
  const double prior_logit = detail::logit(cfg.prior);
  std::vector<double> msg(edges, 0.5);          // factor -> variable, P(C = 1)
  std::vector<double> q0(edges, 1.0 - cfg.prior);  // variable -> factor, P(C = 0)
  std::vector<double> prefix, suffix;

  InferenceResult out;
  out.marginals.assign(n, cfg.prior);
  std::vector<double> field(n);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      const auto& fac = g.factors[f];
      const std::size_t k = fac.classifiers.size(), base = offset[f];
      prefix.assign(k + 1, 1.0);
      suffix.assign(k + 1, 1.0);
      for (std::size_t a = 0; a < k; ++a) prefix[a + 1] = prefix[a] * q0[base + a];
      for (std::size_t a = k; a-- > 0;) suffix[a] = suffix[a + 1] * q0[base + a];
      for (std::size_t a = 0; a < k; ++a) {
        // Raw message (m0, m1): S=true gives (1 - P[others off], 1), S=false gives (P[others off], 0).
        const double others_off = prefix[a] * suffix[a + 1];
        const double fresh = fac.observed ? 1.0 / (2.0 - others_off) : 0.0;
        const double floored = std::clamp(fresh, eps, 1.0 - eps);
        msg[base + a] = cfg.damping * msg[base + a] + (1.0 - cfg.damping) * floored;
      }
    }

    std::fill(field.begin(), field.end(), prior_logit);
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      const auto& fac = g.factors[f];
      for (std::size_t a = 0; a < fac.classifiers.size(); ++a)
        field[fac.classifiers[a]] += fac.repetition * detail::logit(msg[offset[f] + a]);
    }
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      const auto& fac = g.factors[f];
      for (std::size_t a = 0; a < fac.classifiers.size(); ++a) {
        const double excl = field[fac.classifiers[a]] - detail::logit(msg[offset[f] + a]);
        q0[offset[f] + a] = detail::sigmoid(-excl);
      }
    }

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = detail::sigmoid(field[i]);
      if (!std::isfinite(m)) throw numerical_collapse("marginal of C" + std::to_string(i) + " is not finite");
      change = std::max(change, std::abs(m - out.marginals[i]));
      out.marginals[i] = m;
    }
    out.iterations = it;
    out.elapsed = clock::now() - start;
    if (change < cfg.tolerance) {
      out.converged = true;
      break;
    }
    if (out.elapsed > cfg.timeout) throw inference_timeout("inference exceeded its time budget");
  }
  return out;
}

/// Exact marginals by enumerating all 2^n classifier configurations under
/// hard OR-equality factors. Oracle for infer_rates; limited to 20 classifiers.
inline std::vector<double> exact_posterior(const FactorGraph& g, double prior = 0.5) {
  const std::size_t n = g.classifier_count;
  if (n > 20) throw std::length_error("exact_posterior: more than 20 classifiers");
  std::vector<std::uint32_t> masks;
  masks.reserve(g.factors.size());
  for (const auto& f : g.factors) {
    std::uint32_t m = 0;
    for (auto c : f.classifiers) {
      if (c >= n) throw std::out_of_range("exact_posterior: classifier index out of range");
      m |= std::uint32_t{1} << c;
    }
    masks.push_back(m);
  }
  double total = 0.0;
  std::vector<double> on(n, 0.0);
  const std::uint32_t limit = std::uint32_t{1} << n;
  for (std::uint32_t x = 0; x < limit; ++x) {
    bool ok = true;
    for (std::size_t f = 0; f < masks.size() && ok; ++f) ok = ((x & masks[f]) != 0) == g.factors[f].observed;
    if (!ok) continue;
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) w *= (x >> i) & 1U ? prior : 1.0 - prior;
    total += w;
    for (std::size_t i = 0; i < n; ++i)
      if ((x >> i) & 1U) on[i] += w;
  }
  if (total <= 0.0) throw inconsistent_evidence("no classifier configuration is consistent with the evidence");
  for (auto& v : on) v /= total;
  return on;
}

/// Raises each rate by its classifier's severity-dependent minimum:
/// lower_bound max(S, L), additive min(1, S + X), proportional S + (1 - S) * Y.
inline SamplingVector apply_min_rate(const SamplingVector& rates, const MinRatePolicy& policy,
                                     const ClassifierSet& classifiers) {
  if (rates.size() != classifiers.size()) throw std::invalid_argument("apply_min_rate: length mismatch");
  policy.validate();
  std::vector<double> out(rates.size());
  for (std::size_t j = 0; j < rates.size(); ++j) {
    const double s = rates[j], v = policy.value_for(classifiers[j].severity);
    switch (policy.form) {
      case MinRateForm::lower_bound:
        out[j] = std::max(s, v);
        break;
      case MinRateForm::additive:
        out[j] = std::min(1.0, s + v);
        break;
      case MinRateForm::proportional:
        out[j] = std::min(1.0, s + (1.0 - s) * v);
        break;
    }
  }
  return SamplingVector(std::move(out));
}

}  // namespace ratetune

#endif  // RATETUNE_RATE_INFERENCE_HPP
