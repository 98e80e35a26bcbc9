// Randomized verification suites shared by the acceptance binary and the
// `selftest` subcommand. Each returns a pass/fail verdict with a short detail
// line; sizes are parameters so selftest can run reduced versions.
#ifndef RATETUNE_VERIFY_CHECKS_HPP
#define RATETUNE_VERIFY_CHECKS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ratetune/batch_select.hpp"
#include "ratetune/core_model.hpp"
#include "ratetune/metrics.hpp"
#include "ratetune/rate_inference.hpp"
#include "ratetune/rng.hpp"
#include "ratetune/schedule_io.hpp"
#include "ratetune/sim_driver.hpp"
#include "ratetune/verify/oracles.hpp"

namespace ratetune::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

/// Random labelled dataset over `classifiers` classifiers with both classes present.
inline ObservationDataset random_dataset(Rng& rng, std::size_t samples, std::size_t classifiers,
                                         std::size_t max_flags = 3) {
  ObservationDataset d(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    auto& s = d[i];
    s.malicious = i == 0 ? true : i == 1 ? false : rng.bernoulli(0.5);
    s.weight = rng.uniform(0.05, 1.0);
    std::vector<ClassifierIndex> f;
    const auto k = rng.below(max_flags + 1);
    for (std::uint64_t t = 0; t < k; ++t) f.push_back(rng.below(classifiers));
    s.flags = make_flag_set(std::move(f));
  }
  return d;
}

/// Rates with a share of exact 0 and 1 entries mixed in.
inline std::vector<double> random_rates(Rng& rng, std::size_t n) {
  std::vector<double> r(n);
  for (auto& v : r) {
    const double u = rng.uniform();
    v = u < 0.1 ? 0.0 : u < 0.2 ? 1.0 : rng.uniform();
  }
  return r;
}

/// Closed-form confusion rates and exploitation probabilities against a
/// Monte-Carlo oracle, within `k_se` standard errors.
inline CheckResult check_formula_oracles(std::size_t datasets, std::size_t samples, std::uint64_t trials,
                                         std::uint64_t seed, double k_se = 3.0) {
  Rng rng(derive_seed(seed, "formula-oracles"));
  std::size_t comparisons = 0, failures = 0;
  double worst = 0.0;  // largest |diff| / se among nonzero se
  auto compare = [&](double exact, const oracle::Estimate& mc) {
    ++comparisons;
    const double diff = std::abs(exact - mc.mean);
    if (mc.stderr_ > 0.0) worst = std::max(worst, diff / mc.stderr_);
    if (diff > k_se * mc.stderr_ + 1e-12) ++failures;
  };
  for (std::size_t d = 0; d < datasets; ++d) {
    const std::size_t n = 8;
    const auto data = random_dataset(rng, samples, n);
    const auto rates = random_rates(rng, n);
    const SamplingVector alpha(rates);
    const bool published = d % 2 == 1;
    const auto exact =
        confusion_rates(data, alpha, published ? Normalization::paper_exact : Normalization::conventional);
    const auto mc = oracle::monte_carlo_confusion(data, rates, trials, derive_seed(seed, d), published);
    compare(exact.tp, mc.tp);
    compare(exact.fp, mc.fp);
    compare(exact.tn, mc.tn);
    compare(exact.fn, mc.fn);

    std::vector<ClassifierIndex> flags;
    for (std::size_t j = 0; j < n; ++j)
      if (rng.bernoulli(0.4)) flags.push_back(j);
    const auto mce = oracle::monte_carlo_exploitation(flags, rates, trials, derive_seed(seed, 100000 + d));
    compare(exploitation_probability(flags, alpha), mce);
  }
  return {"formula oracles", failures == 0,
          format("%zu/%zu comparisons within %.0f SE (worst %.2f SE)", comparisons - failures, comparisons, k_se,
                 worst)};
}

/// Random budget instances: select_batches against exhaustive enumeration.
inline CheckResult check_selection_optimality(std::size_t instances, std::size_t max_batches, std::uint64_t seed) {
  static constexpr double betas[] = {0.0, 0.5, 1.0, 2.0};
  Rng rng(derive_seed(seed, "selection"));
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    SelectionProblem p;
    const auto n = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(max_batches)));
    for (std::size_t i = 0; i < n; ++i) {
      const double tp = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 10.0);
      const double fp = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 10.0);
      p.batches.push_back({FlagSet{i}, tp, fp, std::nullopt});
    }
    p.objective = objective::Budget{betas[k % 4]};
    const auto got = select_batches(p);
    const auto want = oracle::enumerate_selection(p);
    if (!want || got.objective.front() != want->values.front()) {
      ++mismatches;
      if (want) worst = std::max(worst, std::abs(got.objective.front() - want->values.front()));
    }
  }
  return {"selection optimality", mismatches == 0,
          format("%zu/%zu instances equal to enumeration (worst gap %g)", instances - mismatches, instances, worst)};
}

/// Three classifiers; C1 alone, C1+C2, C2 alone, C2+C3 and C3 alone.
inline FactorGraph figure_graph(bool s4) {
  return FactorGraph{3, {{{0}, true}, {{0, 1}, true}, {{1}, true}, {{1, 2}, s4}, {{2}, true}}};
}

inline CheckResult check_all_true_evidence() {
  const auto r = infer_rates(figure_graph(true));
  double worst = 0.0;
  for (double m : r.marginals) worst = std::max(worst, std::abs(m - 1.0));
  return {"all-true evidence", r.converged && worst <= 1e-6,
          format("max |marginal - 1| = %.3g after %d iterations", worst, r.iterations)};
}

inline CheckResult check_one_false_factor() {
  const auto r = infer_rates(figure_graph(false));
  const double want[3] = {1.0, 0.5, 0.5};
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(r.marginals[i] - want[i]));
  return {"one false factor", worst <= 0.05,
          format("marginals (%.4f, %.4f, %.4f), max deviation %.3g", r.marginals[0], r.marginals[1], r.marginals[2],
                 worst)};
}

/// Consistent-evidence graph shaped like the simulator's: most classifiers
/// have their own singleton batch, and overlap batches have 2-4 members.
inline FactorGraph random_consistent_graph(Rng& rng, std::size_t n, std::size_t overlap_factors) {
  std::vector<bool> hidden(n);
  for (std::size_t i = 0; i < n; ++i) hidden[i] = rng.bernoulli(0.6);
  FactorGraph g;
  g.classifier_count = n;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(0.85)) g.factors.push_back({{i}, hidden[i]});
  for (std::size_t f = 0; f < overlap_factors; ++f) {
    const double u = rng.uniform();
    const std::size_t k = std::min<std::size_t>(u < 0.667 ? 2 : u < 0.933 ? 3 : 4, n);
    std::vector<ClassifierIndex> members;
    while (members.size() < k) {
      const auto c = rng.below(n);
      if (std::find(members.begin(), members.end(), c) == members.end()) members.push_back(c);
    }
    auto key = make_flag_set(std::move(members));
    // Batch keys are unique in a real partition.
    if (std::any_of(g.factors.begin(), g.factors.end(), [&](const Factor& x) { return x.classifiers == key; }))
      continue;
    bool observed = false;
    for (auto c : key) observed = observed || hidden[c];
    g.factors.push_back({std::move(key), observed});
  }
  return g;
}

/// Acyclic consistent-evidence graph: singletons plus a random spanning forest of pairs.
inline FactorGraph random_tree_graph(Rng& rng, std::size_t n) {
  std::vector<bool> hidden(n);
  for (std::size_t i = 0; i < n; ++i) hidden[i] = rng.bernoulli(0.5);
  FactorGraph g;
  g.classifier_count = n;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(0.7)) g.factors.push_back({{i}, hidden[i]});
  for (std::size_t i = 1; i < n; ++i) {
    if (rng.bernoulli(0.2)) continue;
    const auto parent = rng.below(i);
    g.factors.push_back({make_flag_set({parent, i}), hidden[parent] || hidden[i]});
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Loopy marginals against exact enumeration on random graphs, and on trees.
inline CheckResult check_inference_accuracy(std::size_t graphs, std::size_t max_classifiers, std::uint64_t seed,
                                            double loopy_tol = 0.02, double tree_tol = 1e-6) {
  Rng rng(derive_seed(seed, "inference"));
  std::size_t loopy_bad = 0, tree_bad = 0;
  double loopy_worst = 0.0, tree_worst = 0.0;
  for (std::size_t k = 0; k < graphs; ++k) {
    const auto n = static_cast<std::size_t>(rng.between(2, static_cast<std::int64_t>(max_classifiers)));
    const auto g = random_consistent_graph(rng, n, static_cast<std::size_t>(rng.between(1, 2 * n)));
    const double err = max_abs_diff(infer_rates(g).marginals, exact_posterior(g));
    loopy_worst = std::max(loopy_worst, err);
    if (err > loopy_tol) ++loopy_bad;

    const auto t = random_tree_graph(rng, n);
    const double terr = max_abs_diff(infer_rates(t).marginals, exact_posterior(t));
    tree_worst = std::max(tree_worst, terr);
    if (terr > tree_tol) ++tree_bad;
  }
  return {"inference accuracy", loopy_bad == 0 && tree_bad == 0,
          format("loopy: %zu/%zu within %g (worst %.3g); trees: %zu/%zu within %g (worst %.3g)", graphs - loopy_bad,
                 graphs, loopy_tol, loopy_worst, graphs - tree_bad, graphs, tree_tol, tree_worst)};
}

/// Raising one rate never lowers TP, FP or cost and never raises TN or FN.
inline CheckResult check_monotonicity(std::size_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "monotonicity"));
  std::size_t violations = 0;
  constexpr double slack = 1e-12;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = static_cast<std::size_t>(rng.between(1, 10));
    const auto data = random_dataset(rng, static_cast<std::size_t>(rng.between(2, 60)), n);
    std::vector<Classifier> cs;
    for (std::size_t j = 0; j < n; ++j) cs.push_back({"c" + std::to_string(j), rng.uniform(0.0, 5.0), 1});
    const ClassifierSet classifiers(std::move(cs));
    const auto before = random_rates(rng, n);
    const auto j = rng.below(n);
    const SamplingVector a(before);
    const auto b = a.with(j, rng.uniform(before[j], 1.0));
    const auto norm = t % 2 ? Normalization::paper_exact : Normalization::conventional;
    const auto ca = confusion_rates(data, a, norm), cb = confusion_rates(data, b, norm);
    const bool ok = cb.tp >= ca.tp - slack && cb.fp >= ca.fp - slack && cb.tn <= ca.tn + slack &&
                    cb.fn <= ca.fn + slack && scan_cost(b, classifiers) >= scan_cost(a, classifiers) - slack;
    if (!ok) ++violations;
  }
  return {"monotonicity", violations == 0, format("%zu/%zu trials monotone", trials - violations, trials)};
}

/// Without overlap, installed pre-floor rates are 0/1 and equal the batch decisions.
inline CheckResult check_no_overlap_shortcut(std::size_t signatures, int days, std::uint64_t seed) {
  const auto schedule = generate_schedule(signatures, days, seed);
  std::size_t updates = 0, bad = 0;
  for (double theta : {0.05, 0.25, 0.6}) {
    for (double beta : {0.5, 1.0, 2.0}) {
      SimConfig cfg;
      cfg.theta = theta;
      cfg.beta = beta;
      cfg.overlap_enabled = false;
      cfg.seed = seed;
      cfg.record_timing = false;
      cfg.keep_update_details = true;
      cfg.min_rate_policy.default_value = 0.05;
      const auto report = run_simulation(schedule, cfg);
      for (const auto& u : report.updates) {
        ++updates;
        bool ok = !u.overlap_present && !u.inference_run;
        std::map<ClassifierIndex, bool> decided;
        for (const auto& b : u.decided_batches) decided[b.key.front()] = *b.enabled;
        for (const auto& [c, r] : u.pre_floor_rates) {
          if (r != 0.0 && r != 1.0) ok = false;
          if (auto it = decided.find(c); it != decided.end() && r != (it->second ? 1.0 : 0.0)) ok = false;
        }
        if (!ok) ++bad;
      }
    }
  }
  return {"no-overlap shortcut", bad == 0 && updates > 0,
          format("%zu/%zu updates install exactly the batch decisions", updates - bad, updates)};
}

}  // namespace ratetune::verify

#endif  // RATETUNE_VERIFY_CHECKS_HPP
