#include <catch_amalgamated.hpp>

#include "ratetune/batch_select.hpp"
#include "ratetune/verify/checks.hpp"
#include "ratetune/verify/oracles.hpp"

using namespace ratetune;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SelectionProblem one_batch(double tp, double fp, double beta) {
  SelectionProblem p;
  p.batches = {{{0}, tp, fp, std::nullopt}};
  p.objective = objective::Budget{beta};
  return p;
}

std::vector<Batch> random_batches(Rng& rng, std::size_t n) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double tp = rng.bernoulli(0.15) ? 0.0 : rng.uniform(0.0, 10.0);
    const double fp = rng.bernoulli(0.15) ? 0.0 : rng.uniform(0.0, 10.0);
    out.push_back({{i}, tp, fp, std::nullopt});
  }
  return out;
}

Objective random_objective(Rng& rng) {
  using namespace objective;
  switch (rng.below(4)) {
    case 0: return Budget{rng.uniform(0.0, 3.0)};
    case 1: return Expenses{CostModel(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0))};
    case 2: return F1sr{};
    default: {
      std::vector<Criterion> order;
      const Criterion all[] = {Criterion::maximize_tp, Criterion::maximize_tn, Criterion::minimize_fp,
                               Criterion::minimize_fn};
      for (std::size_t k = 0, m = 1 + rng.below(3); k < m; ++k) order.push_back(all[rng.below(4)]);
      return Prioritized{order};
    }
  }
}

}  // namespace

TEST_CASE("partition groups samples by exact flag set") {
  ObservationDataset d(4);
  d[0] = {true, {0}};
  d[1] = {true, {0, 1}};
  d[2] = {false, {1}};
  d[3] = {false, {}};
  const auto p = partition_batches(d);
  REQUIRE(p.batches.size() == 3);
  CHECK(p.batches[0].key == FlagSet{0});
  CHECK(p.batches[0].tp_mass == 1.0);
  CHECK(p.batches[0].fp_mass == 0.0);
  CHECK(p.batches[1].key == FlagSet{0, 1});
  CHECK(p.batches[1].tp_mass == 1.0);
  CHECK(p.batches[2].key == FlagSet{1});
  CHECK(p.batches[2].fp_mass == 1.0);
  CHECK(p.unflagged_samples == 1);
  CHECK(p.unflagged_fp == 1.0);

  CHECK(partition_batches({}).batches.empty());

  ObservationDataset same(5, Sample{true, {0}});
  const auto single = partition_batches(same);
  REQUIRE(single.batches.size() == 1);
  CHECK(single.batches[0].tp_mass == 5.0);
}

TEST_CASE("partition is a partition of the flagged mass") {
  Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    const auto d = verify::random_dataset(rng, 80, 5);
    const auto p = partition_batches(d);
    double flagged_tp = 0, flagged_fp = 0, batch_tp = 0, batch_fp = 0;
    for (const auto& s : d)
      if (!s.flags.empty()) (s.malicious ? flagged_tp : flagged_fp) += s.weight;
    std::set<FlagSet> keys;
    for (const auto& b : p.batches) {
      CHECK(keys.insert(b.key).second);
      CHECK_FALSE(b.key.empty());
      CHECK(b.tp_mass + b.fp_mass > 0.0);
      batch_tp += b.tp_mass;
      batch_fp += b.fp_mass;
    }
    std::size_t covered = 0;
    for (const auto& s : d) covered += keys.count(s.flags);
    CHECK(covered + p.unflagged_samples == d.size());
    CHECK_THAT(batch_tp, WithinAbs(flagged_tp, 1e-9));
    CHECK_THAT(batch_fp, WithinAbs(flagged_fp, 1e-9));
  }
}

TEST_CASE("separable rule on single batches") {
  CHECK(select_batches(one_batch(100, 30, 0.5)).enabled == std::vector<bool>{true});
  CHECK(select_batches(one_batch(10, 30, 1.0)).enabled == std::vector<bool>{false});
  CHECK(select_batches(one_batch(30, 30, 1.0)).enabled == std::vector<bool>{true});
  const auto s = select_batches(one_batch(10, 30, 1.0));
  CHECK(s.method == SelectionMethod::separable);
  CHECK_FALSE(s.heuristic);
  CHECK(s.objective == std::vector<double>{10.0});

  for (const auto& p : {one_batch(100, 30, 0.5), one_batch(10, 30, 1.0)}) {
    const auto want = oracle::enumerate_selection(p);
    CHECK(select_batches(p).objective.front() == want->values.front());
  }
}

TEST_CASE("budget selection matches enumeration exactly") {
  const auto r = verify::check_selection_optimality(200, 15, 7);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("separable rule and branch-and-bound agree on unconstrained budgets") {
  Rng rng(43);
  for (int t = 0; t < 300; ++t) {
    SelectionProblem p;
    p.batches = random_batches(rng, 1 + rng.below(20));
    p.objective = objective::Budget{rng.uniform(0.0, 3.0)};
    const auto sep = select_batches(p);
    p.method = SelectionMethod::branch_and_bound;
    const auto bnb = select_batches(p);
    CHECK(sep.method == SelectionMethod::separable);
    CHECK(bnb.method == SelectionMethod::branch_and_bound);
    CHECK(sep.objective == bnb.objective);
  }
}

TEST_CASE("branch-and-bound is optimal for every objective, with and without goals") {
  Rng rng(44);
  int feasible = 0, infeasible = 0;
  for (int t = 0; t < 400; ++t) {
    SelectionProblem p;
    p.batches = random_batches(rng, 1 + rng.below(12));
    p.objective = random_objective(rng);
    if (rng.bernoulli(0.3)) p.totals = MassTotals{rng.uniform(60.0, 150.0), rng.uniform(60.0, 150.0)};
    if (rng.bernoulli(0.6)) {
      Goals g;
      if (rng.bernoulli(0.5)) g.tp_min = rng.uniform(0.0, 0.8);
      if (rng.bernoulli(0.5)) g.fp_max = rng.uniform(0.1, 1.0);
      if (rng.bernoulli(0.3)) g.tn_min = rng.uniform(0.0, 0.6);
      if (rng.bernoulli(0.3)) g.fn_max = rng.uniform(0.2, 1.0);
      p.constraints = g;
    }
    const bool f1 = std::holds_alternative<objective::F1sr>(p.objective);
    const bool plain = !p.constraints || p.constraints->empty();
    if (plain && !f1) p.method = SelectionMethod::branch_and_bound;
    const auto want = oracle::enumerate_selection(p);
    if (!want) {
      ++infeasible;
      CHECK_THROWS_AS(select_batches(p), infeasible_constraints);
      continue;
    }
    ++feasible;
    const auto got = select_batches(p);
    CHECK(got.method == SelectionMethod::branch_and_bound);
    CHECK(satisfies_constraints(p, got.enabled));
    REQUIRE(got.objective.size() == want->values.size());
    for (std::size_t k = 0; k < got.objective.size(); ++k) CHECK_THAT(got.objective[k], WithinAbs(want->values[k], 1e-9));
  }
  CHECK(feasible > 100);
  CHECK(infeasible > 0);
}

TEST_CASE("decisions are invariant to a common scale") {
  Rng rng(45);
  for (int t = 0; t < 200; ++t) {
    SelectionProblem p;
    p.batches = random_batches(rng, 1 + rng.below(14));
    p.objective = objective::Budget{rng.uniform(0.0, 3.0)};
    if (t % 2) {
      Goals g;
      g.tp_min = rng.uniform(0.0, 0.7);
      p.constraints = g;
    }
    std::optional<Selection> base;
    try {
      base = select_batches(p);
    } catch (const infeasible_constraints&) {
      continue;
    }
    const double k = rng.uniform(0.1, 50.0);
    auto scaled = p;
    for (auto& b : scaled.batches) {
      b.tp_mass *= k;
      b.fp_mass *= k;
    }
    const auto s = select_batches(scaled);
    CHECK_THAT(s.objective.front(), WithinRel(k * base->objective.front(), 1e-9) || WithinAbs(0.0, 1e-9));
    // Decisions can differ only between equal-objective alternatives.
    CHECK_THAT(evaluate_objective(p, s.enabled).front(), WithinAbs(base->objective.front(), 1e-9));
  }
}

TEST_CASE("prioritized goals are lexicographic") {
  using namespace objective;
  SelectionProblem p;
  p.batches = {{{0}, 10, 1, {}}, {{1}, 1, 10, {}}, {{2}, 0, 5, {}}};
  p.objective = Prioritized{{Criterion::maximize_tp, Criterion::minimize_fp}};
  auto s = select_batches(p);
  CHECK(s.enabled == std::vector<bool>{true, true, false});
  CHECK_THAT(s.objective[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(s.objective[1], WithinAbs(11.0 / 16.0, 1e-12));

  p.objective = Prioritized{{Criterion::minimize_fp, Criterion::maximize_tp}};
  s = select_batches(p);
  CHECK(s.enabled == std::vector<bool>{false, false, false});
}

TEST_CASE("goals steer the budget objective and infeasibility is reported") {
  SelectionProblem p;
  p.batches = {{{0}, 10, 30, {}}, {{1}, 10, 1, {}}};
  p.objective = objective::Budget{1.0};
  CHECK(select_batches(p).enabled == std::vector<bool>{false, true});

  Goals keep_all;
  keep_all.tp_min = 1.0;
  p.constraints = keep_all;
  const auto s = select_batches(p);
  CHECK(s.enabled == std::vector<bool>{true, true});
  CHECK(s.method == SelectionMethod::branch_and_bound);
  CHECK(s.objective.front() == 31.0);

  Goals impossible;
  impossible.tp_min = 0.9;
  impossible.fp_max = 0.01;
  p.constraints = impossible;
  CHECK_THROWS_AS(select_batches(p), infeasible_constraints);
}

TEST_CASE("large constrained problems fall back to a marked heuristic") {
  Rng rng(46);
  SelectionProblem p;
  p.batches = random_batches(rng, 60);
  p.objective = objective::Budget{1.0};
  Goals g;
  g.tp_min = 0.5;
  p.constraints = g;
  const auto s = select_batches(p);
  CHECK(s.method == SelectionMethod::greedy);
  CHECK(s.heuristic);
  CHECK(satisfies_constraints(p, s.enabled));
  // The unconstrained optimum is a valid lower bound.
  auto relaxed = p;
  relaxed.constraints.reset();
  CHECK(s.objective.front() >= select_batches(relaxed).objective.front() - 1e-9);

  p.exact_limit = 100;
  const auto exact = select_batches(p);
  CHECK(exact.method == SelectionMethod::branch_and_bound);
  CHECK(exact.objective.front() <= s.objective.front() + 1e-9);
}

TEST_CASE("selection rejects malformed problems") {
  SelectionProblem p = one_batch(-1, 2, 1);
  CHECK_THROWS_AS(select_batches(p), std::invalid_argument);
  p = one_batch(1, 2, -1);
  CHECK_THROWS_AS(select_batches(p), std::invalid_argument);
  p = one_batch(1, 2, 1);
  p.objective = objective::F1sr{};
  p.method = SelectionMethod::separable;
  CHECK_THROWS_AS(select_batches(p), std::invalid_argument);
  p.objective = objective::Prioritized{};
  p.method.reset();
  CHECK_THROWS_AS(select_batches(p), std::invalid_argument);
  CHECK(select_batches(SelectionProblem{}).enabled.empty());
}

TEST_CASE("decisions map to rates without overlap") {
  std::vector<Batch> all_on{{{0}, 1, 0, true}, {{1}, 1, 0, true}};
  CHECK(decisions_to_rates_no_overlap(all_on, 2) == SamplingVector::constant(2, 1.0));

  std::vector<Batch> mixed{{{0}, 1, 5, false}, {{1}, 5, 1, true}};
  CHECK(decisions_to_rates_no_overlap(mixed, 3) == SamplingVector({0.0, 1.0, 1.0}));

  std::vector<Batch> overlap{{{0, 1}, 1, 0, true}};
  CHECK_THROWS_AS(decisions_to_rates_no_overlap(overlap, 2), std::invalid_argument);
  std::vector<Batch> undecided{{{0}, 1, 0, std::nullopt}};
  CHECK_THROWS_AS(decisions_to_rates_no_overlap(undecided, 2), std::invalid_argument);
}

TEST_CASE("with_decisions copies the selection onto the batches") {
  std::vector<Batch> b{{{0}, 1, 5, {}}, {{1}, 5, 1, {}}};
  Selection s;
  s.enabled = {false, true};
  const auto out = with_decisions(b, s);
  CHECK(out[0].enabled == false);
  CHECK(out[1].enabled == true);
  s.enabled = {true};
  CHECK_THROWS(with_decisions(b, s));
}
