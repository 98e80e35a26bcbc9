#ifndef RATETUNE_BATCH_SELECT_HPP
#define RATETUNE_BATCH_SELECT_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

#include "ratetune/core_model.hpp"
#include "ratetune/errors.hpp"

namespace ratetune {

/// Samples sharing one exact flagging set, reduced to their weighted masses.
struct Batch {
  FlagSet key;
  double tp_mass = 0.0;
  double fp_mass = 0.0;
  std::optional<bool> enabled;
};

struct BatchPartition {
  std::vector<Batch> batches;  // ordered by key
  double unflagged_tp = 0.0;
  double unflagged_fp = 0.0;
  std::size_t unflagged_samples = 0;
};

/// Groups flagged samples by flag set. Unflagged samples carry no decision and
/// are only accumulated into the unflagged totals.
inline BatchPartition partition_batches(const ObservationDataset& dataset) {
  BatchPartition out;
  std::map<FlagSet, std::pair<double, double>> groups;
  for (const auto& s : dataset) {
    const double w = s.weight * s.multiplicity;
    if (s.flags.empty()) {
      ++out.unflagged_samples;
      (s.malicious ? out.unflagged_tp : out.unflagged_fp) += w;
      continue;
    }
    auto& [tp, fp] = groups[s.flags];
    (s.malicious ? tp : fp) += w;
  }
  out.batches.reserve(groups.size());
  for (auto& [key, m] : groups) {
    if (m.first + m.second <= 0.0) continue;  // all members weighted out
    out.batches.push_back({key, m.first, m.second, std::nullopt});
  }
  return out;
}

namespace objective {

/// Minimize sum_enabled fp + beta * sum_disabled tp.
struct Budget {
  double beta = 1.0;
};

/// Minimize cost_fn * FN + cost_fp * FP with rates normalized by class mass.
struct Expenses {
  CostModel cost{1.0, 1.0};
};

/// Maximize 2 * TP * FP / (TP + FP).
struct F1sr {};

enum class Criterion { maximize_tp, maximize_tn, minimize_fp, minimize_fn };

/// Lexicographic optimization of the listed criteria, first one dominant.
struct Prioritized {
  std::vector<Criterion> order;
};

}  // namespace objective

using Objective = std::variant<objective::Budget, objective::Expenses, objective::F1sr, objective::Prioritized>;

/// Total malicious / benign mass, including samples no classifier flags.
struct MassTotals {
  double tp = 0.0;
  double fp = 0.0;
};

enum class SelectionMethod { separable, branch_and_bound, greedy };

struct SelectionProblem {
  std::vector<Batch> batches;
  Objective objective = objective::Budget{1.0};
  /// Rate goals evaluated with class-normalized batch masses. cost_max is not
  /// enforced here since scan cost depends on rates, not on batch decisions.
  std::optional<Goals> constraints;
  std::optional<MassTotals> totals;
  std::size_t exact_limit = 40;
  /// Forces a solution method instead of choosing one from the problem shape.
  std::optional<SelectionMethod> method;
};

struct Selection {
  std::vector<bool> enabled;
  /// One value per criterion, in natural units (costs, rates, or F1_sr).
  std::vector<double> objective;
  SelectionMethod method = SelectionMethod::separable;
  bool heuristic = false;
};

namespace detail {

// Score term to minimize, expressed over enabled masses (E_tp, E_fp).
struct Term {
  bool f1 = false;
  double a_tp = 0.0;
  double a_fp = 0.0;
  double constant = 0.0;
  double sense = 1.0;  // natural value = sense * score
};

struct Context {
  std::vector<Term> terms;
  double total_tp = 0.0;
  double total_fp = 0.0;
  double batch_tp = 0.0;
};

inline double ratio(double x, double total) { return total > 0.0 ? x / total : 0.0; }

inline Context make_context(const SelectionProblem& p) {
  Context ctx;
  for (const auto& b : p.batches) {
    if (b.tp_mass < 0.0 || b.fp_mass < 0.0) throw std::invalid_argument("batch masses must be nonnegative");
    ctx.batch_tp += b.tp_mass;
  }
  if (p.totals) {
    ctx.total_tp = p.totals->tp;
    ctx.total_fp = p.totals->fp;
  } else {
    for (const auto& b : p.batches) ctx.total_fp += b.fp_mass;
    ctx.total_tp = ctx.batch_tp;
  }
  const double inv_tp = ctx.total_tp > 0.0 ? 1.0 / ctx.total_tp : 0.0;
  const double inv_fp = ctx.total_fp > 0.0 ? 1.0 / ctx.total_fp : 0.0;

  std::visit(
      [&](const auto& o) {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, objective::Budget>) {
          if (!(o.beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
          ctx.terms.push_back({false, -o.beta, 1.0, o.beta * ctx.batch_tp, 1.0});
        } else if constexpr (std::is_same_v<O, objective::Expenses>) {
          const double fn = o.cost.cost_fn(), fp = o.cost.cost_fp();
          ctx.terms.push_back({false, -fn * inv_tp, fp * inv_fp, ctx.total_tp > 0.0 ? fn : 0.0, 1.0});
        } else if constexpr (std::is_same_v<O, objective::F1sr>) {
          ctx.terms.push_back({true, 0, 0, 0, -1.0});
        } else {
          if (o.order.empty()) throw std::invalid_argument("prioritized objective needs at least one criterion");
          for (auto c : o.order) {
            switch (c) {
              case objective::Criterion::maximize_tp:
                ctx.terms.push_back({false, -inv_tp, 0.0, 0.0, -1.0});
                break;
              case objective::Criterion::maximize_tn:
                ctx.terms.push_back({false, 0.0, inv_fp, ctx.total_fp > 0.0 ? -1.0 : 0.0, -1.0});
                break;
              case objective::Criterion::minimize_fp:
                ctx.terms.push_back({false, 0.0, inv_fp, 0.0, 1.0});
                break;
              case objective::Criterion::minimize_fn:
                ctx.terms.push_back({false, -inv_tp, 0.0, ctx.total_tp > 0.0 ? 1.0 : 0.0, 1.0});
                break;
            }
          }
        }
      },
      p.objective);
  return ctx;
}

inline double f1_score(const Context& ctx, double e_tp, double e_fp) {
  const double tp = ratio(e_tp, ctx.total_tp), fp = ratio(e_fp, ctx.total_fp);
  return tp + fp > 0.0 ? 2.0 * (tp * fp) / (tp + fp) : 0.0;
}

inline double term_score(const Context& ctx, const Term& t, double e_tp, double e_fp) {
  if (t.f1) return -f1_score(ctx, e_tp, e_fp);
  return t.constant + t.a_tp * e_tp + t.a_fp * e_fp;
}

// True when a < b lexicographically.
inline bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool feasible(const Context& ctx, const Goals& g, double e_tp, double e_fp) {
  if (g.tp_min && ratio(e_tp, ctx.total_tp) < *g.tp_min) return false;
  if (g.tn_min && ratio(ctx.total_fp - e_fp, ctx.total_fp) < *g.tn_min) return false;
  if (g.fp_max && ratio(e_fp, ctx.total_fp) > *g.fp_max) return false;
  if (g.fn_max && ratio(ctx.total_tp - e_tp, ctx.total_tp) > *g.fn_max) return false;
  return true;
}

// Whether some completion could still satisfy the goals, given that undecided
// batches hold (u_tp, u_fp) mass.
inline bool may_be_feasible(const Context& ctx, const Goals& g, double e_tp, double e_fp, double u_tp) {
  if (g.tp_min && ratio(e_tp + u_tp, ctx.total_tp) < *g.tp_min) return false;
  if (g.tn_min && ratio(ctx.total_fp - e_fp, ctx.total_fp) < *g.tn_min) return false;
  if (g.fp_max && ratio(e_fp, ctx.total_fp) > *g.fp_max) return false;
  if (g.fn_max && ratio(ctx.total_tp - e_tp - u_tp, ctx.total_tp) > *g.fn_max) return false;
  return true;
}

class BranchAndBound {
 public:
  BranchAndBound(const SelectionProblem& p, const Context& ctx) : p_(p), ctx_(ctx) {
    const std::size_t n = p.batches.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    const Term& lead = ctx.terms.front();
    auto gain = [&](std::size_t i) {
      const auto& b = p.batches[i];
      if (lead.f1) return b.tp_mass + b.fp_mass;
      return -(lead.a_tp * b.tp_mass + lead.a_fp * b.fp_mass);
    };
    std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) { return gain(a) > gain(b); });

    suffix_tp_.assign(n + 1, 0.0);
    suffix_fp_.assign(n + 1, 0.0);
    suffix_min_.assign(ctx.terms.size(), std::vector<double>(n + 1, 0.0));
    for (std::size_t k = n; k-- > 0;) {
      const auto& b = p.batches[order_[k]];
      suffix_tp_[k] = suffix_tp_[k + 1] + b.tp_mass;
      suffix_fp_[k] = suffix_fp_[k + 1] + b.fp_mass;
      for (std::size_t t = 0; t < ctx.terms.size(); ++t) {
        const auto& term = ctx.terms[t];
        const double c = term.f1 ? 0.0 : term.a_tp * b.tp_mass + term.a_fp * b.fp_mass;
        suffix_min_[t][k] = suffix_min_[t][k + 1] + std::min(0.0, c);
      }
    }
    current_.assign(n, false);
  }

  std::optional<std::vector<bool>> solve() {
    search(0, 0.0, 0.0);
    return best_;
  }

 private:
  std::vector<double> bound(std::size_t k, double e_tp, double e_fp) const {
    std::vector<double> out(ctx_.terms.size());
    for (std::size_t t = 0; t < ctx_.terms.size(); ++t) {
      const auto& term = ctx_.terms[t];
      if (term.f1) {
        // F1_sr grows in both TP and FP: enabling everything left is optimistic.
        out[t] = -f1_score(ctx_, e_tp + suffix_tp_[k], e_fp + suffix_fp_[k]);
      } else {
        out[t] = term_score(ctx_, term, e_tp, e_fp) + suffix_min_[t][k];
      }
    }
    if (ctx_.terms.size() == 1 && !ctx_.terms[0].f1) out[0] += tp_cover_penalty(k, e_tp);
    return out;
  }

  // Extra cost of the fractional relaxation when a TP floor forces enabling
  // batches that the unconstrained relaxation would leave off. Batches are
  // taken by cost per unit of TP mass, the last one fractionally.
  double tp_cover_penalty(std::size_t k, double e_tp) const {
    if (!p_.constraints || !p_.constraints->tp_min || ctx_.total_tp <= 0.0) return 0.0;
    const Term& term = ctx_.terms[0];
    double have = e_tp;
    std::vector<std::pair<double, double>> candidates;  // (cost per tp, tp)
    for (std::size_t j = k; j < order_.size(); ++j) {
      const auto& b = p_.batches[order_[j]];
      const double c = term.a_tp * b.tp_mass + term.a_fp * b.fp_mass;
      if (c <= 0.0) {
        have += b.tp_mass;
      } else if (b.tp_mass > 0.0) {
        candidates.emplace_back(c / b.tp_mass, b.tp_mass);
      }
    }
    double need = *p_.constraints->tp_min * ctx_.total_tp - have;
    if (need <= 0.0) return 0.0;
    std::sort(candidates.begin(), candidates.end());
    double penalty = 0.0;
    for (const auto& [unit, tp] : candidates) {
      const double take = std::min(tp, need);
      penalty += unit * take;
      need -= take;
      if (need <= 0.0) break;
    }
    return penalty;
  }

  void search(std::size_t k, double e_tp, double e_fp) {
    if (p_.constraints && !may_be_feasible(ctx_, *p_.constraints, e_tp, e_fp, suffix_tp_[k])) return;
    if (best_ && !lex_less(bound(k, e_tp, e_fp), best_score_)) return;
    if (k == order_.size()) {
      if (p_.constraints && !feasible(ctx_, *p_.constraints, e_tp, e_fp)) return;
      std::vector<double> score(ctx_.terms.size());
      for (std::size_t t = 0; t < score.size(); ++t) score[t] = term_score(ctx_, ctx_.terms[t], e_tp, e_fp);
      if (!best_ || lex_less(score, best_score_)) {
        best_ = current_;
        best_score_ = std::move(score);
      }
      return;
    }
    const auto& b = p_.batches[order_[k]];
    current_[order_[k]] = true;
    search(k + 1, e_tp + b.tp_mass, e_fp + b.fp_mass);
    current_[order_[k]] = false;
    search(k + 1, e_tp, e_fp);
  }

  const SelectionProblem& p_;
  const Context& ctx_;
  std::vector<std::size_t> order_;
  std::vector<double> suffix_tp_, suffix_fp_;
  std::vector<std::vector<double>> suffix_min_;
  std::vector<bool> current_;
  std::optional<std::vector<bool>> best_;
  std::vector<double> best_score_;
};

inline std::vector<double> score_of(const Context& ctx, const std::vector<Batch>& batches,
                                    const std::vector<bool>& enabled) {
  double e_tp = 0.0, e_fp = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i)
    if (enabled[i]) {
      e_tp += batches[i].tp_mass;
      e_fp += batches[i].fp_mass;
    }
  std::vector<double> s(ctx.terms.size());
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = term_score(ctx, ctx.terms[t], e_tp, e_fp);
  return s;
}

inline double infeasibility(const Context& ctx, const Goals& g, const std::vector<Batch>& batches,
                            const std::vector<bool>& enabled) {
  double e_tp = 0.0, e_fp = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i)
    if (enabled[i]) {
      e_tp += batches[i].tp_mass;
      e_fp += batches[i].fp_mass;
    }
  double v = 0.0;
  if (g.tp_min) v += std::max(0.0, *g.tp_min - ratio(e_tp, ctx.total_tp));
  if (g.tn_min) v += std::max(0.0, *g.tn_min - ratio(ctx.total_fp - e_fp, ctx.total_fp));
  if (g.fp_max) v += std::max(0.0, ratio(e_fp, ctx.total_fp) - *g.fp_max);
  if (g.fn_max) v += std::max(0.0, ratio(ctx.total_tp - e_tp, ctx.total_tp) - *g.fn_max);
  return v;
}

// Greedy construction followed by 1-flip descent; infeasibility is minimized first.
inline std::vector<bool> greedy(const SelectionProblem& p, const Context& ctx, double beta) {
  const std::size_t n = p.batches.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    const auto& x = p.batches[a];
    const auto& y = p.batches[b];
    return beta * x.tp_mass - x.fp_mass > beta * y.tp_mass - y.fp_mass;
  });

  auto key = [&](const std::vector<bool>& en) {
    std::vector<double> k;
    k.push_back(p.constraints ? infeasibility(ctx, *p.constraints, p.batches, en) : 0.0);
    auto s = score_of(ctx, p.batches, en);
    k.insert(k.end(), s.begin(), s.end());
    return k;
  };

  std::vector<bool> en(n, false);
  auto best = key(en);
  for (auto i : order) {
    en[i] = true;
    auto k = key(en);
    if (lex_less(k, best)) {
      best = std::move(k);
    } else {
      en[i] = false;
    }
  }
  for (bool improved = true; improved;) {
    improved = false;
    for (auto i : order) {
      en[i] = !en[i];
      auto k = key(en);
      if (lex_less(k, best)) {
        best = std::move(k);
        improved = true;
      } else {
        en[i] = !en[i];
      }
    }
  }
  if (best.front() > 0.0) throw infeasible_constraints("heuristic search found no assignment meeting the goals");
  return en;
}

}  // namespace detail

/// Natural-unit objective values of `enabled`, summed in batch order.
inline std::vector<double> evaluate_objective(const SelectionProblem& problem, const std::vector<bool>& enabled) {
  if (enabled.size() != problem.batches.size()) throw std::invalid_argument("assignment length mismatch");
  if (const auto* b = std::get_if<objective::Budget>(&problem.objective)) {
    double fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < enabled.size(); ++i) {
      if (enabled[i]) {
        fp += problem.batches[i].fp_mass;
      } else {
        fn += problem.batches[i].tp_mass;
      }
    }
    return {fp + b->beta * fn};
  }
  const auto ctx = detail::make_context(problem);
  auto s = detail::score_of(ctx, problem.batches, enabled);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] *= ctx.terms[t].sense;
  return s;
}

/// Whether `enabled` meets the rate goals of `problem` (trivially true without goals).
inline bool satisfies_constraints(const SelectionProblem& problem, const std::vector<bool>& enabled) {
  if (!problem.constraints) return true;
  const auto ctx = detail::make_context(problem);
  return detail::infeasibility(ctx, *problem.constraints, problem.batches, enabled) == 0.0;
}

/// Chooses which batches stay enabled.
///
/// Linear objectives without goals are separable and solved exactly batch by
/// batch (ties enable). Everything else runs an exact enable-first
/// branch-and-bound while the batch count is within `exact_limit`, and a
/// greedy pass with 1-flip improvement beyond it (flagged heuristic).
/// Throws infeasible_constraints when the goals cannot be met.
inline Selection select_batches(const SelectionProblem& problem) {
  if (problem.constraints) problem.constraints->validate();
  const auto ctx = detail::make_context(problem);
  const std::size_t n = problem.batches.size();
  const bool linear = std::none_of(ctx.terms.begin(), ctx.terms.end(), [](const auto& t) { return t.f1; });
  const bool constrained = problem.constraints && !problem.constraints->empty();

  SelectionMethod method = SelectionMethod::greedy;
  if (problem.method) {
    method = *problem.method;
    if (method == SelectionMethod::separable && !(linear && !constrained))
      throw std::invalid_argument("separable rule needs a linear objective without goals");
  } else if (linear && !constrained) {
    method = SelectionMethod::separable;
  } else if (n <= problem.exact_limit) {
    method = SelectionMethod::branch_and_bound;
  }

  Selection out;
  if (method == SelectionMethod::separable) {
    out.method = SelectionMethod::separable;
    out.enabled.resize(n);
    const auto* budget = std::get_if<objective::Budget>(&problem.objective);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = problem.batches[i];
      if (budget) {
        out.enabled[i] = b.fp_mass <= budget->beta * b.tp_mass;
        continue;
      }
      std::vector<double> contribution(ctx.terms.size());
      for (std::size_t t = 0; t < contribution.size(); ++t)
        contribution[t] = ctx.terms[t].a_tp * b.tp_mass + ctx.terms[t].a_fp * b.fp_mass;
      out.enabled[i] = !detail::lex_less(std::vector<double>(contribution.size(), 0.0), contribution);
    }
  } else if (method == SelectionMethod::branch_and_bound) {
    out.method = SelectionMethod::branch_and_bound;
    auto best = detail::BranchAndBound(problem, ctx).solve();
    if (!best) throw infeasible_constraints("no batch assignment satisfies the goals");
    out.enabled = std::move(*best);
  } else {
    out.method = SelectionMethod::greedy;
    out.heuristic = true;
    double beta = 1.0;
    if (const auto* b = std::get_if<objective::Budget>(&problem.objective)) beta = b->beta;
    if (const auto* e = std::get_if<objective::Expenses>(&problem.objective)) beta = e->cost.beta();
    out.enabled = detail::greedy(problem, ctx, beta);
  }
  out.objective = evaluate_objective(problem, out.enabled);
  return out;
}

/// Copies `batches` with their decisions filled in from `selection`.
inline std::vector<Batch> with_decisions(std::vector<Batch> batches, const Selection& selection) {
  if (batches.size() != selection.enabled.size()) throw std::invalid_argument("selection size mismatch");
  for (std::size_t i = 0; i < batches.size(); ++i) batches[i].enabled = selection.enabled[i];
  return batches;
}

/// Rates for the overlap-free case: each classifier takes its batch decision
/// (1 or 0); classifiers without a batch stay fully enabled.
inline SamplingVector decisions_to_rates_no_overlap(std::span<const Batch> batches, std::size_t classifier_count) {
  std::vector<double> rates(classifier_count, 1.0);
  for (const auto& b : batches) {
    if (b.key.size() != 1) throw std::invalid_argument("classifier overlap present in batch keys");
    if (!b.enabled) throw std::invalid_argument("batch without a decision");
    if (b.key[0] >= classifier_count) throw std::out_of_range("batch key outside classifier range");
    rates[b.key[0]] = *b.enabled ? 1.0 : 0.0;
  }
  return SamplingVector(std::move(rates));
}

}  // namespace ratetune

#endif  // RATETUNE_BATCH_SELECT_HPP
