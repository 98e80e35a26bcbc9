#include <catch_amalgamated.hpp>

#include <sstream>

#include "ratetune/report_io.hpp"
#include "ratetune/schedule_io.hpp"
#include "ratetune/sim_driver.hpp"

using namespace ratetune;
using Catch::Matchers::WithinAbs;

namespace {

SimConfig quiet(double theta, double beta, bool overlap) {
  SimConfig c;
  c.theta = theta;
  c.beta = beta;
  c.overlap_enabled = overlap;
  c.record_timing = false;
  c.seed = 99;
  return c;
}

std::string days_csv(const SimReport& r) {
  std::ostringstream os;
  write_days_csv(os, r);
  return os.str();
}

const std::vector<SignatureLifecycle>& small_schedule() {
  static const auto s = generate_schedule(25, 150, 3);
  return s;
}

}  // namespace

TEST_CASE("empty schedule gives an empty report") {
  const auto r = run_simulation({}, quiet(0.1, 1, true));
  CHECK(r.days.empty());
  CHECK(r.updates.empty());
  CHECK(r.fallback_count == 0);
  const auto s = summarize(r);
  CHECK_FALSE(s.tp_removed_pct);
  CHECK_FALSE(s.precision);
  CHECK_FALSE(s.median_solve_ms);
}

TEST_CASE("without false positives every rate stays at one") {
  for (bool overlap : {false, true}) {
    auto cfg = quiet(0.0, 1.0, overlap);
    cfg.keep_update_details = true;
    const auto r = run_simulation(small_schedule(), cfg);
    REQUIRE_FALSE(r.updates.empty());
    for (const auto& u : r.updates)
      for (const auto& [c, rate] : u.pre_floor_rates) CHECK(rate == 1.0);
    for (const auto& d : r.days) {
      CHECK(d.fp_generated == 0);
      CHECK(d.tp_caught == d.tp_generated);
    }
    const auto s = summarize(r);
    CHECK(*s.tp_removed_pct == 0.0);
    CHECK(*s.tp_remaining_pct == 100.0);
    CHECK(*s.precision == 1.0);
    CHECK(*s.recall == 1.0);
    CHECK_FALSE(s.fp_removed_pct);
  }
}

TEST_CASE("a single signature with free misses stops raising false positives after the first update") {
  const std::vector<SignatureLifecycle> one{make_lifecycle("solo", 0, 60, 1, {20, 40})};
  const auto r = run_simulation(one, quiet(0.2, 0.0, true));
  REQUIRE(r.updates.size() >= 2);
  const int first_update = r.updates.front().day;
  std::int64_t fp_after = 0, raised_after = 0;
  for (const auto& d : r.days) {
    if (d.day < first_update) {
      CHECK(d.fp_raised == d.fp_generated);  // full sampling before any update
    } else {
      fp_after += d.fp_generated;
      raised_after += d.fp_raised;
    }
  }
  CHECK(fp_after > 0);
  CHECK(raised_after == 0);
}

TEST_CASE("day rows conserve observations and schedule activity") {
  const auto r = run_simulation(small_schedule(), quiet(0.3, 1.0, true));
  int min_intro = 1 << 30, max_removal = -(1 << 30);
  for (const auto& lc : small_schedule()) {
    min_intro = std::min(min_intro, lc.intro_day);
    max_removal = std::max(max_removal, lc.removal_day);
  }
  REQUIRE(r.days.size() == static_cast<std::size_t>(max_removal - min_intro));
  for (const auto& d : r.days) {
    CHECK(d.tp_caught >= 0);
    CHECK(d.tp_caught <= d.tp_generated);
    CHECK(d.fp_raised >= 0);
    CHECK(d.fp_raised <= d.fp_generated);
    std::size_t active = 0;
    for (const auto& lc : small_schedule()) active += lc.active_on(d.day);
    CHECK(d.active_signatures == active);
    CHECK(d.update_performed == (d.day > min_intro && (d.day - min_intro) % 3 == 0));
  }
}

TEST_CASE("generated traffic is shared by every cell") {
  const auto a = run_simulation(small_schedule(), quiet(0.2, 0.5, true));
  const auto b = run_simulation(small_schedule(), quiet(0.2, 2.0, false));
  REQUIRE(a.days.size() == b.days.size());
  for (std::size_t i = 0; i < a.days.size(); ++i) {
    CHECK(a.days[i].tp_generated == b.days[i].tp_generated);
    CHECK(a.days[i].fp_generated == b.days[i].fp_generated);
  }
}

TEST_CASE("update period controls update days") {
  auto cfg = quiet(0.2, 1.0, false);
  cfg.update_period_days = 7;
  const auto r = run_simulation(small_schedule(), cfg);
  for (const auto& u : r.updates) CHECK((u.day - r.days.front().day) % 7 == 0);
  cfg.update_period_days = 0;
  CHECK_THROWS_AS(run_simulation(small_schedule(), cfg), std::invalid_argument);
}

TEST_CASE("no-overlap runs install batch decisions directly") {
  auto cfg = quiet(0.3, 1.0, false);
  cfg.keep_update_details = true;
  cfg.min_rate_policy.default_value = 0.1;
  const auto r = run_simulation(small_schedule(), cfg);
  bool some_zero = false;
  for (const auto& u : r.updates) {
    CHECK_FALSE(u.inference_run);
    CHECK_FALSE(u.fallback);
    for (const auto& [c, rate] : u.pre_floor_rates) {
      CHECK((rate == 0.0 || rate == 1.0));
      some_zero = some_zero || rate == 0.0;
    }
  }
  CHECK(some_zero);
}

TEST_CASE("overlap runs go through inference") {
  const auto r = run_simulation(small_schedule(), quiet(0.3, 1.0, true));
  const auto inferred = std::count_if(r.updates.begin(), r.updates.end(), [](const auto& u) { return u.inference_run; });
  CHECK(inferred > 0);
}

TEST_CASE("failed inference falls back to the previous rates") {
  auto cfg = quiet(0.3, 1.0, true);
  cfg.inference.max_iterations = 1;
  const auto r = run_simulation(small_schedule(), cfg);
  std::size_t failures = 0;
  for (const auto& u : r.updates) {
    CHECK(u.fallback == u.inference_run);
    failures += u.fallback;
  }
  CHECK(failures > 0);
  CHECK(r.fallback_count == failures);
  std::size_t flagged_days = 0;
  for (const auto& d : r.days) flagged_days += d.fallback_used;
  CHECK(flagged_days == failures);
}

TEST_CASE("minimum rates keep some false positives flowing") {
  auto base = quiet(0.5, 0.5, false);
  auto floored = base;
  floored.min_rate_policy.default_value = 0.5;
  const auto a = summarize(run_simulation(small_schedule(), base));
  const auto b = summarize(run_simulation(small_schedule(), floored));
  CHECK(*b.fp_removed_pct < *a.fp_removed_pct);
}

TEST_CASE("every weight policy runs") {
  const WeightPolicy policies[] = {weighting::None{}, weighting::DropOld{9}, weighting::Exponential{0.5, 0.5},
                                   weighting::InverseRate{}};
  for (const auto& p : policies) {
    auto cfg = quiet(0.25, 1.0, true);
    cfg.weight_policy = p;
    const auto s = summarize(run_simulation(small_schedule(), cfg));
    CHECK(*s.tp_removed_pct >= 0.0);
    CHECK(*s.fp_removed_pct <= 100.0);
  }
}

TEST_CASE("simulation rejects bad input") {
  auto dup = small_schedule();
  dup.push_back(dup.front());
  CHECK_THROWS_AS(run_simulation(dup, quiet(0.1, 1, true)), std::invalid_argument);
  CHECK_THROWS_AS(run_simulation(small_schedule(), quiet(1.5, 1, true)), std::invalid_argument);
  CHECK_THROWS_AS(run_simulation(small_schedule(), quiet(0.1, -1, true)), std::invalid_argument);
  auto cfg = quiet(0.1, 1, true);
  cfg.min_rate_policy.default_value.reset();
  cfg.min_rate_policy.by_severity = {{1, 0.1}};
  CHECK_THROWS_AS(run_simulation(small_schedule(), cfg), std::out_of_range);
}

TEST_CASE("sweep covers the grid in overlap, theta, beta order") {
  GridConfig grid{quiet(0, 0, false), {0.05, 0.15, 0.25}, {0.5, 1, 2}, {false, true}, 2};
  const auto reports = sweep(small_schedule(), grid);
  REQUIRE(reports.size() == 18);
  CHECK(reports[0].theta == 0.05);
  CHECK(reports[0].beta == 0.5);
  CHECK_FALSE(reports[0].overlap);
  CHECK(reports[1].beta == 1.0);
  CHECK(reports[3].theta == 0.15);
  CHECK(reports[9].overlap);
  CHECK(reports[17].theta == 0.25);
  CHECK(reports[17].beta == 2.0);

  SECTION("one cell equals a direct run") {
    GridConfig one{quiet(0, 0, false), {0.15}, {1}, {true}, 1};
    CHECK(days_csv(sweep(small_schedule(), one).front()) == days_csv(reports[13]));
    CHECK(days_csv(run_simulation(small_schedule(), quiet(0.15, 1, true))) == days_csv(reports[13]));
  }
  SECTION("a repeated cell is bit-identical") {
    GridConfig twice{quiet(0, 0, false), {0.25, 0.25}, {2}, {true}, 2};
    const auto r = sweep(small_schedule(), twice);
    CHECK(days_csv(r[0]) == days_csv(r[1]));
    CHECK(r[0].updates.size() == r[1].updates.size());
  }
  CHECK_THROWS(sweep(small_schedule(), GridConfig{quiet(0, 0, false), {}, {1}, {true}, 1}));
}

TEST_CASE("summary statistics") {
  SimReport r;
  r.theta = 0.1;
  r.days = {{0, 1, 100, 40, 90, 10, false, {}, {}, false}, {1, 1, 100, 60, 70, 20, true, 1.0, 2.0, false}};
  for (double t : {5.0, 1.0, 3.0, 2.0, 4.0}) {
    UpdateRecord u;
    u.select_ms = t / 2;
    u.infer_ms = t / 2;
    r.updates.push_back(u);
  }
  const auto s = summarize(r);
  CHECK(s.tp_total == 200);
  CHECK(s.tp_caught == 160);
  CHECK_THAT(*s.tp_removed_pct, WithinAbs(20.0, 1e-12));
  CHECK_THAT(*s.tp_remaining_pct, WithinAbs(80.0, 1e-12));
  CHECK_THAT(*s.fp_removed_pct, WithinAbs(70.0, 1e-12));
  CHECK_THAT(*s.precision, WithinAbs(160.0 / 190.0, 1e-12));
  CHECK_THAT(*s.recall, WithinAbs(0.8, 1e-12));
  CHECK(*s.median_solve_ms == 3.0);
  CHECK(*s.p80_solve_ms == 4.0);
  CHECK(*s.p98_solve_ms == 5.0);
  CHECK(*s.max_solve_ms == 5.0);

  CHECK(percentile({1, 2, 3, 4}, 0.5) == 2);
  CHECK(percentile({7}, 0.98) == 7);
  CHECK_THROWS(percentile({}, 0.5));
}
