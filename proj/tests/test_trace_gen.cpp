#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "ratetune/trace_gen.hpp"

using namespace ratetune;
using Catch::Matchers::WithinAbs;

namespace {

const TpTraceOptions no_jitter{1.5, false};

}  // namespace

TEST_CASE("lifecycle construction") {
  const auto lc = make_lifecycle("sig1", 10, 100, 2, {60, 30});
  CHECK(lc.update_days == std::vector<int>{30, 60});
  CHECK(lc.malware_appear_day == 7);
  CHECK(lc.malware_disappear_day == 97);
  CHECK(lc.lifespan() == 90);
  CHECK(lc.active_on(10));
  CHECK_FALSE(lc.active_on(100));

  const auto custom = make_lifecycle("s", 10, 20, 1, {}, 5, 0);
  CHECK(custom.malware_appear_day == 5);
  CHECK(custom.malware_disappear_day == 20);

  CHECK_THROWS_AS(make_lifecycle("s", 10, 10, 1, {}), std::invalid_argument);
  CHECK_THROWS_AS(make_lifecycle("s", 10, 20, 1, {10}), std::invalid_argument);
  CHECK_THROWS_AS(make_lifecycle("s", 10, 20, 1, {20}), std::invalid_argument);
  CHECK_THROWS_AS(make_lifecycle("", 10, 20, 1, {}), std::invalid_argument);
  CHECK_THROWS_AS(make_lifecycle("s", 10, 20, -1, {}), std::invalid_argument);
}

TEST_CASE("decay calibration") {
  CHECK_THAT(calibrate_decay(500, 100, 1).gamma, WithinAbs(std::log(500.0) / std::log(100.0), 1e-12));
  CHECK_THAT(calibrate_decay(500, 100, 1).gamma, WithinAbs(1.3495, 1e-4));
  CHECK_THAT(calibrate_decay(4, 2, 1).gamma, WithinAbs(2.0, 1e-12));
  CHECK_THROWS_AS(calibrate_decay(500, 100, 500), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_decay(500, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_decay(500, 10, 0), std::invalid_argument);

  const auto c = calibrate_decay(500, 100, 1);
  CHECK(c.at(0) == 500.0);
  CHECK_THAT(c.at(99), WithinAbs(1.0, 1e-9));
  for (int t = 1; t < 100; ++t) CHECK(c.at(t) <= c.at(t - 1));
}

TEST_CASE("true-positive trace shape") {
  const auto lc = make_lifecycle("s", 13, 113, 1, {});
  const auto curve = calibrate_decay(500, lc.malware_disappear_day - lc.malware_appear_day, 1);
  Rng rng(1);
  const auto tp = generate_tp_trace(lc, curve, no_jitter, rng);
  CHECK(tp.at(lc.malware_appear_day - 1) == 0);
  CHECK(tp.at(lc.malware_appear_day) == 500);
  CHECK(tp.at(lc.malware_disappear_day - 1) == 1);
  CHECK(tp.at(lc.malware_disappear_day) == 0);
  for (int d = lc.malware_appear_day + 1; d < lc.malware_disappear_day; ++d) CHECK(tp.at(d) <= tp.at(d - 1));
}

TEST_CASE("updates bump the true-positive level into a sawtooth") {
  const auto lc = make_lifecycle("s", 10, 200, 1, {40, 90, 91, 150});
  const auto curve = calibrate_decay(500, lc.malware_disappear_day - lc.malware_appear_day, 1);
  Rng rng(2);
  const auto tp = generate_tp_trace(lc, curve, no_jitter, rng);
  for (int u : lc.update_days) {
    CHECK(tp.at(u) >= tp.at(u - 1));
    CHECK(tp.at(u) <= 500);
  }
  CHECK(tp.at(40) > tp.at(39));
  // Between updates the trace only decays.
  std::set<int> updates(lc.update_days.begin(), lc.update_days.end());
  for (int d = lc.malware_appear_day + 1; d < lc.malware_disappear_day; ++d)
    if (!updates.contains(d)) CHECK(tp.at(d) <= tp.at(d - 1));
}

TEST_CASE("bump is capped at the initial level") {
  const auto lc = make_lifecycle("s", 10, 100, 1, {11});
  const auto curve = calibrate_decay(500, lc.malware_disappear_day - lc.malware_appear_day, 1);
  Rng rng(3);
  const auto tp = generate_tp_trace(lc, curve, {100.0, false}, rng);
  CHECK(tp.at(11) == 500);
}

TEST_CASE("jitter stays within ten percent") {
  const auto lc = make_lifecycle("s", 10, 300, 1, {});
  const auto curve = calibrate_decay(500, lc.malware_disappear_day - lc.malware_appear_day, 1);
  Rng a(4), b(4);
  const auto plain = generate_tp_trace(lc, curve, no_jitter, a);
  const auto jittered = generate_tp_trace(lc, curve, {1.5, true}, b);
  for (int d = lc.malware_appear_day; d < lc.malware_disappear_day; ++d) {
    const double y = curve.at(d - lc.malware_appear_day);
    CHECK(jittered.at(d) >= std::floor(0.9 * y));
    CHECK(jittered.at(d) <= std::ceil(1.1 * y));
  }
  Rng c(4);
  CHECK(generate_tp_trace(lc, curve, {1.5, true}, c).counts == jittered.counts);
}

TEST_CASE("false-positive trace") {
  const auto lc = make_lifecycle("s", 10, 100, 1, {40, 70});
  DailyCounts tp;
  tp.first_day = 7;
  tp.counts.assign(90, 0);
  for (int d = 7; d < 97; ++d) tp.counts[d - 7] = 600 - 5 * (d - 7);
  tp.counts[10 - 7] = 500;

  SECTION("theta zero") {
    const auto fp = generate_fp_trace(tp, lc, 0.0);
    for (auto c : fp.counts) CHECK(c == 0);
  }
  SECTION("theta scales the count at the latest intro or update day") {
    const auto fp = generate_fp_trace(tp, lc, 0.2);
    CHECK(fp.at(9) == 0);
    for (int d = 10; d < 40; ++d) CHECK(fp.at(d) == 100);
    CHECK(fp.at(40) == std::llround(0.2 * tp.at(40)));
    CHECK(fp.at(70) == std::llround(0.2 * tp.at(70)));
    CHECK(fp.at(99) == fp.at(70));
    CHECK(fp.at(100) == 0);
  }
  SECTION("piecewise constant with change points only at intro and updates") {
    const auto fp = generate_fp_trace(tp, lc, 0.37);
    for (int d = 11; d < 100; ++d)
      if (d != 40 && d != 70) CHECK(fp.at(d) == fp.at(d - 1));
  }
  CHECK_THROWS(generate_fp_trace(tp, lc, 1.5));
}

TEST_CASE("overlap distribution") {
  const OverlapDistribution def;
  CHECK(def.probabilities().size() == 4);
  CHECK_FALSE(def.overlap_free());
  CHECK(OverlapDistribution::none().overlap_free());
  CHECK_THROWS(OverlapDistribution(std::vector<double>{0.5, 0.4}));
  CHECK_THROWS(OverlapDistribution(std::vector<double>{}));
  CHECK_THROWS(OverlapDistribution(std::vector<double>{1.2, -0.2}));

  Rng rng(5);
  std::vector<int> hist(4, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hist[def.sample(rng)];
  CHECK_THAT(hist[0] / double(n), WithinAbs(0.85, 0.005));
  CHECK_THAT(hist[3] / double(n), WithinAbs(0.01, 0.002));
}

TEST_CASE("overlap assignment") {
  const std::vector<ClassifierIndex> active{2, 5, 7, 9, 11};
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const auto origin = active[rng.below(active.size())];
    const auto flags = assign_overlap(origin, active, OverlapDistribution(), rng);
    CHECK(std::find(flags.begin(), flags.end(), origin) != flags.end());
    CHECK(std::is_sorted(flags.begin(), flags.end()));
    CHECK(std::adjacent_find(flags.begin(), flags.end()) == flags.end());
    CHECK(flags.size() <= 4);
    for (auto c : flags) CHECK(std::find(active.begin(), active.end(), c) != active.end());
  }
  for (int i = 0; i < 100; ++i) CHECK(assign_overlap(5, active, OverlapDistribution::none(), rng) == FlagSet{5});
  const std::vector<ClassifierIndex> alone{3};
  const OverlapDistribution always_three(std::vector<double>{0, 0, 0, 1});
  CHECK(assign_overlap(3, alone, always_three, rng) == FlagSet{3});
  const std::vector<ClassifierIndex> two{3, 4};
  CHECK(assign_overlap(3, two, always_three, rng) == FlagSet{3, 4});

  Rng r1(7), r2(7);
  const std::vector<ClassifierIndex> origins{2, 2, 5, 9, 11, 7};
  CHECK(assign_overlap(origins, active, OverlapDistribution(), r1) ==
        assign_overlap(origins, active, OverlapDistribution(), r2));
}

TEST_CASE("schedule filtering") {
  std::vector<SignatureLifecycle> raw{
      make_lifecycle("short", 10, 16, 1, {}),   // 6 days
      make_lifecycle("seven", 10, 17, 1, {}),   // 7 days
      make_lifecycle("late", 50, 120, 1, {}),   // removed after the window
      make_lifecycle("early", -5, 40, 1, {}),   // introduced before it
  };
  const auto r = filter_schedule(raw, {0, 100});
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].signature_id == "seven");
  CHECK(r.dropped_short == 1);
  CHECK(r.dropped_outside_window == 2);
}
