#include <doctest.h>

#include <cmath>

#include "fdid/placebo.hpp"
#include "fdid/simulate.hpp"
#include "fdid/rng.hpp"
#include "fixtures.hpp"

using namespace fdid;

namespace {

// Three periods (-1, 0, 1); periods -1 and 0 hold identical (d, y) cells in
// both groups, with every outcome on a control sample point, so every
// placebo statistic on the pair (-1, 0) must be zero (the quantile
// transport is the identity on its sample points only).
Dataset identical_pre_periods() {
  std::vector<std::array<double, 4>> rows;
  auto block = [&rows](int g, int t) {
    for (int copy = 0; copy < 5; ++copy) {
      rows.push_back({1.0 + copy, 0, static_cast<double>(g), static_cast<double>(t)});
      rows.push_back({3.0 + copy, 0, static_cast<double>(g), static_cast<double>(t)});
      rows.push_back({10.0 + copy, 1, static_cast<double>(g), static_cast<double>(t)});
      rows.push_back({12.0 + copy, 1, static_cast<double>(g), static_cast<double>(t)});
    }
  };
  for (int g = 0; g < 2; ++g) {
    block(g, -1);
    block(g, 0);
  }
  // a period-1 block so the dataset has a post period too
  for (int g = 0; g < 2; ++g) block(g, 1);
  return fixtures::from_rows(rows);
}

}  // namespace

TEST_CASE("identical pre-periods zero out every placebo statistic") {
  const Dataset ds = identical_pre_periods();
  CHECK(placebo_did(ds, -1, 0) == doctest::Approx(0.0));
  CHECK(placebo_tc(ds, -1, 0) == doctest::Approx(0.0));
  CHECK(placebo_cic(ds, -1, 0) == doctest::Approx(0.0));
  for (const auto& row : conditional_trends(ds, -1, 0)) {
    CHECK(!row.skipped);
    CHECK(row.statistic == doctest::Approx(0.0));
  }
}

TEST_CASE("placebo did is antisymmetric in the pair order") {
  Rng rng(8);
  std::vector<std::array<double, 4>> rows;
  for (int g = 0; g < 2; ++g) {
    for (int t : {-1, 0}) {
      for (int i = 0; i < 25; ++i) {
        rows.push_back({rng.normal() + 0.3 * g * (t + 1), rng.uniform01() < 0.4 ? 1.0 : 0.0,
                        static_cast<double>(g), static_cast<double>(t)});
      }
    }
  }
  const Dataset ds = fixtures::from_rows(rows);
  CHECK(placebo_did(ds, -1, 0) == doctest::Approx(-placebo_did(ds, 0, -1)).epsilon(1e-12));
}

TEST_CASE("a drifting group shows up as a non-zero placebo did") {
  // group 1 gains +c between the placebo periods, treatment shares fixed
  const double c = 1.7;
  std::vector<std::array<double, 4>> rows;
  for (int g = 0; g < 2; ++g) {
    for (int t : {-1, 0}) {
      for (int i = 0; i < 20; ++i) {
        const double drift = (g == 1 && t == 0) ? c : 0.0;
        rows.push_back({0.1 * i + drift, i % 2 ? 1.0 : 0.0, static_cast<double>(g),
                        static_cast<double>(t)});
      }
    }
  }
  const Dataset ds = fixtures::from_rows(rows);
  CHECK(placebo_did(ds, -1, 0) == doctest::Approx(c).epsilon(1e-12));
  CHECK(placebo_tc(ds, -1, 0) == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("conditional trends skip levels missing a cell") {
  // no treated units in the pre-period of the treatment group
  std::vector<std::array<double, 4>> rows;
  for (int t : {-1, 0}) {
    for (int i = 0; i < 10; ++i) {
      rows.push_back({1.0 * i, i % 2 ? 1.0 : 0.0, 0, static_cast<double>(t)});
      rows.push_back({1.0 * i, t == 0 && i == 0 ? 1.0 : 0.0, 1, static_cast<double>(t)});
    }
  }
  const Dataset ds = fixtures::from_rows(rows);
  const auto rowsout = conditional_trends(ds, -1, 0);
  bool saw_skip = false;
  for (const auto& r : rowsout) {
    if (r.d == 1) {
      CHECK(r.skipped);
      CHECK(r.note.find("empty") != std::string::npos);
      saw_skip = true;
    }
  }
  CHECK(saw_skip);
}

TEST_CASE("placebo report marks unstable pairs uninformative") {
  // treatment shares jump in group 1 between the placebo periods
  std::vector<std::array<double, 4>> rows;
  for (int g = 0; g < 2; ++g) {
    for (int t : {-1, 0}) {
      for (int i = 0; i < 30; ++i) {
        const double d = (g == 1 && t == 0) ? (i < 25 ? 1.0 : 0.0) : (i < 10 ? 1.0 : 0.0);
        rows.push_back({0.5 * i, d, static_cast<double>(g), static_cast<double>(t)});
      }
    }
  }
  const Dataset ds = fixtures::from_rows(rows);
  const PlaceboReport rep = placebo_report(ds, -1, 0, nullptr, 0.5);
  CHECK(rep.uninformative);
  REQUIRE(rep.stability_pvalues.size() == 2);
  CHECK(!rep.warnings.empty());
}

TEST_CASE("placebo report with bootstrap attaches finite ses") {
  const Dataset ds = identical_pre_periods();
  BootstrapConfig cfg;
  cfg.replications = 49;
  cfg.seed = 99;
  const PlaceboReport rep = placebo_report(ds, -1, 0, &cfg, 0.5);
  CHECK(!rep.uninformative);
  REQUIRE(rep.tests.size() == 3);
  for (const auto& t : rep.tests) {
    CHECK(t.se.has_value());
    CHECK(std::isfinite(*t.se));
  }
}

TEST_CASE("default placebo pair picks the two most recent pre-periods") {
  const Dataset ds = identical_pre_periods();
  const auto [tm, t0] = default_placebo_pair(ds);
  CHECK(tm == -1);
  CHECK(t0 == 0);
  CHECK_THROWS_AS(default_placebo_pair(fixtures::toy16()), PreconditionError);
}

TEST_CASE("simulated pre-periods: placebo statistics centered at zero") {
  // three-period DGP with common trends and a stable pre-treatment pair
  fdid::DgpConfig cfg;
  cfg.n = 1500;
  cfg.period_shares = {1.0, 1.0, 1.0};
  cfg.thresholds = {{0.5, 0.5, 0.5}, {0.7, 0.7, 0.3}};
  cfg.btrend = {0.0, 0.25, 0.5};
  cfg.gamma = {0.0, 0.6};
  cfg.tau0 = 1.0;
  BootstrapConfig bcfg;
  bcfg.replications = 99;
  const int reps = 50;
  int did_ok = 0, tc_ok = 0;
  for (int r = 0; r < reps; ++r) {
    cfg.seed = 3000 + static_cast<std::uint64_t>(r);
    bcfg.seed = cfg.seed;
    const Generated gen = generate(cfg);
    const Dataset pair = gen.data.select_periods(0, 1);
    const double stat_did = placebo_did(gen.data, 0, 1);
    const double stat_tc = placebo_tc(gen.data, 0, 1);
    const auto boots = bootstrap_many(
        pair,
        {[](const Dataset& re) { return placebo_did(re, 0, 1); },
         [](const Dataset& re) { return placebo_tc(re, 0, 1); }},
        bcfg);
    if (std::abs(stat_did) <= 2.0 * boots[0].se) ++did_ok;
    if (std::abs(stat_tc) <= 2.0 * boots[1].se) ++tc_ok;
  }
  // nominal ~95%; allow monte carlo slack
  CHECK(did_ok >= static_cast<int>(0.86 * reps));
  CHECK(tc_ok >= static_cast<int>(0.86 * reps));
}

TEST_CASE("simulated drifting trend is recovered by the placebo did") {
  // break common trends between the pre-periods by a group-1 drift c
  const double c = 0.8;
  double sum = 0.0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    fdid::DgpConfig cfg;
    cfg.n = 2000;
    cfg.seed = 9000 + static_cast<std::uint64_t>(r);
    cfg.period_shares = {1.0, 1.0, 1.0};
    cfg.thresholds = {{0.5, 0.5, 0.5}, {0.7, 0.7, 0.3}};
    cfg.btrend = {0.0, 0.25, 0.5};
    cfg.gamma = {0.0, 0.6};
    const Generated gen = generate(cfg);
    // shift group 1 outcomes in period 1 by c
    std::vector<Observation> rows(gen.data.rows().begin(), gen.data.rows().end());
    for (auto& row : rows) {
      if (row.g == 1 && row.t == 1) row.y += c;
    }
    sum += placebo_did(Dataset(std::move(rows)), 0, 1);
  }
  CHECK(sum / reps == doctest::Approx(c).epsilon(0.1));
}

TEST_CASE("simulated drifting trend is recovered by the tc and cic placebos") {
  const double c = 0.8;
  double sum_tc = 0.0, sum_cic = 0.0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    fdid::DgpConfig cfg;
    cfg.n = 2000;
    cfg.seed = 9500 + static_cast<std::uint64_t>(r);
    cfg.period_shares = {1.0, 1.0, 1.0};
    cfg.thresholds = {{0.5, 0.5, 0.5}, {0.7, 0.7, 0.3}};
    cfg.btrend = {0.0, 0.25, 0.5};
    cfg.gamma = {0.0, 0.6};
    const Generated gen = generate(cfg);
    std::vector<Observation> rows(gen.data.rows().begin(), gen.data.rows().end());
    for (auto& row : rows) {
      if (row.g == 1 && row.t == 1) row.y += c;
    }
    const Dataset shifted(std::move(rows));
    sum_tc += placebo_tc(shifted, 0, 1);
    sum_cic += placebo_cic(shifted, 0, 1);
  }
  CHECK(sum_tc / reps == doctest::Approx(c).epsilon(0.1));
  CHECK(sum_cic / reps == doctest::Approx(c).epsilon(0.1));
}
