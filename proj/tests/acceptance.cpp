// Acceptance suite: one pass/fail line per criterion, non-zero exit when
// any criterion fails. Criterion 12 needs externally supplied data (see the
// README) and is skipped when the environment variables are unset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "fdid/bounds.hpp"
#include "fdid/estimators.hpp"
#include "fdid/inference.hpp"
#include "fdid/multigroup.hpp"
#include "fdid/rng.hpp"
#include "fdid/simulate.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fdid;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str(), detail.c_str(), seconds);
  if (!pass) ++failures;
}

void skip(int criterion, const std::string& what, const std::string& why) {
  std::printf("[SKIP] criterion %2d: %s (%s)\n", criterion, what.c_str(), why.c_str());
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// 1. toy16 equivalence with the brute-force formulas
void criterion_1() {
  Timer timer;
  const Dataset ds = fixtures::toy16();
  const CellTable ct(ds);
  const double did = wald_did(ct).point;
  const double tc = wald_tc(ct).point;
  const double cic = wald_cic(ct).point;
  const auto rows = oracles::to_rows(ds);
  const bool pass = std::abs(did - 28.0) <= 1e-12 && std::abs(tc - 29.0) <= 1e-12 &&
                    std::abs(cic - 30.0) <= 1e-12 &&
                    std::abs(did - oracles::wald_did(rows)) <= 1e-12 &&
                    std::abs(tc - oracles::wald_tc(rows)) <= 1e-12 &&
                    std::abs(cic - oracles::wald_cic(rows)) <= 1e-12;
  report(1, pass, "toy16 oracle equivalence: did/tc/cic = 28/29/30",
         "got " + fmt(did) + "/" + fmt(tc) + "/" + fmt(cic), timer.seconds());
}

// 2. sharp designs collapse the Wald-DID to the outcome DID
void criterion_2() {
  Timer timer;
  Rng rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::array<double, 4>> rows;
    for (int g = 0; g < 2; ++g) {
      for (int t = 0; t < 2; ++t) {
        const int n = 4 + static_cast<int>(rng.uniform_below(20));
        for (int i = 0; i < n; ++i) {
          rows.push_back({rng.normal() * 5.0 + 2.0 * g - t, static_cast<double>(g * t),
                          static_cast<double>(g), static_cast<double>(t)});
        }
      }
    }
    const CellTable ct(fixtures::from_rows(rows));
    const double did_y = ct.mean_y_gt(1, 1) - ct.mean_y_gt(1, 0) -
                         (ct.mean_y_gt(0, 1) - ct.mean_y_gt(0, 0));
    worst = std::max(worst, std::abs(wald_did(ct).point - did_y));
  }
  report(2, worst <= 1e-12, "sharp-design collapse on 20 random datasets",
         "max |W_did - DID_y| = " + fmt(worst), timer.seconds());
}

// 3. stable control: both bound families equal the point estimates
void criterion_3() {
  Timer timer;
  const CellTable ct(fixtures::toy16());
  const SupportBounds support{0.0, 30.0};
  const double tc_point = wald_tc(ct).point;
  const double cic_point = wald_cic(ct).point;
  const BoundsResult tc = tc_bounds(ct, support);
  const BoundsResult cic = cic_bounds(ct, std::vector<double>{0.5}, support);
  const double worst =
      std::max({std::abs(tc.lower - tc_point), std::abs(tc.upper - tc_point),
                std::abs(cic.lower - cic_point), std::abs(cic.upper - cic_point)});
  report(3, worst <= 1e-10, "stable-control bound collapse on toy16",
         "max deviation " + fmt(worst), timer.seconds());
}

// 4. integration by parts on the raw signed switcher cdfs
void criterion_4() {
  Timer timer;
  double worst = 0.0;
  {
    const CellTable ct(fixtures::toy16());
    const double byparts =
        integrate_difference(switcher_cdf(ct, 0).raw, switcher_cdf(ct, 1).raw);
    worst = std::abs(byparts - wald_cic(ct).point);
  }
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::array<double, 4>> rows;
    for (int t = 0; t < 2; ++t) {
      for (int i = 0; i < 8; ++i) rows.push_back({rng.normal() * 2.0, i < 4 ? 1.0 : 0.0, 0, 1.0 * t});
    }
    for (int i = 0; i < 10; ++i) rows.push_back({rng.normal() * 2.0, i < 3 ? 1.0 : 0.0, 1, 0});
    for (int i = 0; i < 10; ++i) {
      rows.push_back({rng.normal() * 2.0 + 1.0, i < 7 ? 1.0 : 0.0, 1, 1});
    }
    const CellTable ct(fixtures::from_rows(rows));
    const double byparts =
        integrate_difference(switcher_cdf(ct, 0).raw, switcher_cdf(ct, 1).raw);
    worst = std::max(worst, std::abs(byparts - wald_cic(ct).point));
  }
  report(4, worst <= 1e-10, "integration-by-parts identity on toy16 + 20 random datasets",
         "max deviation " + fmt(worst), timer.seconds());
}

DgpConfig stable_dgp(long n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.tau0 = 1.0;
  cfg.thresholds = {{0.5, 0.5}, {0.7, 0.3}};
  cfg.gamma = {0.0, 0.8};
  cfg.btrend = {0.0, 0.4};
  cfg.rho = 0.3;
  return cfg;
}

// 5. consistency of all three estimators on a constant-effect dgp
void criterion_5() {
  Timer timer;
  McOptions opt;
  opt.reps = 200;
  opt.stable_tol = 1.0;  // the dgp is stable by construction
  const McReport rep = monte_carlo(stable_dgp(10000, 505), opt);
  double worst = 0.0;
  std::string detail;
  for (const auto& er : rep.estimators) {
    worst = std::max(worst, std::abs(er.mean_bias));
    detail += kind_name(er.kind) + " " + fmt(er.mean_bias) + " ";
  }
  report(5, worst < 0.03, "monte-carlo consistency, n=10000, R=200, |bias| < 0.03",
         "mean bias: " + detail, timer.seconds());
}

// 6. the Wald-DID decomposition weight under a moving control group
void criterion_6() {
  Timer timer;
  DgpConfig cfg;
  cfg.n = 10000;
  cfg.seed = 606;
  // delta = 1 on [0.5, 0.8), delta' = 0.4 on [0.25, 0.4), alpha = 2
  cfg.tau0 = -0.2;
  cfg.tau1 = 0.6 / 0.325;
  cfg.thresholds = {{0.4, 0.25}, {0.8, 0.5}};
  cfg.gamma = {0.0, 0.8};
  cfg.btrend = {0.0, 0.4};
  McOptions opt;
  opt.reps = 200;
  opt.kinds = {Kind::did};
  const McReport rep = monte_carlo(cfg, opt);
  const Truth truth = rep.truth;
  const double target = truth.alpha * truth.delta + (1.0 - truth.alpha) * truth.delta_prime;
  const auto& er = rep.estimators[0];
  const double mcse = er.sd / std::sqrt(static_cast<double>(er.ok));
  const bool matches_mix = std::abs(er.mean_estimate - target) <= 3.0 * mcse;
  const bool differs_from_delta = std::abs(er.mean_estimate - truth.delta) > 5.0 * mcse;
  report(6, matches_mix && differs_from_delta,
         "decomposition: W_did targets alpha*delta + (1-alpha)*delta'",
         "mean " + fmt(er.mean_estimate) + " vs mix " + fmt(target) + " (delta " +
             fmt(truth.delta) + ", mcse " + fmt(mcse) + ")",
         timer.seconds());
}

// 7. percentile bootstrap coverage for did and tc
void criterion_7() {
  Timer timer;
  DgpConfig cfg = stable_dgp(2000, 707);
  McOptions opt;
  opt.reps = 500;
  opt.kinds = {Kind::did, Kind::tc};
  opt.inference = McOptions::Inference::bootstrap;
  opt.bootstrap_replications = 299;
  opt.stable_tol = 1.0;
  const McReport rep = monte_carlo(cfg, opt);
  bool pass = true;
  std::string detail;
  for (const auto& er : rep.estimators) {
    const double cov = er.coverage.value_or(0.0);
    pass = pass && cov >= 0.915 && cov <= 0.98;
    detail += kind_name(er.kind) + " " + fmt(cov) + " ";
  }
  report(7, pass, "bootstrap coverage in [91.5%, 98%], n=2000, B=299, R=500",
         "coverage: " + detail, timer.seconds());
}

// 8. analytic influence-function ses track the bootstrap
void criterion_8() {
  Timer timer;
  const Generated gen = generate(stable_dgp(5000, 808));
  const Dataset& ds = gen.data;
  const CellTable ct(ds);
  BootstrapConfig cfg;
  cfg.replications = 999;
  cfg.seed = 8088;

  const double w_did = wald_did(ct).point;
  const double w_tc = wald_tc(ct, 1.0).point;
  const double se_did = influence_se(influence_did(ds, ct, w_did));
  const double se_tc = influence_se(influence_tc(ds, ct, w_tc));
  const double se_cic = influence_se(influence_cic(ds, ct));

  const auto boots = bootstrap_many(
      ds,
      {[](const Dataset& d) { return wald_did(CellTable(d, false)).point; },
       [](const Dataset& d) {
         return wald_tc(CellTable(d, false), std::numeric_limits<double>::infinity()).point;
       },
       [](const Dataset& d) {
         return wald_cic(CellTable(d), std::numeric_limits<double>::infinity()).point;
       }},
      cfg);
  const double r_did = std::abs(se_did - boots[0].se) / boots[0].se;
  const double r_tc = std::abs(se_tc - boots[1].se) / boots[1].se;
  const double r_cic = std::abs(se_cic - boots[2].se) / boots[2].se;
  report(8, r_did < 0.10 && r_tc < 0.10 && r_cic < 0.15,
         "analytic vs bootstrap se, n=5000 (did/tc 10%, cic 15%)",
         "rel gaps " + fmt(r_did) + "/" + fmt(r_tc) + "/" + fmt(r_cic), timer.seconds());
}

// 9. bound intervals contain the truth on an unstable-control dgp
void criterion_9() {
  Timer timer;
  DgpConfig cfg;
  cfg.n = 5000;
  cfg.tau0 = 1.0;
  cfg.thresholds = {{0.5, 0.38}, {0.7, 0.3}};  // control rate rises .5 -> .62
  cfg.gamma = {0.0, 0.5};
  cfg.btrend = {0.0, 0.3};
  cfg.u0_law = DgpConfig::U0Law::uniform;
  cfg.u0_scale = 2.0;
  // exact outcome support implied by the configuration
  const SupportBounds support{-2.0, 2.0 + 0.5 + 0.3 + 1.0};
  const int reps = 200;
  int tc_hit = 0, cic_hit = 0;
  for (int r = 0; r < reps; ++r) {
    cfg.seed = mix_seed(909, static_cast<std::uint64_t>(r));
    const Generated gen = generate(cfg);
    const CellTable ct(gen.data);
    const BoundsResult tc = tc_bounds(ct, support);
    if (tc.lower <= gen.truth.delta && gen.truth.delta <= tc.upper) ++tc_hit;
    const BoundsResult cic = cic_bounds(ct, {}, support);
    if (cic.lower <= gen.truth.delta && gen.truth.delta <= cic.upper) ++cic_hit;
  }
  const double tc_rate = static_cast<double>(tc_hit) / reps;
  const double cic_rate = static_cast<double>(cic_hit) / reps;
  report(9, tc_rate >= 0.93 && cic_rate >= 0.93,
         "bound validity on an unstable-control dgp (>= 93% of 200 reps)",
         "tc " + fmt(tc_rate) + ", cic " + fmt(cic_rate), timer.seconds());
}

// 10. weights on ordered treatments telescope to one
void criterion_10() {
  Timer timer;
  double worst = 0.0;
  bool binary_ok = false;
  {
    const AcrWeights w = acr_weights(CellTable(fixtures::toy16()));
    binary_ok = w.w.size() == 1 && std::abs(w.w[0] - 1.0) <= 1e-12;
  }
  Rng rng(1010);
  int done = 0;
  while (done < 25) {
    std::vector<std::array<double, 4>> rows;
    const int dmax = 1 + static_cast<int>(rng.uniform_below(5));
    for (int g = 0; g < 2; ++g) {
      for (int t = 0; t < 2; ++t) {
        for (int i = 0; i < 40; ++i) {
          rows.push_back(
              {rng.normal(),
               static_cast<double>(rng.uniform_below(static_cast<std::uint64_t>(dmax) + 1)),
               static_cast<double>(g), static_cast<double>(t)});
        }
      }
    }
    try {
      const AcrWeights w = acr_weights(CellTable(fixtures::from_rows(rows)));
      double total = 0.0;
      for (double x : w.w) total += x;
      worst = std::max(worst, std::abs(total - 1.0));
      ++done;
    } catch (const DesignError&) {
      // flat first stage in the random draw; try another
    }
  }
  report(10, binary_ok && worst <= 1e-12,
         "acr weights: sum to one on random ordered data, binary weight = 1",
         "max |sum - 1| = " + fmt(worst), timer.seconds());
}

// 11. supergroup aggregation targets the pooled switcher effect
void criterion_11() {
  Timer timer;
  DgpConfig cfg;
  cfg.n = 8000;
  cfg.tau0 = 1.5;
  cfg.tau1 = 0.0;
  cfg.group_shares = {0.4, 0.3, 0.3};
  cfg.thresholds = {{0.5, 0.5}, {0.7, 0.4}, {0.35, 0.65}};
  cfg.gamma = {0.0, 0.5, -0.5};
  cfg.btrend = {0.0, 0.3};
  const SupergroupMap map = true_supergroups(cfg);

  bool pass = true;
  std::string detail;
  const int reps = 60;
  for (Kind kind : {Kind::did, Kind::tc, Kind::cic}) {
    double sum = 0.0, ss = 0.0;
    double delta_star = 0.0;
    for (int r = 0; r < reps; ++r) {
      cfg.seed = mix_seed(1111, static_cast<std::uint64_t>(r));
      const Generated gen = generate(cfg);
      delta_star = gen.truth.delta_star;
      const double est = aggregate(gen.data, map, kind, 1.0).combined.point;
      sum += est;
      ss += est * est;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt((ss - reps * mean * mean) / (reps - 1));
    const double mcse = sd / std::sqrt(static_cast<double>(reps));
    pass = pass && std::abs(mean - delta_star) <= 3.0 * mcse;
    detail += kind_name(kind) + " " + fmt(mean) + " ";
  }

  // degenerate case: two supergroups give weight one exactly
  {
    const Dataset ds = fixtures::toy16();
    SupergroupMap two;
    two.groups.push_back({0, 0, 1.0, 0.0, false});
    two.groups.push_back({1, 1, 0.0, 0.5, false});
    const AggregateEstimate agg = aggregate(ds, two, Kind::did, 0.0);
    pass = pass && agg.w10 == 1.0;
  }
  report(11, pass, "supergroup aggregation hits delta* (3 mcse); two-group w10 = 1",
         "means: " + detail, timer.seconds());
}

// 12. optional replication against externally supplied microdata
void criterion_12() {
  const char* table1 = std::getenv("FDID_TABLE1_CSV");
  const char* table3 = std::getenv("FDID_TABLE3_CSV");
  if (table1 == nullptr && table3 == nullptr) {
    skip(12, "reference replication of the published survey estimates",
         "set FDID_TABLE1_CSV / FDID_TABLE3_CSV to the prepared extracts");
    return;
  }
  Timer timer;
  bool pass = true;
  std::string detail;
  if (table1 != nullptr) {
    const Dataset ds = Dataset::load_table(table1, Schema{});
    const double did = wald_did(CellTable(ds, false)).point;
    pass = pass && std::abs(did - 0.195) <= 0.005;
    detail += "wald_did " + fmt(did) + " (target 0.195) ";
    // the published interval bounds use the ordered-treatment extension,
    // which is out of scope here; only the point estimate is checked
  }
  if (table3 != nullptr) {
    const Dataset ds = Dataset::load_table(table3, Schema{});
    SupergroupMap map;
    for (int g = 0; g < ds.num_groups(); ++g) {
      const int raw = ds.raw_group_label(g);
      map.groups.push_back({raw, raw, 0.0, 0.0, false});  // g already holds the label
    }
    const double targets[3] = {0.140, 0.101, 0.099};
    const Kind kinds[3] = {Kind::did, Kind::tc, Kind::cic};
    for (int i = 0; i < 3; ++i) {
      const double est = aggregate(ds, map, kinds[i], 1.0).combined.point;
      pass = pass && std::abs(est - targets[i]) <= 0.005;
      detail += kind_name(kinds[i]) + "* " + fmt(est) + " ";
    }
  }
  report(12, pass, "reference replication of the published survey estimates", detail,
         timer.seconds());
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
