#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/multigroup.hpp"

namespace fdid {

// Data-generating process with analytically known treatment effects, used
// as the oracle for the acceptance suite and for Monte Carlo studies.
//
// A unit draws (V, U0) from a Gaussian copula with correlation rho; V is
// uniform, U0 is Gaussian (or uniform when a bounded outcome is needed).
// Treatment is D = 1{V >= v_gt}; outcomes are
//   Y(0) = u0_scale * U0 + gamma_g + btrend_t
//   Y(1) = y1_sigma_t * u0_scale * U0 + gamma_g + btrend_t + tau(V)
// with tau(v) = tau0 + tau1 * v. Every switcher effect is then an interval
// mean of tau over the uniform latent, hence closed-form.
//
// Two periods model the analysis pair; more periods add pre-treatment
// history for placebo studies. The reported truths always refer to the last
// two periods.
struct DgpConfig {
  long n = 1000;
  std::uint64_t seed = 1;
  std::vector<double> group_shares{0.5, 0.5};
  std::vector<double> period_shares{0.5, 0.5};
  // thresholds[g][t]; a lower threshold means a higher treatment rate.
  std::vector<std::vector<double>> thresholds{{0.5, 0.5}, {0.5, 0.2}};
  std::vector<double> gamma;     // per-group level shift, defaults to zeros
  std::vector<double> btrend;    // per-period common trend, defaults to zeros
  double tau0 = 1.0;
  double tau1 = 0.0;
  double rho = 0.0;
  double u0_scale = 1.0;
  enum class U0Law { gauss, uniform } u0_law = U0Law::gauss;
  std::vector<double> y1_sigma;  // per-period scale on U0 in Y(1), default ones
  long cluster_size = 0;         // 0 = no cluster column

  static DgpConfig from_file(const std::string& path);
};

struct Truth {
  double delta = 0.0;        // LATE of switchers in groups whose rate rises
  double delta_prime = 0.0;  // LATE of switchers in groups whose rate falls
  double delta_star = 0.0;   // LATE of all switchers
  double alpha = 1.0;        // Wald-DID decomposition weight (two groups)
  bool constant_effect = false;
  double tau_q = 0.0;  // common value of every quantile effect when constant
};

struct Generated {
  Dataset data;
  Truth truth;
};

Generated generate(const DgpConfig& cfg);

// True supergroup labels implied by the thresholds (the "known to the
// analyst" workflow).
SupergroupMap true_supergroups(const DgpConfig& cfg);

struct McOptions {
  int reps = 100;
  std::vector<Kind> kinds{Kind::did, Kind::tc, Kind::cic};
  enum class Inference { none, analytic, bootstrap } inference = Inference::none;
  int bootstrap_replications = 299;
  double level = 0.95;
  double stable_tol = 0.05;
  int threads = 0;
};

struct McEstimatorReport {
  Kind kind = Kind::did;
  long ok = 0;
  long failed = 0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;  // against truth.delta
  double sd = 0.0;
  double rmse = 0.0;
  std::optional<double> coverage;        // CI covering truth.delta
  std::optional<double> mean_ci_length;
};

struct McReport {
  long reps = 0;
  Truth truth;
  std::vector<McEstimatorReport> estimators;
};

// Independent generate -> estimate cycles with per-replication seeds;
// deterministic for any thread count.
McReport monte_carlo(const DgpConfig& cfg, const McOptions& options);

}  // namespace fdid
