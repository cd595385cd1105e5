#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/estimators.hpp"

namespace fdid {

struct BootstrapConfig {
  int replications = 999;
  std::uint64_t seed = 0;
  enum class Scheme { iid, cluster } scheme = Scheme::iid;
  enum class CiMethod { percentile, normal } ci_method = CiMethod::percentile;
  double level = 0.95;
  int threads = 0;  // 0 = hardware concurrency
};

struct BootstrapResult {
  double point = 0.0;  // statistic on the original data
  double se = 0.0;
  ConfidenceInterval ci;
  std::vector<double> replicates;  // successful replicate values, slot order
  long failed = 0;
  long requested = 0;
  std::vector<std::string> failure_examples;
};

using Statistic = std::function<double(const Dataset&)>;

// Nonparametric bootstrap of an arbitrary statistic. The iid scheme
// resamples rows, the cluster scheme resamples whole clusters. Replicate b
// draws from the stream mix_seed(cfg.seed, b), so results are deterministic
// and independent of execution order or thread count. Replicates on which
// the statistic throws are dropped and counted; more than 10% failures is an
// error.
BootstrapResult bootstrap(const Dataset& ds, const Statistic& stat, const BootstrapConfig& cfg);

// Same resamples evaluated on several statistics in one pass.
std::vector<BootstrapResult> bootstrap_many(const Dataset& ds, const std::vector<Statistic>& stats,
                                            const BootstrapConfig& cfg);

// Per-observation influence values. Plug-in means are exactly zero for the
// did and tc functions (every summand is demeaned within its cell) and zero
// up to float summation error for the cic ones.
std::vector<double> influence_did(const Dataset& ds, const CellTable& ct, double point);
std::vector<double> influence_tc(const Dataset& ds, const CellTable& ct, double point);
std::vector<double> influence_cic(const Dataset& ds, const CellTable& ct);
std::vector<double> influence_lqte(const Dataset& ds, const CellTable& ct, double q);

// sd(psi) / sqrt(n).
double influence_se(std::span<const double> influence);

// Normal-theory confidence interval point +/- z * se.
ConfidenceInterval normal_ci(double point, double se, double level);

// Writes replicate values one per line (for external diagnostics).
void write_replicates(const std::string& path, std::span<const double> replicates);

}  // namespace fdid
