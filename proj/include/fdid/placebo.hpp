#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/inference.hpp"

namespace fdid {

// Pre-period diagnostics. Each statistic is the corresponding estimator's
// numerator on a pair of pre-treatment periods and should be zero when the
// identifying assumptions hold between them.

// DID of the outcome on the placebo pair.
double placebo_did(const Dataset& ds, int raw_t_minus, int raw_t_zero);

// Outcome change in the treatment group net of the level-specific control
// trends, both measured on the placebo pair.
double placebo_tc(const Dataset& ds, int raw_t_minus, int raw_t_zero);

// Outcome change in the treatment group net of the quantile-quantile
// transport of its earlier distribution, both on the placebo pair.
double placebo_cic(const Dataset& ds, int raw_t_minus, int raw_t_zero);

struct ConditionalTrend {
  int d = 0;
  bool skipped = false;
  std::string note;
  double statistic = 0.0;
  std::optional<double> se;
  std::optional<double> tstat;
};

// Per-level DID on the placebo pair: common trends should hold conditional
// on each value of the treatment. Levels missing a cell are skipped.
std::vector<ConditionalTrend> conditional_trends(const Dataset& ds, int raw_t_minus,
                                                 int raw_t_zero);

struct PlaceboTest {
  std::string name;
  double statistic = 0.0;
  std::optional<double> se;
  std::optional<double> tstat;
};

struct PlaceboReport {
  int t_minus = 0;
  int t_zero = 0;
  // The tests speak to the identifying assumptions only when the treatment
  // distribution is stable within each group across the placebo pair.
  bool uninformative = false;
  std::vector<std::pair<int, double>> stability_pvalues;  // raw group -> p
  std::vector<PlaceboTest> tests;
  std::vector<ConditionalTrend> conditional;
  std::vector<std::string> warnings;
};

// Runs all placebo statistics on the pair, with bootstrap standard errors
// when a config is supplied. stability_threshold plays the same role as in
// supergroup classification: a p-value at or below it marks the pair's
// first stage unstable and the report uninformative.
PlaceboReport placebo_report(const Dataset& ds, int raw_t_minus, int raw_t_zero,
                             const BootstrapConfig* bootstrap_cfg, double stability_threshold);

// Default pair: the two most recent pre-treatment periods. Needs at least
// three periods.
std::pair<int, int> default_placebo_pair(const Dataset& ds);

}  // namespace fdid
