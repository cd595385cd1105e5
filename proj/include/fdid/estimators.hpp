#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/empirical.hpp"

namespace fdid {

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

// Point estimate plus whatever inference has been attached to it.
struct Estimate {
  std::string kind;  // "did" | "tc" | "cic" | "lqte(q)"
  double point = 0.0;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
  std::optional<std::vector<double>> influence;
  std::vector<std::string> warnings;
};

// Estimated outcome cdf of switchers at the given treatment level. The raw
// combination can be non-monotone in finite samples; quantiles are taken
// from the clipped running-maximum rearrangement, and the largest repair the
// rearrangement applied is recorded.
struct SwitcherCdf {
  int d = 0;
  StepCdf raw;
  StepCdf rearranged;
  double max_violation = 0.0;
  bool was_rearranged = false;
};

// DID of the outcome over DID of the treatment.
Estimate wald_did(const CellTable& ct);

// Time-corrected Wald ratio; requires a stable control group (within tol).
Estimate wald_tc(const CellTable& ct, double stable_tol = 0.0);

// Changes-in-changes Wald ratio; requires a stable control group.
Estimate wald_cic(const CellTable& ct, double stable_tol = 0.0);

// Quantile-quantile transform from the period-0 to the period-1 control
// distribution at treatment level d.
QqTransform qq_transform(const CellTable& ct, int d);

SwitcherCdf switcher_cdf(const CellTable& ct, int d);

// Local quantile treatment effect at rank q (binary treatment).
Estimate lqte(const CellTable& ct, double q, double stable_tol = 0.0);

struct DidDecomposition {
  double alpha = 1.0;
  double treat_gap = 0.0;    // P(D_11=1) - P(D_10=1)
  double control_gap = 0.0;  // P(D_01=1) - P(D_00=1)
  double did_d = 0.0;
  std::string interpretation;
};

// Weight alpha linking the Wald-DID to the two switcher effects: the
// Wald-DID equals alpha * Delta + (1 - alpha) * Delta'.
DidDecomposition did_decomposition(const CellTable& ct);

namespace detail {
// Shared guards: two groups, two periods, four populated (g,t) blocks.
void require_two_by_two(const CellTable& ct, const std::string& who);
// First-stage denominator E(D_11) - E(D_10) with the degenerate-design guard.
double first_stage(const CellTable& ct, const std::string& who);
}  // namespace detail

}  // namespace fdid
