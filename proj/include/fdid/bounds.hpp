#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/empirical.hpp"
#include "fdid/estimators.hpp"

namespace fdid {

struct SupportBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Default support: pooled sample minimum and maximum across all cells.
SupportBounds sample_support(const CellTable& ct);

struct QuantileBound {
  double q = 0.5;
  double lo = 0.0;
  double hi = 0.0;
};

// Per-level diagnostics of the bound constructions.
struct LevelDiagnostics {
  int d = 0;
  double lambda = 1.0;        // P(D_01=d) / P(D_00=d)
  bool proper = true;         // bound cdfs proper iff lambda >= 1
  double endpoint_mass = 0.0; // mass the indicator terms add at a support end
  // Largest monotonicity violation of the intermediates before enveloping;
  // finite samples routinely make these positive, so they are reported, not
  // enforced.
  double t_lo_violation = 0.0, t_hi_violation = 0.0;
  double c_lo_violation = 0.0, c_hi_violation = 0.0;
  // Mass the envelope construction had to append at the upper support bound
  // to complete a defective cdf.
  double completed_mass_lo = 0.0, completed_mass_hi = 0.0;
};

struct BoundsResult {
  std::string method;  // "tc" | "cic"
  double lower = 0.0;
  double upper = 0.0;
  std::vector<QuantileBound> tau;  // cic only
  SupportBounds support;
  bool collapsed = false;  // stable control: lower == upper == point estimate
  std::vector<LevelDiagnostics> levels;
  std::vector<std::string> warnings;
  // Endpoint inference, attached by the caller (bootstrap on each endpoint).
  std::optional<double> lower_se, upper_se;
  std::optional<ConfidenceInterval> lower_ci, upper_ci;
};

// Bounds on the switcher LATE under conditional common trends when the
// control group's treatment distribution moves over time. Collapse exactly
// to the Wald-TC point when it does not. Binary treatment only.
BoundsResult tc_bounds(const CellTable& ct, SupportBounds support, double stable_tol = 0.0);

// Changes-in-changes bounds on the LATE and on the requested quantile
// effects. Stable control delegates to the point estimators. Binary only.
BoundsResult cic_bounds(const CellTable& ct, std::span<const double> quantiles,
                        SupportBounds support, double stable_tol = 0.0);

// Reports, per treatment level, whether the trend-bound cdfs are proper or
// defective and how much endpoint mass the clipping terms introduce.
std::vector<LevelDiagnostics> defective_mass_report(const CellTable& ct);

namespace detail {
// Lower/upper envelopes of the unknown period-1 control outcome cdf at
// level d, represented with explicit endpoint atoms so Stieltjes means are
// exact. Exposed for the oracle tests.
StepCdf trend_cdf_lower(const CellTable& ct, int d, SupportBounds support);
StepCdf trend_cdf_upper(const CellTable& ct, int d, SupportBounds support);
}  // namespace detail

}  // namespace fdid
