#include "fdid/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace fdid {

namespace detail {

void require_two_by_two(const CellTable& ct, const std::string& who) {
  if (ct.num_groups() != 2 || ct.num_periods() != 2) {
    throw PreconditionError(who, "two-group estimators need exactly two groups and two periods");
  }
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) ct.require_gt(g, t, who);
  }
}

double first_stage(const CellTable& ct, const std::string& who) {
  const double gap = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0);
  if (std::abs(gap) <= kDenomEps) {
    throw DesignError(who, "degenerate first stage: E(D|g=1,t=1) - E(D|g=1,t=0) is zero");
  }
  return gap;
}

}  // namespace detail

namespace {

void require_stable(const DesignInfo& design, const std::string& who) {
  if (!design.stable_control) {
    throw DesignError(who, "control-group treatment shares move by " +
                               std::to_string(design.max_control_share_gap) +
                               " (> tol); this estimator needs a stable control group -- use "
                               "`bounds` for partial identification instead");
  }
}

// Treatment levels observed in the treatment group at period 0; these are
// the levels whose control cells the TC/CIC corrections require.
std::vector<int> levels_in_d10(const CellTable& ct) {
  std::vector<int> ds;
  for (int d = 0; d <= ct.dmax(); ++d) {
    if (ct.has_cell(d, 1, 0)) ds.push_back(d);
  }
  return ds;
}

}  // namespace

Estimate wald_did(const CellTable& ct) {
  detail::require_two_by_two(ct, "estimators");
  const double did_y = ct.mean_y_gt(1, 1) - ct.mean_y_gt(1, 0) -
                       (ct.mean_y_gt(0, 1) - ct.mean_y_gt(0, 0));
  const double did_d = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0) -
                       (ct.mean_d_gt(0, 1) - ct.mean_d_gt(0, 0));
  if (std::abs(did_d) <= kDenomEps) {
    throw DesignError("estimators",
                      "weak design: the treatment DID is zero, the Wald-DID is undefined");
  }
  Estimate e;
  e.kind = "did";
  e.point = did_y / did_d;
  return e;
}

Estimate wald_tc(const CellTable& ct, double stable_tol) {
  detail::require_two_by_two(ct, "estimators");
  require_stable(check_design(ct, stable_tol), "estimators");
  const double denom = detail::first_stage(ct, "estimators");

  // E(Y_10 + delta_{D_10}) = E(Y_10) + sum_d p_{d|10} * delta_d with
  // delta_d the control-group outcome trend at level d.
  double correction = 0.0;
  for (int d : levels_in_d10(ct)) {
    ct.require_cell(d, 0, 0, "estimators");
    ct.require_cell(d, 0, 1, "estimators");
    const double delta_d = ct.mean_y(d, 0, 1) - ct.mean_y(d, 0, 0);
    correction += ct.share(d, 1, 0) * delta_d;
  }
  Estimate e;
  e.kind = "tc";
  e.point = (ct.mean_y_gt(1, 1) - (ct.mean_y_gt(1, 0) + correction)) / denom;
  return e;
}

QqTransform qq_transform(const CellTable& ct, int d) {
  ct.require_cell(d, 0, 0, "empirical");
  ct.require_cell(d, 0, 1, "empirical");
  return QqTransform(StepCdf::ecdf(ct.sample(d, 0, 0)), StepCdf::ecdf(ct.sample(d, 0, 1)));
}

Estimate wald_cic(const CellTable& ct, double stable_tol) {
  detail::require_two_by_two(ct, "estimators");
  require_stable(check_design(ct, stable_tol), "estimators");
  const double denom = detail::first_stage(ct, "estimators");

  Estimate e;
  e.kind = "cic";
  double transformed_sum = 0.0;
  long transformed_n = 0;
  long outside = 0;
  for (int d : levels_in_d10(ct)) {
    const QqTransform q = qq_transform(ct, d);
    for (double y : ct.sample(d, 1, 0)) {
      transformed_sum += q(y);
      ++transformed_n;
      if (q.out_of_source_support(y)) ++outside;
    }
  }
  if (outside > 0) {
    e.warnings.push_back(std::to_string(outside) +
                         " treatment-group period-0 outcome(s) fall outside the control-cell "
                         "sample range; they were mapped to the nearest control quantile");
  }
  const double counterfactual = transformed_sum / static_cast<double>(transformed_n);
  e.point = (ct.mean_y_gt(1, 1) - counterfactual) / denom;
  return e;
}

SwitcherCdf switcher_cdf(const CellTable& ct, int d) {
  detail::require_two_by_two(ct, "estimators");
  ct.require_cell(d, 1, 1, "estimators");
  const double p11 = ct.share(d, 1, 1);
  const double p10 = ct.share(d, 1, 0);
  if (std::abs(p11 - p10) <= kDenomEps) {
    throw PreconditionError("estimators", "switcher cdf undefined at level d=" + std::to_string(d) +
                                              ": P(D_11=d) equals P(D_10=d)");
  }

  const StepCdf f11 = StepCdf::ecdf(ct.sample(d, 1, 1));

  // Transformed period-0 sample Q_d(Y) for treated-group units at level d;
  // empty when nobody in the treatment group held level d at period 0, in
  // which case the combination collapses to F_{Y_d11}.
  std::vector<double> transformed;
  if (p10 > 0.0) {
    const QqTransform q = qq_transform(ct, d);
    for (double y : ct.sample(d, 1, 0)) transformed.push_back(q(y));
    std::sort(transformed.begin(), transformed.end());
  }

  std::vector<double> grid = f11.grid();
  grid.insert(grid.end(), transformed.begin(), transformed.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> values(grid.size());
  if (transformed.empty()) {
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = f11(grid[i]);
  } else {
    const StepCdf fq = StepCdf::ecdf(transformed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = (p11 * f11(grid[i]) - p10 * fq(grid[i])) / (p11 - p10);
    }
  }

  SwitcherCdf out{d, StepCdf(grid, values, false), StepCdf(grid, values, false), 0.0, false};
  StepCdf mono = clip01(envelope_sup_below(out.raw));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.max_violation = std::max(out.max_violation, std::abs(mono.values()[i] - values[i]));
  }
  out.was_rearranged = out.max_violation > 0.0;
  out.rearranged = std::move(mono);
  return out;
}

Estimate lqte(const CellTable& ct, double q, double stable_tol) {
  if (!(q > 0.0 && q < 1.0)) {
    throw PreconditionError("estimators", "quantile order must lie strictly between 0 and 1");
  }
  if (ct.dmax() != 1) {
    throw PreconditionError("estimators", "quantile effects are defined for a binary treatment");
  }
  require_stable(check_design(ct, stable_tol), "estimators");
  const SwitcherCdf f1 = switcher_cdf(ct, 1);
  const SwitcherCdf f0 = switcher_cdf(ct, 0);
  Estimate e;
  e.kind = "lqte(" + std::to_string(q) + ")";
  e.point = f1.rearranged.quantile(q) - f0.rearranged.quantile(q);
  if (f1.max_violation > 0.0 || f0.max_violation > 0.0) {
    e.warnings.push_back("switcher cdf was non-monotone in-sample (max violation " +
                         std::to_string(std::max(f1.max_violation, f0.max_violation)) +
                         "); quantiles use the monotone rearrangement");
  }
  return e;
}

DidDecomposition did_decomposition(const CellTable& ct) {
  detail::require_two_by_two(ct, "estimators");
  DidDecomposition out;
  out.treat_gap = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0);
  out.control_gap = ct.mean_d_gt(0, 1) - ct.mean_d_gt(0, 0);
  out.did_d = out.treat_gap - out.control_gap;
  if (std::abs(out.did_d) <= kDenomEps) {
    throw DesignError("estimators", "weak design: the treatment DID is zero");
  }
  out.alpha = out.treat_gap / out.did_d;
  if (std::abs(out.alpha - 1.0) <= kDenomEps) {
    out.interpretation =
        "alpha = 1: the control treatment rate is stable, the Wald-DID equals the switcher LATE "
        "under common trends and stable effects over time";
  } else if (out.alpha > 1.0) {
    out.interpretation =
        "alpha > 1: the control treatment rate rises, the Wald-DID is a weighted DIFFERENCE of "
        "the two switcher LATEs and can flip sign even when all effects share one sign";
  } else {
    out.interpretation =
        "alpha < 1: the control treatment rate falls, the Wald-DID is a weighted average of the "
        "two switcher LATEs";
  }
  return out;
}

}  // namespace fdid
