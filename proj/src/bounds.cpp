#include "fdid/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_0d(const CellTable& ct, int d) {
  const double p0 = ct.share(d, 0, 0);
  const double p1 = ct.share(d, 0, 1);
  if (p0 == 0.0 && p1 == 0.0) return 1.0;  // level absent from the control group
  if (p0 == 0.0) {
    throw PreconditionError(
        "bounds", "level d=" + std::to_string(d) +
                      " is empty in the control group at period 0 but not at period 1; the share "
                      "ratio is undefined and we do not impute it");
  }
  return p1 / p0;
}

void check_support(const CellTable& ct, const SupportBounds& s) {
  if (!(s.lo <= s.hi)) throw PreconditionError("bounds", "support bounds out of order");
  if (ct.pooled_min() < s.lo || ct.pooled_max() > s.hi) {
    throw PreconditionError("bounds", "outcomes fall outside the declared support [" +
                                          std::to_string(s.lo) + ", " + std::to_string(s.hi) + "]");
  }
}

std::vector<double> grid_with_endpoints(std::vector<double> grid, const SupportBounds& s) {
  if (std::isfinite(s.lo)) grid.push_back(s.lo);
  if (std::isfinite(s.hi)) grid.push_back(s.hi);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double max_monotonicity_violation(const std::vector<double>& v) {
  double run = -kInf, worst = 0.0;
  for (double x : v) {
    run = std::max(run, x);
    worst = std::max(worst, run - x);
  }
  return worst;
}

void require_binary(const CellTable& ct) {
  if (ct.dmax() > 1) {
    throw PreconditionError("bounds", "partial-identification bounds cover a binary treatment "
                                      "only; recode or bin the treatment");
  }
}

bool stable_within(const CellTable& ct, double tol) {
  double worst = 0.0;
  for (int d = 0; d <= ct.dmax(); ++d) {
    worst = std::max(worst, std::abs(ct.share(d, 0, 1) - ct.share(d, 0, 0)));
  }
  return worst <= tol;
}

}  // namespace

SupportBounds sample_support(const CellTable& ct) {
  return SupportBounds{ct.pooled_min(), ct.pooled_max()};
}

namespace detail {

// F_lower(y) = M01(1 - lambda (1 - F_{d01}(y))) - M01(1 - lambda) 1{y < hi}
StepCdf trend_cdf_lower(const CellTable& ct, int d, SupportBounds s) {
  const double lam = lambda_0d(ct, d);
  const double late_atom = clip01(1.0 - lam);
  if (late_atom > 0.0 && !std::isfinite(s.hi)) {
    throw PreconditionError("bounds", "trend bound places mass at an unbounded upper support; "
                                      "declare finite support bounds");
  }
  const bool have_f01 = ct.has_cell(d, 0, 1);
  std::vector<double> grid =
      grid_with_endpoints(have_f01 ? std::vector<double>(ct.sample(d, 0, 1).begin(),
                                                         ct.sample(d, 0, 1).end())
                                   : std::vector<double>{},
                          s);
  const StepCdf f01 = have_f01 ? StepCdf::ecdf(ct.sample(d, 0, 1))
                               : StepCdf({s.lo}, {1.0}, true);  // unused when lam == 0
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double base = clip01(1.0 - lam * (1.0 - (have_f01 ? f01(grid[i]) : 0.0)));
    values[i] = base - (grid[i] < s.hi ? late_atom : 0.0);
  }
  StepCdf out(std::move(grid), std::move(values), true);
  out.declare_support(s.lo, s.hi);
  return out;
}

// F_upper(y) = M01(lambda F_{d01}(y)) + (1 - M01(lambda)) 1{y >= lo}
StepCdf trend_cdf_upper(const CellTable& ct, int d, SupportBounds s) {
  const double lam = lambda_0d(ct, d);
  const double early_atom = 1.0 - clip01(lam);
  if (early_atom > 0.0 && !std::isfinite(s.lo)) {
    throw PreconditionError("bounds", "trend bound places mass at an unbounded lower support; "
                                      "declare finite support bounds");
  }
  const bool have_f01 = ct.has_cell(d, 0, 1);
  std::vector<double> grid =
      grid_with_endpoints(have_f01 ? std::vector<double>(ct.sample(d, 0, 1).begin(),
                                                         ct.sample(d, 0, 1).end())
                                   : std::vector<double>{},
                          s);
  const StepCdf f01 = have_f01 ? StepCdf::ecdf(ct.sample(d, 0, 1)) : StepCdf({s.lo}, {1.0}, true);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double base = clip01(lam * (have_f01 ? f01(grid[i]) : 0.0));
    values[i] = base + (grid[i] >= s.lo ? early_atom : 0.0);
  }
  StepCdf out(std::move(grid), std::move(values), true);
  out.declare_support(s.lo, s.hi);
  return out;
}

}  // namespace detail

std::vector<LevelDiagnostics> defective_mass_report(const CellTable& ct) {
  std::vector<LevelDiagnostics> out;
  for (int d = 0; d <= ct.dmax(); ++d) {
    if (!ct.has_cell(d, 0, 0) && !ct.has_cell(d, 0, 1)) continue;
    LevelDiagnostics diag;
    diag.d = d;
    diag.lambda = lambda_0d(ct, d);
    diag.proper = diag.lambda >= 1.0;
    diag.endpoint_mass = 1.0 - clip01(diag.lambda);
    out.push_back(diag);
  }
  return out;
}

BoundsResult tc_bounds(const CellTable& ct, SupportBounds support, double stable_tol) {
  detail::require_two_by_two(ct, "bounds");
  require_binary(ct);
  check_support(ct, support);
  const double gap = detail::first_stage(ct, "bounds");

  BoundsResult res;
  res.method = "tc";
  res.support = support;
  res.collapsed = stable_within(ct, stable_tol);

  // E(Y_10 + delta_{D_10}) with delta_d replaced by its envelope per level.
  double corr_hi = 0.0;  // uses delta_upper -> lower W
  double corr_lo = 0.0;  // uses delta_lower -> upper W
  for (int d = 0; d <= ct.dmax(); ++d) {
    if (!ct.has_cell(d, 1, 0)) continue;
    ct.require_cell(d, 0, 0, "bounds");
    const double e00 = ct.mean_y(d, 0, 0);
    const StepCdf f_lo = detail::trend_cdf_lower(ct, d, support);
    const StepCdf f_hi = detail::trend_cdf_upper(ct, d, support);
    const double delta_hi = stieltjes_mean(f_lo) - e00;
    const double delta_lo = stieltjes_mean(f_hi) - e00;
    const double w = ct.share(d, 1, 0);
    corr_hi += w * delta_hi;
    corr_lo += w * delta_lo;
  }
  const double ey11 = ct.mean_y_gt(1, 1);
  const double ey10 = ct.mean_y_gt(1, 0);
  res.lower = (ey11 - (ey10 + corr_hi)) / gap;
  res.upper = (ey11 - (ey10 + corr_lo)) / gap;
  if (gap < 0.0) std::swap(res.lower, res.upper);
  res.levels = defective_mass_report(ct);
  return res;
}

namespace {

// Everything cic_bounds needs for one treatment level.
struct CicLevel {
  StepCdf f_lo;  // sup-below envelope of C_d(T_lower), completed at the top
  StepCdf f_hi;  // inf-above envelope of C_d(T_upper), completed at the top
  LevelDiagnostics diag;
};

CicLevel cic_level(const CellTable& ct, int d, const SupportBounds& s,
                   const std::vector<double>& grid) {
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) ct.require_cell(d, g, t, "bounds");
  }
  const double p11 = ct.share(d, 1, 1);
  const double p10 = ct.share(d, 1, 0);
  if (std::abs(p11 - p10) <= kDenomEps) {
    throw PreconditionError("bounds", "level d=" + std::to_string(d) +
                                          ": P(D_11=d) equals P(D_10=d), the switcher cdf "
                                          "denominator vanishes");
  }
  const double lam0 = lambda_0d(ct, d);
  const double lam1 = p11 / p10;
  if (std::abs(lam0 - 1.0) <= kDenomEps) {
    throw PreconditionError("bounds", "level d=" + std::to_string(d) +
                                          ": control shares are stable, use the point estimator");
  }

  const StepCdf f01 = StepCdf::ecdf(ct.sample(d, 0, 1));
  const StepCdf f11 = StepCdf::ecdf(ct.sample(d, 1, 1));
  const RankMap h(StepCdf::ecdf(ct.sample(d, 1, 0)), StepCdf::ecdf(ct.sample(d, 0, 0)));

  const std::size_t m = grid.size();
  std::vector<double> t_lo(m), t_hi(m), c_lo(m), c_hi(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double y = grid[i];
    const double a01 = f01(y);
    const double a11 = f11(y);
    t_lo[i] = clip01((lam0 * a01 - h.inverse(lam1 * a11)) / (lam0 - 1.0));
    t_hi[i] = clip01((lam0 * a01 - h.inverse(lam1 * a11 + (1.0 - lam1))) / (lam0 - 1.0));
    const double g_lo = lam0 * a01 + (1.0 - lam0) * t_lo[i];
    const double g_hi = lam0 * a01 + (1.0 - lam0) * t_hi[i];
    c_lo[i] = (p11 * a11 - p10 * h(g_lo)) / (p11 - p10);
    c_hi[i] = (p11 * a11 - p10 * h(g_hi)) / (p11 - p10);
  }

  CicLevel out{StepCdf({0.0}, {1.0}, true), StepCdf({0.0}, {1.0}, true), {}};
  out.diag.d = d;
  out.diag.lambda = lam0;
  out.diag.proper = lam0 >= 1.0;
  out.diag.endpoint_mass = 1.0 - clip01(lam0);
  out.diag.t_lo_violation = max_monotonicity_violation(t_lo);
  out.diag.t_hi_violation = max_monotonicity_violation(t_hi);
  out.diag.c_lo_violation = max_monotonicity_violation(c_lo);
  out.diag.c_hi_violation = max_monotonicity_violation(c_hi);

  StepCdf lo = clip01(envelope_sup_below(StepCdf(grid, std::move(c_lo), false)));
  StepCdf hi = clip01(envelope_inf_above(StepCdf(grid, std::move(c_hi), false)));
  lo.declare_support(s.lo, s.hi);
  hi.declare_support(s.lo, s.hi);

  // On a declared bounded support the switcher cdf reaches 1 at the upper
  // bound; any deficit left by a defective intermediate becomes an atom
  // there, matching the integration-by-parts value of the envelope bound.
  auto complete = [&](StepCdf& f, double& added) {
    added = 1.0 - f.terminal();
    if (added <= 0.0) {
      added = 0.0;
      return;
    }
    if (!std::isfinite(s.hi)) return;  // left defective; moments may be infinite
    std::vector<double> v = f.values();
    v.back() = 1.0;
    f = StepCdf(f.grid(), std::move(v), true);
    f.declare_support(s.lo, s.hi);
  };
  complete(lo, out.diag.completed_mass_lo);
  complete(hi, out.diag.completed_mass_hi);
  out.f_lo = std::move(lo);
  out.f_hi = std::move(hi);
  return out;
}

bool defective(const StepCdf& f) {
  return 1.0 - f.terminal() > kDenomEps && !std::isfinite(f.support_hi());
}

}  // namespace

BoundsResult cic_bounds(const CellTable& ct, std::span<const double> quantiles,
                        SupportBounds support, double stable_tol) {
  detail::require_two_by_two(ct, "bounds");
  require_binary(ct);
  check_support(ct, support);

  BoundsResult res;
  res.method = "cic";
  res.support = support;

  if (stable_within(ct, stable_tol)) {
    // Stable control: the intermediates lose their T-dependence and the
    // bounds are the point estimands themselves.
    res.collapsed = true;
    const double point = wald_cic(ct, stable_tol).point;
    res.lower = res.upper = point;
    for (double q : quantiles) {
      const double t = lqte(ct, q, stable_tol).point;
      res.tau.push_back({q, t, t});
    }
    res.levels = defective_mass_report(ct);
    return res;
  }

  std::vector<double> grid = grid_with_endpoints(ct.pooled_grid(), support);
  const CicLevel l0 = cic_level(ct, 0, support, grid);
  const CicLevel l1 = cic_level(ct, 1, support, grid);
  res.levels = {l0.diag, l1.diag};

  // On an unbounded support a defective envelope leaves mass at +infinity
  // and the affected bound is reported as infinite (conservatively: any
  // defective component widens its side).
  if (defective(l1.f_hi) || defective(l0.f_lo)) {
    res.lower = -kInf;
  } else {
    res.lower = stieltjes_mean(l1.f_hi) - stieltjes_mean(l0.f_lo);
  }
  if (defective(l1.f_lo) || defective(l0.f_hi)) {
    res.upper = kInf;
  } else {
    res.upper = stieltjes_mean(l1.f_lo) - stieltjes_mean(l0.f_hi);
  }

  for (double q : quantiles) {
    QuantileBound qb;
    qb.q = q;
    qb.lo = std::max(l1.f_hi.quantile(q), support.lo) - std::min(l0.f_lo.quantile(q), support.hi);
    qb.hi = std::min(l1.f_lo.quantile(q), support.hi) - std::max(l0.f_hi.quantile(q), support.lo);
    res.tau.push_back(qb);
  }

  if (!std::isfinite(res.lower) || !std::isfinite(res.upper)) {
    res.warnings.push_back(
        "bound cdfs are defective on an unbounded support; the corresponding bound is infinite");
  }
  if (res.lower > res.upper) {
    // Step-function roughness can cross the envelopes on small, irregular
    // samples; an empty interval means the data reject the bound model
    // in-sample, which is worth surfacing rather than repairing.
    res.warnings.push_back("bound interval is empty (lower > upper): the envelope constraints "
                           "are mutually inconsistent in this sample");
  }
  return res;
}

}  // namespace fdid
