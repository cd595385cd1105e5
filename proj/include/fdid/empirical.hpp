#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fdid/common.hpp"

namespace fdid {

// Step-function cdf on a finite grid, right-continuous, zero left of the
// first grid point. Instances flagged proper are non-decreasing with values
// in [0,1] and terminal value 1; unflagged instances may be non-monotone or
// defective (they appear as intermediates of the bound constructions).
//
// Everything downstream evaluates these functions exactly on finite grids;
// there is no smoothing or interpolation anywhere in identification code.
class StepCdf {
 public:
  StepCdf(std::vector<double> grid, std::vector<double> values, bool proper);

  // Empirical cdf of a non-empty ascending sample. Support defaults to the
  // sample range.
  static StepCdf ecdf(std::span<const double> sorted_sample);

  // Right-continuous evaluation; 0 below the first grid point.
  double operator()(double y) const;

  // Left limit F(y-).
  double left_limit(double y) const;

  // Generalized inverse inf{x : F(x) >= q}. Out-of-[0,1] ranks follow the
  // declared-support convention: q <= 0 maps to the lower support bound and
  // q > 1 to the upper one. Ranks never attained by a defective cdf give
  // +infinity.
  double quantile(double q) const;

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  bool proper() const noexcept { return proper_; }

  double support_lo() const noexcept { return support_lo_; }
  double support_hi() const noexcept { return support_hi_; }
  void declare_support(double lo, double hi);

  double terminal() const { return values_.back(); }

 private:
  std::vector<double> grid_;    // strictly increasing
  std::vector<double> values_;  // cumulative value at each grid point
  bool proper_;
  double support_lo_, support_hi_;
};

inline double clip01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Clips all cumulative values into [0,1]; grid and support are kept.
StepCdf clip01(const StepCdf& f);

// Exact Stieltjes integral of y over the (possibly signed) jumps of f,
// including any atoms sitting at declared support endpoints, which must be
// part of the grid. Errors on a non-finite grid point carrying mass.
double stieltjes_mean(const StepCdf& f);

// Running maximum left-to-right: the smallest monotone function >= f on the
// grid.
StepCdf envelope_sup_below(const StepCdf& f);

// Running minimum right-to-left: the largest monotone function <= f.
StepCdf envelope_inf_above(const StepCdf& f);

// Exact integral of (a - b) dy between the extremes of the two grids. Both
// arguments are treated as right-continuous step functions that vanish left
// of their grids.
double integrate_difference(const StepCdf& a, const StepCdf& b);

// Quantile-quantile transform y -> F_target^{-1}(F_source(y)). Values
// outside the source sample range hit ranks 0 or 1 and therefore map to the
// nearest target quantile.
class QqTransform {
 public:
  QqTransform(StepCdf source, StepCdf target);

  double operator()(double y) const;
  bool out_of_source_support(double y) const;

  const StepCdf& source() const noexcept { return source_; }
  const StepCdf& target() const noexcept { return target_; }

 private:
  StepCdf source_;
  StepCdf target_;
};

// Rank-to-rank composition H = F_outer o F_inner^{-1} and its generalized
// inverse, both evaluated exactly on step functions. H(u) is left-continuous
// in u with steps at the inner cumulative levels; H^{-1}(v) = inf{u : H(u)
// >= v}. Arguments outside [0,1] follow the support convention of the rank
// variable F_inner(Y_outer).
class RankMap {
 public:
  RankMap(StepCdf outer, StepCdf inner);

  double operator()(double u) const;
  double inverse(double v) const;

 private:
  StepCdf outer_;
  StepCdf inner_;
  std::vector<double> outer_at_inner_;  // outer cdf at the inner grid points
};

}  // namespace fdid
