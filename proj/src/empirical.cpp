#include "fdid/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdid {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

StepCdf::StepCdf(std::vector<double> grid, std::vector<double> values, bool proper)
    : grid_(std::move(grid)), values_(std::move(values)), proper_(proper) {
  if (grid_.empty() || grid_.size() != values_.size()) {
    throw PreconditionError("empirical", "step cdf needs a non-empty grid with one value per point");
  }
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i - 1] < grid_[i])) {
      throw PreconditionError("empirical", "step cdf grid must be strictly increasing");
    }
  }
  support_lo_ = grid_.front();
  support_hi_ = grid_.back();
}

StepCdf StepCdf::ecdf(std::span<const double> sorted_sample) {
  if (sorted_sample.empty()) {
    throw PreconditionError("empirical", "ecdf of an empty sample");
  }
  std::vector<double> grid;
  std::vector<double> values;
  const double n = static_cast<double>(sorted_sample.size());
  for (std::size_t i = 0; i < sorted_sample.size(); ++i) {
    if (i + 1 < sorted_sample.size()) {
      if (sorted_sample[i] > sorted_sample[i + 1]) {
        throw PreconditionError("empirical", "ecdf sample must be sorted ascending");
      }
      if (sorted_sample[i] == sorted_sample[i + 1]) continue;  // fold ties
    }
    grid.push_back(sorted_sample[i]);
    values.push_back(static_cast<double>(i + 1) / n);
  }
  return StepCdf(std::move(grid), std::move(values), true);
}

double StepCdf::operator()(double y) const {
  auto it = std::upper_bound(grid_.begin(), grid_.end(), y);
  if (it == grid_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - grid_.begin()) - 1];
}

double StepCdf::left_limit(double y) const {
  auto it = std::lower_bound(grid_.begin(), grid_.end(), y);
  if (it == grid_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - grid_.begin()) - 1];
}

double StepCdf::quantile(double q) const {
  if (q <= 0.0) return support_lo_;
  if (q > 1.0 + kRankFuzz) return support_hi_;
  const double want = q - kRankFuzz;
  // values_ is non-decreasing for every proper cdf; quantiles of raw bound
  // intermediates go through their monotone rearrangement first.
  auto it = std::lower_bound(values_.begin(), values_.end(), want);
  if (it == values_.end()) return kInf;  // rank never attained (defective)
  return grid_[static_cast<std::size_t>(it - values_.begin())];
}

void StepCdf::declare_support(double lo, double hi) {
  if (!(lo <= grid_.front()) || !(hi >= grid_.back())) {
    throw PreconditionError("empirical", "declared support must contain the grid");
  }
  support_lo_ = lo;
  support_hi_ = hi;
}

StepCdf clip01(const StepCdf& f) {
  std::vector<double> v = f.values();
  for (double& x : v) x = clip01(x);
  const bool monotone = std::is_sorted(v.begin(), v.end());
  StepCdf out(f.grid(), std::move(v), monotone && std::abs(f.values().back() - 1.0) <= kRankFuzz);
  out.declare_support(f.support_lo(), f.support_hi());
  return out;
}

double stieltjes_mean(const StepCdf& f) {
  double total = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < f.grid().size(); ++i) {
    const double jump = f.values()[i] - prev;
    prev = f.values()[i];
    if (jump == 0.0) continue;
    if (!std::isfinite(f.grid()[i])) {
      throw PreconditionError("empirical", "point mass at a non-finite support point; declare finite bounds");
    }
    total += f.grid()[i] * jump;
  }
  return total;
}

StepCdf envelope_sup_below(const StepCdf& f) {
  std::vector<double> v = f.values();
  for (std::size_t i = 1; i < v.size(); ++i) v[i] = std::max(v[i], v[i - 1]);
  const bool proper = v.front() >= -kRankFuzz && std::abs(v.back() - 1.0) <= kRankFuzz;
  StepCdf out(f.grid(), std::move(v), proper);
  out.declare_support(f.support_lo(), f.support_hi());
  return out;
}

StepCdf envelope_inf_above(const StepCdf& f) {
  std::vector<double> v = f.values();
  for (std::size_t i = v.size() - 1; i-- > 0;) v[i] = std::min(v[i], v[i + 1]);
  const bool proper = v.front() >= -kRankFuzz && std::abs(v.back() - 1.0) <= kRankFuzz;
  StepCdf out(f.grid(), std::move(v), proper);
  out.declare_support(f.support_lo(), f.support_hi());
  return out;
}

double integrate_difference(const StepCdf& a, const StepCdf& b) {
  std::vector<double> grid;
  grid.reserve(a.grid().size() + b.grid().size());
  grid.insert(grid.end(), a.grid().begin(), a.grid().end());
  grid.insert(grid.end(), b.grid().begin(), b.grid().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    total += (a(grid[i]) - b(grid[i])) * (grid[i + 1] - grid[i]);
  }
  return total;
}

QqTransform::QqTransform(StepCdf source, StepCdf target)
    : source_(std::move(source)), target_(std::move(target)) {
  if (!source_.proper() || !target_.proper()) {
    throw PreconditionError("empirical", "qq transform needs proper cdfs on both sides");
  }
}

double QqTransform::operator()(double y) const { return target_.quantile(source_(y)); }

bool QqTransform::out_of_source_support(double y) const {
  return y < source_.grid().front() || y > source_.grid().back();
}

RankMap::RankMap(StepCdf outer, StepCdf inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  if (!outer_.proper() || !inner_.proper()) {
    throw PreconditionError("empirical", "rank map needs proper cdfs on both sides");
  }
  outer_at_inner_.reserve(inner_.grid().size());
  for (double s : inner_.grid()) outer_at_inner_.push_back(outer_(s));
}

double RankMap::operator()(double u) const {
  // F_inner^{-1}(u) is -inf for u <= 0 and +inf for ranks above 1, so the
  // composition saturates at 0 and 1 there.
  if (u <= 0.0) return 0.0;
  if (u > 1.0 + kRankFuzz) return 1.0;
  return outer_(inner_.quantile(u));
}

double RankMap::inverse(double v) const {
  // Strictly negative ranks take the support convention of the rank
  // variable F_inner(Y_outer); at exactly zero the generalized inverse is
  // -infinity (every rank qualifies), and the downstream clipping absorbs
  // it. Keeping the two cases distinct preserves the validity of the bound
  // constructions on both sides.
  if (v < 0.0) return inner_(outer_.grid().front());
  if (v == 0.0) return -std::numeric_limits<double>::infinity();
  if (v > 1.0 + kRankFuzz) return inner_(outer_.grid().back());
  // H is left-continuous with value outer_(s_j) on the rank interval
  // (c_{j-1}, c_j], c_j = inner cumulative at its j-th grid point; the
  // infimum lands on the left edge of the first interval reaching v.
  const auto& c = inner_.values();
  auto it = std::lower_bound(outer_at_inner_.begin(), outer_at_inner_.end(), v - kRankFuzz);
  if (it == outer_at_inner_.end()) return 1.0;  // H jumps to 1 just past rank 1
  const std::size_t j = static_cast<std::size_t>(it - outer_at_inner_.begin());
  return j == 0 ? 0.0 : c[j - 1];
}

}  // namespace fdid
