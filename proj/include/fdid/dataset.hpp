#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdid/common.hpp"

namespace fdid {

// One micro-data row. Group and period carry the caller's raw integer
// labels; Dataset remaps them to dense indices on construction.
struct Observation {
  double y = 0.0;
  int d = 0;
  int g = 0;
  int t = 0;
  std::optional<int> cluster;
};

// Column-name mapping plus parse options for delimited text input.
struct Schema {
  std::string y = "y";
  std::string d = "d";
  std::string g = "g";
  std::string t = "t";
  std::string cluster = "cluster";  // optional column; absent means no clusters
  char delimiter = ',';
  std::string na_token;  // rows containing it are rejected; empty disables
};

// Immutable collection of observations. Groups and periods are remapped to
// dense indices 0..K-1 in ascending raw-label order, so in two-group mode
// the larger raw label is the treatment group and the larger raw period
// label is the post period. Row order is preserved.
class Dataset {
 public:
  explicit Dataset(std::vector<Observation> rows);

  static Dataset load_table(const std::string& path, const Schema& schema);

  std::span<const Observation> rows() const noexcept { return rows_; }
  std::size_t n() const noexcept { return rows_.size(); }

  int num_groups() const noexcept { return static_cast<int>(group_labels_.size()); }
  int num_periods() const noexcept { return static_cast<int>(period_labels_.size()); }
  int dmax() const noexcept { return dmax_; }
  bool has_clusters() const noexcept { return has_clusters_; }

  int raw_group_label(int dense) const { return group_labels_.at(static_cast<std::size_t>(dense)); }
  int raw_period_label(int dense) const { return period_labels_.at(static_cast<std::size_t>(dense)); }
  const std::vector<int>& group_labels() const noexcept { return group_labels_; }
  const std::vector<int>& period_labels() const noexcept { return period_labels_; }

  // Two-period restriction keyed by raw period labels; the earlier argument
  // becomes dense period 0. Used by the placebo pipeline.
  Dataset select_periods(int raw_t0, int raw_t1) const;

 private:
  std::vector<Observation> rows_;  // g,t hold dense indices after remap
  std::vector<int> group_labels_;
  std::vector<int> period_labels_;
  int dmax_ = 0;
  bool has_clusters_ = false;
};

// Per-cell statistics every estimator consumes. Cells are indexed by dense
// (d, g, t); samples are sorted ascending when sort_samples is on (the
// cdf-based estimators need them, the mean-based ones do not).
class CellTable {
 public:
  explicit CellTable(const Dataset& ds, bool sort_samples = true);

  int num_groups() const noexcept { return groups_; }
  int num_periods() const noexcept { return periods_; }
  int dmax() const noexcept { return dmax_; }
  std::size_t n() const noexcept { return n_; }

  long count(int d, int g, int t) const { return cell_count_[idx(d, g, t)]; }
  long count_gt(int g, int t) const { return gt_count_[gt_idx(g, t)]; }
  bool has_cell(int d, int g, int t) const { return count(d, g, t) > 0; }
  bool has_gt(int g, int t) const { return count_gt(g, t) > 0; }

  double mean_y(int d, int g, int t) const;
  double mean_y_gt(int g, int t) const;
  double mean_d_gt(int g, int t) const;

  // p_{d|gt}; zero when the (g,t) block is empty.
  double share(int d, int g, int t) const;
  // p_{gt} = n_gt / n.
  double p_gt(int g, int t) const;
  // p_{dgt} = n_dgt / n.
  double p_dgt(int d, int g, int t) const;

  std::span<const double> sample(int d, int g, int t) const;
  bool samples_sorted() const noexcept { return sorted_; }

  double pooled_min() const noexcept { return pooled_min_; }
  double pooled_max() const noexcept { return pooled_max_; }
  // Sorted unique outcome values across every cell (needs sorted samples).
  std::vector<double> pooled_grid() const;

  // Requires the named cell; throws PreconditionError identifying it.
  void require_cell(int d, int g, int t, const std::string& who) const;
  void require_gt(int g, int t, const std::string& who) const;

 private:
  std::size_t idx(int d, int g, int t) const;
  std::size_t gt_idx(int g, int t) const;

  int groups_, periods_, dmax_;
  std::size_t n_;
  bool sorted_;
  std::vector<long> cell_count_;
  std::vector<double> cell_sum_;
  std::vector<std::vector<double>> cell_sample_;
  std::vector<long> gt_count_;
  std::vector<double> gt_sum_y_;
  std::vector<double> gt_sum_d_;
  double pooled_min_, pooled_max_;
};

// Design diagnostics for the two-group, two-period case.
struct DesignInfo {
  double first_stage_gap = 0.0;  // E(D_11) - E(D_10)
  double control_gap = 0.0;      // E(D_01) - E(D_00)
  double did_d = 0.0;
  bool first_stage_ok = false;   // gap > 0 and did_d > 0
  bool stable_control = false;   // max_d |p_{d|01} - p_{d|00}| <= tol
  double max_control_share_gap = 0.0;
  double stable_tol = 0.0;
  // lambda_{gd} = p_{d|g1} / p_{d|g0}; NaN when the period-0 share is zero
  // but the period-1 share is not (we refuse to impute such ratios).
  std::vector<std::vector<double>> lambda;  // [g][d]
};

// Validates Assumption-style design conditions: throws DesignError when the
// treatment group has no first stage (with the redefinition hint when its
// treatment rate fell), otherwise reports gaps, stability and lambda ratios.
DesignInfo check_design(const CellTable& ct, double tol);

}  // namespace fdid
