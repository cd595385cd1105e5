#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fdid/dataset.hpp"
#include "fdid/estimators.hpp"

namespace fdid {

enum class Kind { did, tc, cic };
std::string kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

// Point estimate of the requested kind on a two-group cell table.
Estimate point_estimate(const CellTable& ct, Kind kind, double stable_tol);

struct Chi2Result {
  double statistic = 0.0;
  int df = 0;
  double pvalue = 1.0;
  double min_expected = 0.0;
};

// Pearson chi-squared test of homogeneity across the two columns of a
// counts-by-level table. Levels with a zero marginal are dropped;
// df = kept levels - 1.
Chi2Result pearson_chi2(const std::vector<std::array<long, 2>>& counts);

struct GroupStability {
  int group = 0;  // raw label
  int label = 0;  // supergroup: -1, 0, +1
  double pvalue = 1.0;
  double mean_change = 0.0;  // E(D_g1) - E(D_g0)
  bool small_cells = false;  // some expected count < 5
};

struct SupergroupMap {
  double threshold = 0.5;
  std::vector<GroupStability> groups;  // one entry per raw group label
  std::vector<std::string> warnings;

  int label_of(int raw_group) const;
  bool has(int raw_group) const;
};

// Labels every group +1 / 0 / -1 by a chi-squared test of its treatment
// distribution across the two periods: stable iff p-value > threshold,
// otherwise signed by the change in the mean treatment. Errors when no
// group is stable.
SupergroupMap classify_supergroups(const Dataset& ds, double threshold);

// Two-column text exchange format: "group,label" with one header line.
SupergroupMap load_supergroup_map(const std::string& path);
void save_supergroup_map(const SupergroupMap& map, const std::string& path);

struct AggregateEstimate {
  Estimate combined;
  double w10 = 1.0;
  std::optional<Estimate> component_up;    // supergroup +1 vs 0
  std::optional<Estimate> component_down;  // supergroup -1 vs 0
  double did_d_up = 0.0;    // pooled treatment DID, +1 against 0
  double did_d_down = 0.0;  // pooled treatment DID, 0 against -1
  double p_up = 0.0, p_down = 0.0;
  std::vector<std::string> warnings;
};

// Pools groups into supergroups, runs the two-group estimator on the
// (+1 vs 0) and (-1 vs 0) comparisons (the latter with the treatment
// redefined as d_max - d and the sign restored), and combines the two with
// the switcher-share weight w10.
AggregateEstimate aggregate(const Dataset& ds, const SupergroupMap& map, Kind kind,
                            double stable_tol);

// Split-sample workflow: odd rows (0-based 1,3,5,...) classify, even rows
// estimate.
std::pair<Dataset, Dataset> split_sample(const Dataset& ds);

// Two-group dataset pooling the supergroup `treat_label` (as group 1)
// against the stable supergroup (as group 0), keeping all periods. With
// redefine_treatment the treatment is recoded d_max - d so a falling rate
// becomes a rising one.
Dataset pool_supergroups(const Dataset& ds, const SupergroupMap& map, int treat_label,
                         bool redefine_treatment);

struct AcrWeights {
  std::vector<double> w;  // weight of level d at index d-1, d = 1..dmax
  double denominator = 0.0;
  bool dominance_ok = true;             // D_11 first-order dominates D_10
  std::vector<int> negative_levels;
  double max_control_share_gap = 0.0;   // stability of D_01 vs D_00 by level
  double control_stability_pvalue = 1.0;
  std::vector<std::string> warnings;
};

// Weights attaching the ordered-treatment estimands to per-step average
// causal responses; they telescope to one.
AcrWeights acr_weights(const CellTable& ct);

}  // namespace fdid
