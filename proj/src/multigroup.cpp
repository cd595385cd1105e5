#include "fdid/multigroup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

namespace fdid {

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::did: return "did";
    case Kind::tc: return "tc";
    case Kind::cic: return "cic";
  }
  return "?";
}

Kind kind_from_name(const std::string& name) {
  if (name == "did") return Kind::did;
  if (name == "tc") return Kind::tc;
  if (name == "cic") return Kind::cic;
  throw PreconditionError("multigroup", "unknown estimator kind '" + name + "'");
}

Estimate point_estimate(const CellTable& ct, Kind kind, double stable_tol) {
  switch (kind) {
    case Kind::did: return wald_did(ct);
    case Kind::tc: return wald_tc(ct, stable_tol);
    case Kind::cic: return wald_cic(ct, stable_tol);
  }
  throw PreconditionError("multigroup", "unknown estimator kind");
}

Chi2Result pearson_chi2(const std::vector<std::array<long, 2>>& counts) {
  long col0 = 0, col1 = 0, total = 0;
  std::vector<std::array<long, 2>> kept;
  for (const auto& row : counts) {
    if (row[0] + row[1] == 0) continue;  // level absent: drop
    kept.push_back(row);
    col0 += row[0];
    col1 += row[1];
  }
  total = col0 + col1;
  Chi2Result res;
  res.df = std::max<int>(0, static_cast<int>(kept.size()) - 1);
  if (res.df == 0 || col0 == 0 || col1 == 0) return res;  // nothing to compare
  res.min_expected = static_cast<double>(total);
  for (const auto& row : kept) {
    const double rowsum = static_cast<double>(row[0] + row[1]);
    for (int t = 0; t < 2; ++t) {
      const double expected =
          rowsum * static_cast<double>(t == 0 ? col0 : col1) / static_cast<double>(total);
      const double dev = static_cast<double>(row[t]) - expected;
      res.statistic += dev * dev / expected;
      res.min_expected = std::min(res.min_expected, expected);
    }
  }
  res.pvalue = boost::math::gamma_q(0.5 * res.df, 0.5 * res.statistic);
  return res;
}

int SupergroupMap::label_of(int raw_group) const {
  for (const auto& g : groups) {
    if (g.group == raw_group) return g.label;
  }
  throw PreconditionError("multigroup",
                          "group " + std::to_string(raw_group) + " has no supergroup label");
}

bool SupergroupMap::has(int raw_group) const {
  return std::any_of(groups.begin(), groups.end(),
                     [&](const GroupStability& g) { return g.group == raw_group; });
}

SupergroupMap classify_supergroups(const Dataset& ds, double threshold) {
  if (ds.num_periods() != 2) {
    throw PreconditionError("multigroup", "supergroup classification needs exactly two periods");
  }
  if (ds.num_groups() < 2) {
    throw PreconditionError("multigroup", "supergroup classification needs at least two groups");
  }
  SupergroupMap map;
  map.threshold = threshold;

  const int dmax = ds.dmax();
  for (int g = 0; g < ds.num_groups(); ++g) {
    std::vector<std::array<long, 2>> counts(static_cast<std::size_t>(dmax) + 1, {0, 0});
    std::array<long, 2> n_t{0, 0};
    std::array<double, 2> sum_d{0.0, 0.0};
    for (const auto& r : ds.rows()) {
      if (r.g != g) continue;
      ++counts[static_cast<std::size_t>(r.d)][static_cast<std::size_t>(r.t)];
      ++n_t[static_cast<std::size_t>(r.t)];
      sum_d[static_cast<std::size_t>(r.t)] += r.d;
    }
    const int raw = ds.raw_group_label(g);
    if (n_t[0] == 0 || n_t[1] == 0) {
      throw PreconditionError("multigroup", "group " + std::to_string(raw) +
                                                " is missing one of the two periods");
    }
    const Chi2Result chi = pearson_chi2(counts);
    GroupStability gs;
    gs.group = raw;
    gs.pvalue = chi.pvalue;
    gs.mean_change = sum_d[1] / static_cast<double>(n_t[1]) -
                     sum_d[0] / static_cast<double>(n_t[0]);
    gs.small_cells = chi.df > 0 && chi.min_expected < 5.0;
    if (gs.small_cells) {
      map.warnings.push_back("group " + std::to_string(raw) +
                             ": some expected cell count is below 5, the chi-squared "
                             "approximation may be poor");
    }
    if (chi.pvalue > threshold) {
      gs.label = 0;
    } else if (gs.mean_change > 0.0) {
      gs.label = 1;
    } else if (gs.mean_change < 0.0) {
      gs.label = -1;
    } else {
      // Distribution moved but the mean did not; neither treatment
      // supergroup fits, so the group stays a control with a caveat.
      gs.label = 0;
      map.warnings.push_back("group " + std::to_string(raw) +
                             ": treatment distribution changed but its mean did not; labeled "
                             "stable with a warning");
    }
    map.groups.push_back(gs);
  }

  if (std::none_of(map.groups.begin(), map.groups.end(),
                   [](const GroupStability& g) { return g.label == 0; })) {
    throw DesignError("multigroup",
                      "no group has a stable treatment distribution; the aggregation theorem "
                      "needs at least one stable group (lower the p-value threshold only with "
                      "care)");
  }
  return map;
}

SupergroupMap load_supergroup_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("multigroup", "cannot open supergroup map '" + path + "'");
  SupergroupMap map;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
      throw SchemaError("multigroup", "malformed supergroup map line: '" + line + "'");
    }
    if (first && a == "group") {  // header
      first = false;
      continue;
    }
    first = false;
    GroupStability gs;
    try {
      gs.group = std::stoi(a);
      gs.label = std::stoi(b);
    } catch (const std::exception&) {
      throw SchemaError("multigroup", "malformed supergroup map line: '" + line + "'");
    }
    if (gs.label < -1 || gs.label > 1) {
      throw SchemaError("multigroup", "supergroup label must be -1, 0 or 1, got " + b);
    }
    if (map.has(gs.group)) {
      throw SchemaError("multigroup",
                        "group " + std::to_string(gs.group) + " labeled more than once");
    }
    map.groups.push_back(gs);
  }
  if (map.groups.empty()) throw SchemaError("multigroup", "empty supergroup map '" + path + "'");
  return map;
}

void save_supergroup_map(const SupergroupMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("multigroup", "cannot write supergroup map '" + path + "'");
  out << "group,label\n";
  for (const auto& g : map.groups) out << g.group << "," << g.label << "\n";
}

namespace {

struct PooledMoments {
  std::array<double, 2> mean_d{0.0, 0.0};  // by period
  long n = 0;
};

}  // namespace

AggregateEstimate aggregate(const Dataset& ds, const SupergroupMap& map, Kind kind,
                            double stable_tol) {
  if (ds.num_periods() != 2) {
    throw PreconditionError("multigroup", "aggregation needs exactly two periods");
  }
  // Tag every observation with its supergroup; every group must be labeled.
  std::map<int, PooledMoments> super;  // label -> pooled moments
  std::array<std::array<double, 2>, 3> sums{};  // [label+1][t] sums of d
  std::array<std::array<long, 2>, 3> ns{};
  std::array<long, 3> ntot{};
  for (const auto& r : ds.rows()) {
    const int label = map.label_of(ds.raw_group_label(r.g));
    const std::size_t li = static_cast<std::size_t>(label + 1);
    sums[li][static_cast<std::size_t>(r.t)] += r.d;
    ++ns[li][static_cast<std::size_t>(r.t)];
    ++ntot[li];
  }
  const bool have_up = ntot[2] > 0;
  const bool have_down = ntot[0] > 0;
  if (!have_up && !have_down) {
    throw DesignError("multigroup", "every group is labeled stable; there is no treatment "
                                    "supergroup to compare against");
  }
  if (ntot[1] == 0) {
    throw DesignError("multigroup", "the stable supergroup is empty");
  }
  for (int li = 0; li < 3; ++li) {
    if (ntot[static_cast<std::size_t>(li)] == 0) continue;
    for (int t = 0; t < 2; ++t) {
      if (ns[static_cast<std::size_t>(li)][static_cast<std::size_t>(t)] == 0) {
        throw PreconditionError("multigroup", "supergroup " + std::to_string(li - 1) +
                                                  " has no observations in period " +
                                                  std::to_string(t));
      }
    }
  }

  AggregateEstimate out;
  auto mean_at = [&](int label, int t) {
    const std::size_t li = static_cast<std::size_t>(label + 1);
    return sums[li][static_cast<std::size_t>(t)] /
           static_cast<double>(ns[li][static_cast<std::size_t>(t)]);
  };
  const double trend_stable = mean_at(0, 1) - mean_at(0, 0);
  if (have_up) out.did_d_up = (mean_at(1, 1) - mean_at(1, 0)) - trend_stable;
  if (have_down) out.did_d_down = trend_stable - (mean_at(-1, 1) - mean_at(-1, 0));
  const double n_all = static_cast<double>(ds.n());
  out.p_up = static_cast<double>(ntot[2]) / n_all;
  out.p_down = static_cast<double>(ntot[0]) / n_all;

  // Pooled distribution of groups should not shift across periods
  // (aggregation requires it); tested, not enforced.
  {
    std::map<int, std::array<long, 2>> gxt;
    for (const auto& r : ds.rows()) ++gxt[r.g][static_cast<std::size_t>(r.t)];
    std::vector<std::array<long, 2>> table;
    for (auto& [g, row] : gxt) table.push_back(row);
    const Chi2Result chi = pearson_chi2(table);
    if (chi.pvalue < 0.05) {
      out.warnings.push_back(
          "group composition shifts across periods (chi-squared p=" + std::to_string(chi.pvalue) +
          "); the aggregation assumes it is stable");
    }
  }

  auto component = [&](int treat_label) {
    // A falling treatment rate is a valid first stage once the treatment is
    // recoded as d_max - d; the estimate sign is restored below.
    CellTable ct(pool_supergroups(ds, map, treat_label, treat_label == -1));
    Estimate e = point_estimate(ct, kind, stable_tol);
    if (treat_label == -1) e.point = -e.point;
    return e;
  };

  if (have_up) out.component_up = component(1);
  if (have_down) out.component_down = component(-1);

  if (have_up && have_down) {
    const double a = out.did_d_up * out.p_up;
    const double b = out.did_d_down * out.p_down;
    if (std::abs(a + b) <= kDenomEps) {
      throw DesignError("multigroup", "switcher-share weights are degenerate");
    }
    out.w10 = a / (a + b);
    if (out.did_d_up <= 0.0 || out.did_d_down <= 0.0) {
      out.warnings.push_back("a pooled treatment DID has an unexpected sign; the combination "
                             "weight w10 falls outside [0,1]");
    }
  } else {
    out.w10 = have_up ? 1.0 : 0.0;
  }

  out.combined.kind = kind_name(kind) + "*";
  const double up = have_up ? out.component_up->point : 0.0;
  const double down = have_down ? out.component_down->point : 0.0;
  out.combined.point = out.w10 * up + (1.0 - out.w10) * down;
  for (const auto* comp : {&out.component_up, &out.component_down}) {
    if (comp->has_value()) {
      out.combined.warnings.insert(out.combined.warnings.end(), (*comp)->warnings.begin(),
                                   (*comp)->warnings.end());
    }
  }
  return out;
}

Dataset pool_supergroups(const Dataset& ds, const SupergroupMap& map, int treat_label,
                         bool redefine_treatment) {
  const int dmax = ds.dmax();
  std::vector<Observation> rows;
  for (const auto& r : ds.rows()) {
    const int label = map.label_of(ds.raw_group_label(r.g));
    if (label != 0 && label != treat_label) continue;
    Observation o = r;
    o.g = label == treat_label ? 1 : 0;
    o.t = ds.raw_period_label(r.t);
    if (redefine_treatment) o.d = dmax - r.d;
    rows.push_back(o);
  }
  if (rows.empty()) {
    throw PreconditionError("multigroup", "no observations in the pooled supergroups");
  }
  return Dataset(std::move(rows));
}

std::pair<Dataset, Dataset> split_sample(const Dataset& ds) {
  std::vector<Observation> classify_rows, estimate_rows;
  const auto rows = ds.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Observation o = rows[i];
    o.g = ds.raw_group_label(o.g);
    o.t = ds.raw_period_label(o.t);
    (i % 2 == 1 ? classify_rows : estimate_rows).push_back(o);
  }
  if (classify_rows.empty() || estimate_rows.empty()) {
    throw PreconditionError("multigroup", "split-sample needs at least two rows");
  }
  return {Dataset(std::move(classify_rows)), Dataset(std::move(estimate_rows))};
}

AcrWeights acr_weights(const CellTable& ct) {
  detail::require_two_by_two(ct, "multigroup");
  const int dmax = ct.dmax();
  if (dmax < 1) {
    throw PreconditionError("multigroup", "weights need an ordered treatment with d_max >= 1");
  }
  AcrWeights out;
  out.denominator = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0);
  if (std::abs(out.denominator) <= kDenomEps) {
    throw DesignError("multigroup", "degenerate first stage: E(D_11) equals E(D_10)");
  }

  // Survival gaps P(D_11 >= d) - P(D_10 >= d), accumulated from the top.
  double s11 = 0.0, s10 = 0.0;
  std::vector<double> gaps(static_cast<std::size_t>(dmax) + 1, 0.0);
  for (int d = dmax; d >= 1; --d) {
    s11 += ct.share(d, 1, 1);
    s10 += ct.share(d, 1, 0);
    gaps[static_cast<std::size_t>(d)] = s11 - s10;
  }
  for (int d = 1; d <= dmax; ++d) {
    const double w = gaps[static_cast<std::size_t>(d)] / out.denominator;
    out.w.push_back(w);
    if (gaps[static_cast<std::size_t>(d)] < -1e-12) {
      out.dominance_ok = false;
      out.negative_levels.push_back(d);
    }
  }
  if (!out.dominance_ok) {
    out.warnings.push_back(
        "P(D_11 >= d) < P(D_10 >= d) at some levels: the estimand is a weighted sum of causal "
        "responses with some negative weights");
  }

  std::vector<std::array<long, 2>> control(static_cast<std::size_t>(dmax) + 1, {0, 0});
  for (int d = 0; d <= dmax; ++d) {
    control[static_cast<std::size_t>(d)] = {ct.count(d, 0, 0), ct.count(d, 0, 1)};
    out.max_control_share_gap =
        std::max(out.max_control_share_gap, std::abs(ct.share(d, 0, 1) - ct.share(d, 0, 0)));
  }
  out.control_stability_pvalue = pearson_chi2(control).pvalue;
  return out;
}

}  // namespace fdid
