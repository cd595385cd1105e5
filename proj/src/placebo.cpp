#include "fdid/placebo.hpp"

#include <array>
#include <cmath>

#include "fdid/estimators.hpp"
#include "fdid/multigroup.hpp"

namespace fdid {

namespace {

CellTable pair_cells(const Dataset& ds, int tm, int t0, bool sorted) {
  const Dataset sub = ds.select_periods(tm, t0);
  if (sub.num_groups() != 2) {
    throw PreconditionError("placebo", "placebo statistics need exactly two groups");
  }
  CellTable ct(sub, sorted);
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) ct.require_gt(g, t, "placebo");
  }
  return ct;
}

double did_stat(const CellTable& ct) {
  return ct.mean_y_gt(1, 1) - ct.mean_y_gt(1, 0) - (ct.mean_y_gt(0, 1) - ct.mean_y_gt(0, 0));
}

double tc_stat(const CellTable& ct) {
  double corr = 0.0;
  for (int d = 0; d <= ct.dmax(); ++d) {
    if (!ct.has_cell(d, 1, 0)) continue;
    ct.require_cell(d, 0, 0, "placebo");
    ct.require_cell(d, 0, 1, "placebo");
    corr += ct.share(d, 1, 0) * (ct.mean_y(d, 0, 1) - ct.mean_y(d, 0, 0));
  }
  return ct.mean_y_gt(1, 1) - (ct.mean_y_gt(1, 0) + corr);
}

double cic_stat(const CellTable& ct) {
  double sum = 0.0;
  long n = 0;
  for (int d = 0; d <= ct.dmax(); ++d) {
    if (!ct.has_cell(d, 1, 0)) continue;
    const QqTransform q = qq_transform(ct, d);
    for (double y : ct.sample(d, 1, 0)) {
      sum += q(y);
      ++n;
    }
  }
  return ct.mean_y_gt(1, 1) - sum / static_cast<double>(n);
}

}  // namespace

double placebo_did(const Dataset& ds, int tm, int t0) {
  return did_stat(pair_cells(ds, tm, t0, false));
}

double placebo_tc(const Dataset& ds, int tm, int t0) {
  return tc_stat(pair_cells(ds, tm, t0, false));
}

double placebo_cic(const Dataset& ds, int tm, int t0) {
  return cic_stat(pair_cells(ds, tm, t0, true));
}

std::vector<ConditionalTrend> conditional_trends(const Dataset& ds, int tm, int t0) {
  const CellTable ct = pair_cells(ds, tm, t0, false);
  std::vector<ConditionalTrend> out;
  for (int d = 0; d <= ct.dmax(); ++d) {
    ConditionalTrend row;
    row.d = d;
    bool complete = true;
    for (int g = 0; g < 2 && complete; ++g) {
      for (int t = 0; t < 2 && complete; ++t) {
        if (!ct.has_cell(d, g, t)) {
          complete = false;
          row.note = "cell (d=" + std::to_string(d) + ", g=" + std::to_string(g) + ", t=" +
                     std::to_string(t) + ") empty on the placebo pair";
        }
      }
    }
    if (!ct.has_cell(d, 0, 0) && !ct.has_cell(d, 0, 1) && !ct.has_cell(d, 1, 0) &&
        !ct.has_cell(d, 1, 1)) {
      continue;  // level absent everywhere: nothing to report
    }
    if (!complete) {
      row.skipped = true;
      out.push_back(row);
      continue;
    }
    row.statistic = ct.mean_y(d, 1, 1) - ct.mean_y(d, 1, 0) -
                    (ct.mean_y(d, 0, 1) - ct.mean_y(d, 0, 0));
    out.push_back(row);
  }
  return out;
}

std::pair<int, int> default_placebo_pair(const Dataset& ds) {
  if (ds.num_periods() < 3) {
    throw PreconditionError("placebo",
                            "placebo tests need at least three periods (two pre-treatment ones); "
                            "pass the pair explicitly if your period labels differ");
  }
  const int k = ds.num_periods();
  return {ds.raw_period_label(k - 3), ds.raw_period_label(k - 2)};
}

PlaceboReport placebo_report(const Dataset& ds, int tm, int t0,
                             const BootstrapConfig* bootstrap_cfg, double stability_threshold) {
  PlaceboReport report;
  report.t_minus = tm;
  report.t_zero = t0;

  const Dataset sub = ds.select_periods(tm, t0);
  if (sub.num_groups() != 2) {
    throw PreconditionError("placebo", "placebo statistics need exactly two groups");
  }

  // First-stage stability on the pair, per group.
  for (int g = 0; g < 2; ++g) {
    std::vector<std::array<long, 2>> counts(static_cast<std::size_t>(sub.dmax()) + 1, {0, 0});
    for (const auto& r : sub.rows()) {
      if (r.g == g) ++counts[static_cast<std::size_t>(r.d)][static_cast<std::size_t>(r.t)];
    }
    const double p = pearson_chi2(counts).pvalue;
    report.stability_pvalues.emplace_back(sub.raw_group_label(g), p);
    if (p <= stability_threshold) report.uninformative = true;
  }
  if (report.uninformative) {
    report.warnings.push_back(
        "treatment shares move across the placebo pair; non-zero placebos may reflect treatment "
        "effects rather than assumption failures");
  }

  struct Spec {
    const char* name;
    double (*fn)(const Dataset&, int, int);
  };
  const Spec specs[] = {{"did", placebo_did}, {"tc", placebo_tc}, {"cic", placebo_cic}};
  for (const auto& spec : specs) {
    PlaceboTest test;
    test.name = spec.name;
    test.statistic = spec.fn(ds, tm, t0);
    if (bootstrap_cfg != nullptr) {
      const auto fn = spec.fn;
      const BootstrapResult b =
          bootstrap(sub, [fn, &ds, tm, t0](const Dataset& re) {
            // Resampled rows carry dense period labels 0/1 of the pair.
            (void)ds;
            return fn(re, 0, 1);
          },
                    *bootstrap_cfg);
      test.se = b.se;
      if (b.se > 0.0) test.tstat = test.statistic / b.se;
    }
    report.tests.push_back(test);
  }

  report.conditional = conditional_trends(ds, tm, t0);
  if (bootstrap_cfg != nullptr) {
    for (auto& row : report.conditional) {
      if (row.skipped) continue;
      const int d = row.d;
      try {
        const BootstrapResult b = bootstrap(
            sub,
            [d](const Dataset& re) {
              CellTable ct(re, false);
              for (int g = 0; g < 2; ++g) {
                for (int t = 0; t < 2; ++t) ct.require_cell(d, g, t, "placebo");
              }
              return ct.mean_y(d, 1, 1) - ct.mean_y(d, 1, 0) -
                     (ct.mean_y(d, 0, 1) - ct.mean_y(d, 0, 0));
            },
            *bootstrap_cfg);
        row.se = b.se;
        if (b.se > 0.0) row.tstat = row.statistic / b.se;
      } catch (const Error& e) {
        row.note = std::string("bootstrap failed: ") + e.what();
      }
    }
  }
  return report;
}

}  // namespace fdid
