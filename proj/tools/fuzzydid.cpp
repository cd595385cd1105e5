// Command-line front end: estimate | bounds | placebo | classify | simulate.
// Reads delimited micro-data, runs the requested pipeline and emits a JSON
// report (and optionally a human-readable table). Exit codes: 0 success,
// 1 usage error, 2 design/precondition error.

#include <cmath>
#include <limits>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdid/bounds.hpp"
#include "fdid/dataset.hpp"
#include "fdid/estimators.hpp"
#include "fdid/inference.hpp"
#include "fdid/multigroup.hpp"
#include "fdid/placebo.hpp"
#include "fdid/simulate.hpp"

using json = nlohmann::ordered_json;
using namespace fdid;

namespace {

struct IoOptions {
  std::string input;
  Schema schema;
  std::string delimiter = ",";
  std::string na;
  std::string format = "json";
  std::string output;
};

struct InferenceOptions {
  int bootstrap = 999;
  std::uint64_t seed = 0;
  std::string ci = "percentile";
  double level = 0.95;
  int threads = 0;
  std::string replicates_prefix;
};

void add_io_options(CLI::App* cmd, IoOptions& io) {
  cmd->add_option("--input", io.input, "input data file")->required();
  cmd->add_option("--y", io.schema.y, "outcome column name");
  cmd->add_option("--d", io.schema.d, "treatment column name");
  cmd->add_option("--g", io.schema.g, "group column name");
  cmd->add_option("--t", io.schema.t, "period column name");
  cmd->add_option("--cluster", io.schema.cluster, "cluster-id column name");
  cmd->add_option("--delimiter", io.delimiter, "field delimiter (default ,)");
  cmd->add_option("--na", io.na, "token treated as missing; such rows are rejected");
  cmd->add_option("--format", io.format, "json|table")
      ->check(CLI::IsMember({"json", "table"}));
  cmd->add_option("--output", io.output, "write the JSON report to this path");
}

void add_inference_options(CLI::App* cmd, InferenceOptions& inf) {
  cmd->add_option("--bootstrap", inf.bootstrap, "bootstrap replications (0 disables)");
  cmd->add_option("--seed", inf.seed, "random seed");
  cmd->add_option("--ci", inf.ci, "percentile|normal")
      ->check(CLI::IsMember({"percentile", "normal"}));
  cmd->add_option("--level", inf.level, "confidence level (default 0.95)");
  cmd->add_option("--threads", inf.threads, "worker threads (0 = hardware)");
  cmd->add_option("--replicates", inf.replicates_prefix,
                  "write bootstrap replicate values to <prefix>_<stat>.txt");
}

Dataset load(const IoOptions& io) {
  Schema schema = io.schema;
  if (io.delimiter.size() != 1) {
    throw SchemaError("cli", "delimiter must be a single character");
  }
  schema.delimiter = io.delimiter[0];
  schema.na_token = io.na;
  return Dataset::load_table(io.input, schema);
}

BootstrapConfig make_bootstrap_config(const InferenceOptions& inf, bool clustered) {
  BootstrapConfig cfg;
  cfg.replications = inf.bootstrap;
  cfg.seed = inf.seed;
  cfg.scheme = clustered ? BootstrapConfig::Scheme::cluster : BootstrapConfig::Scheme::iid;
  cfg.ci_method = inf.ci == "normal" ? BootstrapConfig::CiMethod::normal
                                     : BootstrapConfig::CiMethod::percentile;
  cfg.level = inf.level;
  cfg.threads = inf.threads;
  return cfg;
}

json ci_json(const ConfidenceInterval& ci) {
  return json{{"lo", ci.lo}, {"hi", ci.hi}, {"level", ci.level}};
}

json estimate_json(const Estimate& est) {
  json out{{"kind", est.kind}, {"point", est.point}};
  if (est.se) out["se"] = *est.se;
  if (est.ci) out["ci"] = ci_json(*est.ci);
  if (!est.warnings.empty()) out["warnings"] = est.warnings;
  return out;
}

json design_json(const DesignInfo& info) {
  json lambda = json::array();
  for (std::size_t g = 0; g < info.lambda.size(); ++g) {
    for (std::size_t d = 0; d < info.lambda[g].size(); ++d) {
      lambda.push_back(json{{"g", g}, {"d", d}, {"lambda", info.lambda[g][d]}});
    }
  }
  return json{{"first_stage_gap", info.first_stage_gap},
              {"control_gap", info.control_gap},
              {"did_d", info.did_d},
              {"first_stage_ok", info.first_stage_ok},
              {"stable_control", info.stable_control},
              {"max_control_share_gap", info.max_control_share_gap},
              {"stable_tol", info.stable_tol},
              {"lambda", lambda}};
}

std::vector<double> parse_quantiles(const std::string& raw) {
  std::vector<double> qs;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const double q = std::stod(item);
    if (!(q > 0.0 && q < 1.0)) {
      throw PreconditionError("cli", "quantiles must lie strictly between 0 and 1");
    }
    qs.push_back(q);
  }
  return qs;
}

void emit(const json& report, const IoOptions& io, const std::string& table_text) {
  const std::string payload = report.dump(2) + "\n";
  if (!io.output.empty()) {
    std::ofstream out(io.output);
    if (!out) throw SchemaError("cli", "cannot write output file '" + io.output + "'");
    out << payload;
    if (io.format == "table") std::cout << table_text;
  } else if (io.format == "table") {
    std::cout << table_text;
  } else {
    std::cout << payload;
  }
}

std::string fmt_ci(const std::optional<ConfidenceInterval>& ci) {
  if (!ci) return "";
  std::ostringstream os;
  os << " [" << ci->lo << ", " << ci->hi << "]";
  return os.str();
}

std::pair<int, int> parse_pair(const std::string& raw, const char* what) {
  const auto comma = raw.find(',');
  if (comma == std::string::npos) {
    throw PreconditionError("cli", std::string(what) + " expects two comma-separated values");
  }
  return {std::stoi(raw.substr(0, comma)), std::stoi(raw.substr(comma + 1))};
}

// Restrict to the analysis pair of periods. Without --periods the dataset
// must already be two-period.
Dataset select_analysis_periods(Dataset ds, const std::string& periods_flag) {
  if (periods_flag.empty()) {
    if (ds.num_periods() == 2) return ds;
    throw PreconditionError("cli", "dataset has " + std::to_string(ds.num_periods()) +
                                       " periods; pick the analysis pair with --periods t0,t1");
  }
  const auto [t0, t1] = parse_pair(periods_flag, "--periods");
  return ds.select_periods(t0, t1);
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  IoOptions io;
  InferenceOptions inf;
  std::string periods;
  std::string estimator = "all";
  std::string quantiles;
  double stable_tol = 0.0;
  std::string supergroups;  // empty | "auto" | path
  double pvalue_threshold = 0.5;
  bool split_sample_flag = false;
};

json runspec_json(const EstimateArgs& a, const char* command) {
  return json{{"command", command},
              {"input", a.io.input},
              {"periods", a.periods},
              {"estimator", a.estimator},
              {"quantiles", a.quantiles},
              {"bootstrap", a.inf.bootstrap},
              {"seed", a.inf.seed},
              {"ci", a.inf.ci},
              {"level", a.inf.level},
              {"stable_tol", a.stable_tol},
              {"supergroups", a.supergroups},
              {"pvalue_threshold", a.pvalue_threshold},
              {"split_sample", a.split_sample_flag}};
}

std::vector<Kind> selected_kinds(const std::string& estimator) {
  if (estimator == "all") return {Kind::did, Kind::tc, Kind::cic};
  return {kind_from_name(estimator)};
}

int run_estimate_two_group(const EstimateArgs& args, const Dataset& ds, json& report,
                           std::string& table) {
  const CellTable ct(ds);
  const DesignInfo design = check_design(ct, args.stable_tol);
  report["design"] = design_json(design);
  try {
    const DidDecomposition dec = did_decomposition(ct);
    report["design"]["alpha"] = dec.alpha;
    report["design"]["alpha_interpretation"] = dec.interpretation;
  } catch (const Error&) {
    // degenerate treatment DID; wald_did below reports the same failure
  }

  const std::vector<Kind> kinds = selected_kinds(args.estimator);
  const std::vector<double> qs = parse_quantiles(args.quantiles);
  const double tol = args.stable_tol;

  struct Spec {
    std::string name;
    Statistic stat;
    Estimate est;
  };
  // The stable-control condition is validated once on the original sample;
  // resamples inherit the design, so replicate closures do not re-impose it
  // (exact stability almost never survives resampling).
  constexpr double boot_tol = std::numeric_limits<double>::infinity();
  std::vector<Spec> specs;
  for (Kind kind : kinds) {
    Statistic stat = [kind](const Dataset& d) {
      return point_estimate(CellTable(d, kind == Kind::cic), kind, boot_tol).point;
    };
    specs.push_back({kind_name(kind), std::move(stat), point_estimate(ct, kind, tol)});
  }
  for (double q : qs) {
    Statistic stat = [q](const Dataset& d) { return lqte(CellTable(d), q, boot_tol).point; };
    Estimate est = lqte(ct, q, tol);
    specs.push_back({est.kind, std::move(stat), std::move(est)});
  }

  // analytic influence-function standard errors where they are defined
  for (auto& spec : specs) {
    try {
      std::vector<double> psi;
      if (spec.name == "did") psi = influence_did(ds, ct, spec.est.point);
      else if (spec.name == "tc") psi = influence_tc(ds, ct, spec.est.point);
      else if (spec.name == "cic") psi = influence_cic(ds, ct);
      else psi = influence_lqte(ds, ct, std::stod(spec.name.substr(5)));
      spec.est.influence = std::move(psi);
    } catch (const Error& e) {
      spec.est.warnings.push_back(std::string("analytic variance unavailable: ") + e.what());
    }
  }

  if (args.inf.bootstrap > 0) {
    std::vector<Statistic> stats;
    for (const auto& spec : specs) stats.push_back(spec.stat);
    const BootstrapConfig cfg = make_bootstrap_config(args.inf, ds.has_clusters());
    const auto results = bootstrap_many(ds, stats, cfg);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      specs[i].est.se = results[i].se;
      specs[i].est.ci = results[i].ci;
      if (results[i].failed > 0) {
        specs[i].est.warnings.push_back(std::to_string(results[i].failed) +
                                        " bootstrap replicate(s) failed and were dropped");
      }
      if (!args.inf.replicates_prefix.empty()) {
        std::string name = specs[i].name;
        for (char& c : name) {
          if (c == '(' || c == ')' || c == '.') c = '_';
        }
        write_replicates(args.inf.replicates_prefix + "_" + name + ".txt",
                         results[i].replicates);
      }
    }
  }

  json estimates = json::array();
  std::ostringstream tbl;
  tbl << "estimate  point  se  ci\n";
  for (auto& spec : specs) {
    json j = estimate_json(spec.est);
    if (spec.est.influence) {
      const double se = influence_se(*spec.est.influence);
      j["analytic_se"] = se;
      if (args.inf.bootstrap <= 0) {
        j["se"] = se;
        j["ci"] = ci_json(normal_ci(spec.est.point, se, args.inf.level));
      }
    }
    j.erase("warnings");
    if (!spec.est.warnings.empty()) j["warnings"] = spec.est.warnings;
    estimates.push_back(std::move(j));
    tbl << spec.name << "  " << spec.est.point;
    if (spec.est.se) tbl << "  " << *spec.est.se;
    tbl << fmt_ci(spec.est.ci) << "\n";
  }
  report["estimates"] = std::move(estimates);
  table = tbl.str();
  return 0;
}

int run_estimate_supergroups(const EstimateArgs& args, const Dataset& ds, json& report,
                             std::string& table) {
  const std::vector<double> qs = parse_quantiles(args.quantiles);
  if (!qs.empty()) {
    throw PreconditionError("cli", "quantile effects are not aggregated across supergroups; "
                                   "drop --quantiles or run without --supergroups");
  }

  const Dataset* classify_src = &ds;
  const Dataset* estimate_src = &ds;
  std::optional<std::pair<Dataset, Dataset>> halves;
  if (args.split_sample_flag) {
    halves = split_sample(ds);
    classify_src = &halves->first;
    estimate_src = &halves->second;
  }

  SupergroupMap map;
  if (args.supergroups == "auto") {
    map = classify_supergroups(*classify_src, args.pvalue_threshold);
  } else {
    map = load_supergroup_map(args.supergroups);
  }

  json groups = json::array();
  for (const auto& g : map.groups) {
    groups.push_back(json{{"group", g.group},
                          {"label", g.label},
                          {"pvalue", g.pvalue},
                          {"mean_change", g.mean_change}});
  }
  report["supergroups"] = json{{"threshold", map.threshold},
                               {"source", args.supergroups},
                               {"split_sample", args.split_sample_flag},
                               {"groups", std::move(groups)}};
  if (!map.warnings.empty()) report["supergroups"]["warnings"] = map.warnings;

  const double tol = args.stable_tol;
  json estimates = json::array();
  std::ostringstream tbl;
  tbl << "aggregate  point  w10  se  ci\n";
  for (Kind kind : selected_kinds(args.estimator)) {
    AggregateEstimate agg = aggregate(*estimate_src, map, kind, tol);
    if (args.inf.bootstrap > 0) {
      // classification stays fixed across replicates; only the estimation
      // sample is resampled
      const SupergroupMap fixed_map = map;
      const BootstrapConfig cfg = make_bootstrap_config(args.inf, estimate_src->has_clusters());
      constexpr double boot_tol = std::numeric_limits<double>::infinity();
      const BootstrapResult b = bootstrap(
          *estimate_src,
          [kind, fixed_map](const Dataset& re) {
            return aggregate(re, fixed_map, kind, boot_tol).combined.point;
          },
          cfg);
      agg.combined.se = b.se;
      agg.combined.ci = b.ci;
    }
    json j = estimate_json(agg.combined);
    j["w10"] = agg.w10;
    if (agg.component_up) j["component_up"] = estimate_json(*agg.component_up);
    if (agg.component_down) j["component_down"] = estimate_json(*agg.component_down);
    if (!agg.warnings.empty()) j["warnings"] = agg.warnings;
    estimates.push_back(std::move(j));
    tbl << kind_name(kind) << "*  " << agg.combined.point << "  " << agg.w10;
    if (agg.combined.se) tbl << "  " << *agg.combined.se;
    tbl << fmt_ci(agg.combined.ci) << "\n";
  }
  report["estimates"] = std::move(estimates);
  table = tbl.str();
  return 0;
}

int run_estimate(const EstimateArgs& args) {
  const Dataset ds = select_analysis_periods(load(args.io), args.periods);
  json report;
  report["runspec"] = runspec_json(args, "estimate");
  std::string table;
  int rc;
  if (!args.supergroups.empty()) {
    rc = run_estimate_supergroups(args, ds, report, table);
  } else {
    rc = run_estimate_two_group(args, ds, report, table);
  }
  emit(report, args.io, table);
  return rc;
}

// ------------------------------------------------------------------ bounds

struct BoundsArgs {
  IoOptions io;
  InferenceOptions inf;
  std::string periods;
  std::string method = "all";
  std::string quantiles;
  std::string support;
  double stable_tol = 0.0;
};

json bounds_json(const BoundsResult& res) {
  json j{{"method", res.method},
         {"lower", res.lower},
         {"upper", res.upper},
         {"support", json{{"lo", res.support.lo}, {"hi", res.support.hi}}},
         {"collapsed", res.collapsed}};
  if (!res.tau.empty()) {
    json tau = json::array();
    for (const auto& t : res.tau) {
      tau.push_back(json{{"q", t.q}, {"lo", t.lo}, {"hi", t.hi}});
    }
    j["tau"] = std::move(tau);
  }
  json levels = json::array();
  for (const auto& lvl : res.levels) {
    levels.push_back(json{{"d", lvl.d},
                          {"lambda", lvl.lambda},
                          {"proper", lvl.proper},
                          {"endpoint_mass", lvl.endpoint_mass},
                          {"t_monotonicity_violation",
                           std::max(lvl.t_lo_violation, lvl.t_hi_violation)},
                          {"c_monotonicity_violation",
                           std::max(lvl.c_lo_violation, lvl.c_hi_violation)},
                          {"completed_mass",
                           std::max(lvl.completed_mass_lo, lvl.completed_mass_hi)}});
  }
  j["levels"] = std::move(levels);
  if (res.lower_se) j["lower_se"] = *res.lower_se;
  if (res.upper_se) j["upper_se"] = *res.upper_se;
  if (res.lower_ci) j["lower_ci"] = ci_json(*res.lower_ci);
  if (res.upper_ci) j["upper_ci"] = ci_json(*res.upper_ci);
  if (!res.warnings.empty()) j["warnings"] = res.warnings;
  return j;
}

int run_bounds(const BoundsArgs& args) {
  const Dataset ds = select_analysis_periods(load(args.io), args.periods);
  const CellTable ct(ds);
  const std::vector<double> qs = parse_quantiles(args.quantiles);

  SupportBounds support = sample_support(ct);
  if (!args.support.empty()) {
    const auto comma = args.support.find(',');
    if (comma == std::string::npos) {
      throw PreconditionError("cli", "--support expects lo,hi");
    }
    support.lo = std::stod(args.support.substr(0, comma));
    support.hi = std::stod(args.support.substr(comma + 1));
  }

  json report;
  report["runspec"] = json{{"command", "bounds"},
                           {"input", args.io.input},
                           {"method", args.method},
                           {"quantiles", args.quantiles},
                           {"support", json{{"lo", support.lo}, {"hi", support.hi}}},
                           {"bootstrap", args.inf.bootstrap},
                           {"seed", args.inf.seed},
                           {"ci", args.inf.ci},
                           {"level", args.inf.level},
                           {"stable_tol", args.stable_tol}};
  report["design"] = design_json(check_design(ct, args.stable_tol));

  const double tol = args.stable_tol;
  json out = json::array();
  std::ostringstream tbl;
  tbl << "bounds  lower  upper\n";
  for (const std::string& method : {std::string("tc"), std::string("cic")}) {
    if (args.method != "all" && args.method != method) continue;
    BoundsResult res = method == "tc" ? tc_bounds(ct, support, tol)
                                      : cic_bounds(ct, qs, support, tol);
    if (args.inf.bootstrap > 0) {
      const BootstrapConfig cfg = make_bootstrap_config(args.inf, ds.has_clusters());
      auto endpoint = [&method, &support, tol](bool lower) {
        const std::string m = method;
        const SupportBounds sup = support;
        return Statistic([m, sup, tol, lower](const Dataset& re) {
          const CellTable rct(re);  // both bound families need sorted samples
          SupportBounds s = sup;
          // keep resampled outcomes inside the declared support
          s.lo = std::min(s.lo, rct.pooled_min());
          s.hi = std::max(s.hi, rct.pooled_max());
          const BoundsResult r =
              m == "tc" ? tc_bounds(rct, s, tol) : cic_bounds(rct, {}, s, tol);
          return lower ? r.lower : r.upper;
        });
      };
      const auto results = bootstrap_many(ds, {endpoint(true), endpoint(false)}, cfg);
      res.lower_se = results[0].se;
      res.lower_ci = results[0].ci;
      res.upper_se = results[1].se;
      res.upper_ci = results[1].ci;
    }
    tbl << method << "  " << res.lower << "  " << res.upper << "\n";
    out.push_back(bounds_json(res));
  }
  report["bounds"] = std::move(out);
  emit(report, args.io, tbl.str());
  return 0;
}

// ----------------------------------------------------------------- placebo

struct PlaceboArgs {
  IoOptions io;
  InferenceOptions inf;
  std::string pair;
  std::string supergroups;  // optional group,label map for pooled placebos
  double pvalue_threshold = 0.5;
};

json placebo_json(const PlaceboReport& rep, std::ostringstream& tbl) {
  json tests = json::array();
  tbl << "placebo pair (" << rep.t_minus << ", " << rep.t_zero << ")"
      << (rep.uninformative ? "  [uninformative: unstable first stage]" : "") << "\n";
  for (const auto& t : rep.tests) {
    json j{{"name", t.name}, {"statistic", t.statistic}};
    if (t.se) j["se"] = *t.se;
    if (t.tstat) j["tstat"] = *t.tstat;
    tests.push_back(std::move(j));
    tbl << t.name << ": " << t.statistic;
    if (t.se) tbl << " (se " << *t.se << ")";
    tbl << "\n";
  }
  json conditional = json::array();
  for (const auto& c : rep.conditional) {
    json j{{"d", c.d}, {"skipped", c.skipped}};
    if (c.skipped) {
      j["note"] = c.note;
    } else {
      j["statistic"] = c.statistic;
      if (c.se) j["se"] = *c.se;
      if (c.tstat) j["tstat"] = *c.tstat;
    }
    conditional.push_back(std::move(j));
  }
  json stab = json::array();
  for (const auto& [group, p] : rep.stability_pvalues) {
    stab.push_back(json{{"group", group}, {"pvalue", p}});
  }
  json out{{"t_minus", rep.t_minus},
           {"t_zero", rep.t_zero},
           {"uninformative", rep.uninformative},
           {"stability_pvalues", std::move(stab)},
           {"tests", std::move(tests)},
           {"conditional_trends", std::move(conditional)}};
  if (!rep.warnings.empty()) out["warnings"] = rep.warnings;
  return out;
}

int run_placebo(const PlaceboArgs& args) {
  const Dataset ds = load(args.io);
  int tm = 0, t0 = 0;
  if (args.pair.empty()) {
    std::tie(tm, t0) = default_placebo_pair(ds);
  } else {
    std::tie(tm, t0) = parse_pair(args.pair, "--placebo-pair");
  }

  const BootstrapConfig cfg = make_bootstrap_config(args.inf, ds.has_clusters());
  const BootstrapConfig* cfg_ptr = args.inf.bootstrap > 0 ? &cfg : nullptr;

  json report;
  report["runspec"] = json{{"command", "placebo"},
                           {"input", args.io.input},
                           {"pair", json{{"t_minus", tm}, {"t_zero", t0}}},
                           {"bootstrap", args.inf.bootstrap},
                           {"seed", args.inf.seed},
                           {"supergroups", args.supergroups},
                           {"pvalue_threshold", args.pvalue_threshold}};
  std::ostringstream tbl;
  if (args.supergroups.empty()) {
    report["placebo"] =
        placebo_json(placebo_report(ds, tm, t0, cfg_ptr, args.pvalue_threshold), tbl);
  } else {
    // One pooled two-group comparison per treatment supergroup present.
    const SupergroupMap map = load_supergroup_map(args.supergroups);
    json comparisons = json::array();
    for (int arm : {1, -1}) {
      bool present = false;
      for (const auto& g : map.groups) present = present || g.label == arm;
      if (!present) continue;
      Dataset pooled = pool_supergroups(ds, map, arm, false);
      tbl << "supergroup " << (arm > 0 ? "+1" : "-1") << " vs 0\n";
      json j = placebo_json(placebo_report(pooled, tm, t0, cfg_ptr, args.pvalue_threshold), tbl);
      j["arm"] = arm;
      comparisons.push_back(std::move(j));
    }
    if (comparisons.empty()) {
      throw PreconditionError("cli", "no treatment supergroup in the map");
    }
    report["placebo"] = json{{"comparisons", std::move(comparisons)}};
  }
  emit(report, args.io, tbl.str());
  return 0;
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  IoOptions io;
  std::string periods;
  double pvalue_threshold = 0.5;
  std::string map_out;
  bool split_sample_flag = false;
};

int run_classify(const ClassifyArgs& args) {
  const Dataset ds = select_analysis_periods(load(args.io), args.periods);
  const Dataset* src = &ds;
  std::optional<std::pair<Dataset, Dataset>> halves;
  if (args.split_sample_flag) {
    halves = split_sample(ds);
    src = &halves->first;
  }
  const SupergroupMap map = classify_supergroups(*src, args.pvalue_threshold);
  if (!args.map_out.empty()) save_supergroup_map(map, args.map_out);

  json groups = json::array();
  std::ostringstream tbl;
  tbl << "group  label  pvalue  mean_change\n";
  int ns = 0, ni = 0, nd = 0;
  for (const auto& g : map.groups) {
    groups.push_back(json{{"group", g.group},
                          {"label", g.label},
                          {"pvalue", g.pvalue},
                          {"mean_change", g.mean_change},
                          {"small_cells", g.small_cells}});
    tbl << g.group << "  " << g.label << "  " << g.pvalue << "  " << g.mean_change << "\n";
    (g.label == 0 ? ns : (g.label > 0 ? ni : nd))++;
  }
  json report;
  report["runspec"] = json{{"command", "classify"},
                           {"input", args.io.input},
                           {"pvalue_threshold", args.pvalue_threshold},
                           {"split_sample", args.split_sample_flag},
                           {"map_out", args.map_out}};
  report["supergroups"] = json{{"threshold", args.pvalue_threshold},
                               {"counts", json{{"stable", ns},
                                               {"increasing", ni},
                                               {"decreasing", nd}}},
                               {"groups", std::move(groups)}};
  if (!map.warnings.empty()) report["supergroups"]["warnings"] = map.warnings;
  emit(report, args.io, tbl.str());
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  IoOptions io;  // output/format reused; input unused
  std::string config;
  int reps = 100;
  std::string estimator = "all";
  int bootstrap = 0;
  bool analytic = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double stable_tol = 0.05;
  double level = 0.95;
  int threads = 0;
  std::string emit_data;
};

int run_simulate(const SimulateArgs& args) {
  DgpConfig cfg = DgpConfig::from_file(args.config);
  if (args.seed_set) cfg.seed = args.seed;

  if (!args.emit_data.empty()) {
    const Generated gen = generate(cfg);
    std::ofstream out(args.emit_data);
    if (!out) throw SchemaError("cli", "cannot write '" + args.emit_data + "'");
    out.precision(17);
    out << (gen.data.has_clusters() ? "y,d,g,t,cluster\n" : "y,d,g,t\n");
    for (const auto& r : gen.data.rows()) {
      out << r.y << "," << r.d << "," << gen.data.raw_group_label(r.g) << ","
          << gen.data.raw_period_label(r.t);
      if (gen.data.has_clusters()) out << "," << *r.cluster;
      out << "\n";
    }
    std::cout << "wrote " << gen.data.n() << " rows to " << args.emit_data << "\n";
    return 0;
  }

  McOptions opt;
  opt.reps = args.reps;
  opt.kinds = selected_kinds(args.estimator);
  opt.bootstrap_replications = args.bootstrap;
  opt.inference = args.bootstrap > 0
                      ? McOptions::Inference::bootstrap
                      : (args.analytic ? McOptions::Inference::analytic
                                       : McOptions::Inference::none);
  opt.level = args.level;
  opt.stable_tol = args.stable_tol;
  opt.threads = args.threads;
  const McReport rep = monte_carlo(cfg, opt);

  json estimators = json::array();
  std::ostringstream tbl;
  tbl << "estimator  ok  failed  mean_bias  sd  rmse\n";
  for (const auto& er : rep.estimators) {
    json j{{"kind", kind_name(er.kind)},
           {"ok", er.ok},
           {"failed", er.failed},
           {"mean_estimate", er.mean_estimate},
           {"mean_bias", er.mean_bias},
           {"sd", er.sd},
           {"rmse", er.rmse}};
    if (er.coverage) j["coverage"] = *er.coverage;
    if (er.mean_ci_length) j["mean_ci_length"] = *er.mean_ci_length;
    tbl << kind_name(er.kind) << "  " << er.ok << "  " << er.failed << "  " << er.mean_bias
        << "  " << er.sd << "  " << er.rmse;
    if (er.coverage) tbl << "  coverage " << *er.coverage;
    tbl << "\n";
    estimators.push_back(std::move(j));
  }
  json report;
  report["runspec"] = json{{"command", "simulate"},
                           {"config", args.config},
                           {"reps", args.reps},
                           {"estimator", args.estimator},
                           {"bootstrap", args.bootstrap},
                           {"seed", cfg.seed},
                           {"stable_tol", args.stable_tol}};
  report["mc"] = json{{"reps", rep.reps},
                      {"truth", json{{"delta", rep.truth.delta},
                                     {"delta_prime", rep.truth.delta_prime},
                                     {"delta_star", rep.truth.delta_star},
                                     {"alpha", rep.truth.alpha}}},
                      {"estimators", std::move(estimators)}};
  emit(report, args.io, tbl.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuzzy difference-in-differences estimators, bounds and diagnostics"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_est = app.add_subcommand("estimate", "point estimates with inference");
  add_io_options(cmd_est, est.io);
  add_inference_options(cmd_est, est.inf);
  cmd_est->add_option("--periods", est.periods, "analysis period pair t0,t1");
  cmd_est->add_option("--estimator", est.estimator, "did|tc|cic|all")
      ->check(CLI::IsMember({"did", "tc", "cic", "all"}));
  cmd_est->add_option("--quantiles", est.quantiles, "comma-separated quantile orders");
  cmd_est->add_option("--stable-tol", est.stable_tol,
                      "tolerance for the stable-control check (default 0)");
  cmd_est->add_option("--supergroups", est.supergroups,
                      "auto (classify) or a path to a group,label map");
  cmd_est->add_option("--pvalue-threshold", est.pvalue_threshold,
                      "stability p-value threshold (default 0.5)");
  cmd_est->add_flag("--split-sample", est.split_sample_flag,
                    "classify on odd rows, estimate on even rows");

  BoundsArgs bnd;
  CLI::App* cmd_bnd = app.add_subcommand("bounds", "partial-identification bounds");
  add_io_options(cmd_bnd, bnd.io);
  add_inference_options(cmd_bnd, bnd.inf);
  cmd_bnd->add_option("--periods", bnd.periods, "analysis period pair t0,t1");
  cmd_bnd->add_option("--method", bnd.method, "tc|cic|all")
      ->check(CLI::IsMember({"tc", "cic", "all"}));
  cmd_bnd->add_option("--quantiles", bnd.quantiles, "quantile orders for cic tau bounds");
  cmd_bnd->add_option("--support", bnd.support, "declared outcome support lo,hi");
  cmd_bnd->add_option("--stable-tol", bnd.stable_tol, "stable-control tolerance");

  PlaceboArgs plc;
  CLI::App* cmd_plc = app.add_subcommand("placebo", "pre-period diagnostics");
  add_io_options(cmd_plc, plc.io);
  add_inference_options(cmd_plc, plc.inf);
  cmd_plc->add_option("--placebo-pair", plc.pair,
                      "t_minus,t_zero (default: the two most recent pre-treatment periods)");
  cmd_plc->add_option("--supergroups", plc.supergroups,
                      "group,label map: run pooled supergroup placebos");
  cmd_plc->add_option("--pvalue-threshold", plc.pvalue_threshold,
                      "stability p-value threshold (default 0.5)");

  ClassifyArgs cls;
  CLI::App* cmd_cls = app.add_subcommand("classify", "supergroup classification");
  add_io_options(cmd_cls, cls.io);
  cmd_cls->add_option("--periods", cls.periods, "analysis period pair t0,t1");
  cmd_cls->add_option("--pvalue-threshold", cls.pvalue_threshold,
                      "stability p-value threshold (default 0.5)");
  cmd_cls->add_option("--map-out", cls.map_out, "write the group,label map here");
  cmd_cls->add_flag("--split-sample", cls.split_sample_flag, "classify on odd rows only");

  SimulateArgs sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "monte carlo oracle studies");
  cmd_sim->add_option("--config", sim.config, "dgp config file")->required();
  cmd_sim->add_option("--reps", sim.reps, "replications (default 100)");
  cmd_sim->add_option("--estimator", sim.estimator, "did|tc|cic|all")
      ->check(CLI::IsMember({"did", "tc", "cic", "all"}));
  cmd_sim->add_option("--bootstrap", sim.bootstrap, "bootstrap replications for coverage");
  cmd_sim->add_flag("--analytic-se", sim.analytic, "use influence-function intervals");
  auto* seed_opt = cmd_sim->add_option("--seed", sim.seed, "override the config seed");
  cmd_sim->add_option("--stable-tol", sim.stable_tol,
                      "stable-control tolerance (default 0.05)");
  cmd_sim->add_option("--level", sim.level, "confidence level");
  cmd_sim->add_option("--threads", sim.threads, "worker threads");
  cmd_sim->add_option("--emit-data", sim.emit_data,
                      "write one generated dataset as CSV and exit");
  cmd_sim->add_option("--format", sim.io.format, "json|table")
      ->check(CLI::IsMember({"json", "table"}));
  cmd_sim->add_option("--output", sim.io.output, "write the JSON report to this path");

  try {
    app.parse(argc, argv);
    sim.seed_set = seed_opt->count() > 0;
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_bnd->parsed()) return run_bounds(bnd);
    if (cmd_plc->parsed()) return run_placebo(plc);
    if (cmd_cls->parsed()) return run_classify(cls);
    if (cmd_sim->parsed()) return run_simulate(sim);
    return 1;
  } catch (const CLI::ParseError& e) {
    // collapse CLI11's many parse-error codes onto the documented usage code
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return 2;
  }
}
