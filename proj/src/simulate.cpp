#include "fdid/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fdid/inference.hpp"
#include "fdid/parallel.hpp"
#include "fdid/rng.hpp"

namespace fdid {

namespace {

std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

// Fills defaulted per-group/per-period vectors and checks consistency.
DgpConfig normalized(DgpConfig cfg) {
  const std::size_t groups = cfg.group_shares.size();
  const std::size_t periods = cfg.period_shares.size();
  if (cfg.n < 1) throw PreconditionError("simulate", "n must be positive");
  if (groups < 2) throw PreconditionError("simulate", "need at least two groups");
  if (periods < 2) throw PreconditionError("simulate", "need at least two periods");
  if (cfg.thresholds.size() != groups) {
    throw PreconditionError("simulate", "one threshold row per group expected");
  }
  if (cfg.gamma.empty()) cfg.gamma.assign(groups, 0.0);
  if (cfg.gamma.size() != groups) {
    throw PreconditionError("simulate", "gamma must have one entry per group");
  }
  if (cfg.btrend.empty()) cfg.btrend.assign(periods, 0.0);
  if (cfg.btrend.size() != periods) {
    throw PreconditionError("simulate", "btrend must have one entry per period");
  }
  if (cfg.y1_sigma.empty()) cfg.y1_sigma.assign(periods, 1.0);
  if (cfg.y1_sigma.size() != periods) {
    throw PreconditionError("simulate", "y1_sigma must have one entry per period");
  }
  for (const auto& row : cfg.thresholds) {
    if (row.size() != periods) {
      throw PreconditionError("simulate", "each threshold row needs one value per period");
    }
    for (double v : row) {
      if (v < 0.0 || v > 1.0) throw PreconditionError("simulate", "thresholds must lie in [0,1]");
    }
  }
  if (std::abs(cfg.rho) >= 1.0) throw PreconditionError("simulate", "|rho| must be below 1");
  for (double s : cfg.group_shares) {
    if (s < 0.0) throw PreconditionError("simulate", "group shares must be non-negative");
  }
  return cfg;
}

double tau_interval_mean(const DgpConfig& cfg, double lo, double hi) {
  return cfg.tau0 + cfg.tau1 * 0.5 * (lo + hi);
}

}  // namespace

DgpConfig DgpConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("simulate", "cannot open config file '" + path + "'");
  DgpConfig cfg;
  cfg.thresholds.clear();
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    try {
      if (key == "n") cfg.n = std::stol(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "tau0") cfg.tau0 = std::stod(value);
      else if (key == "tau1") cfg.tau1 = std::stod(value);
      else if (key == "rho") cfg.rho = std::stod(value);
      else if (key == "u0_scale") cfg.u0_scale = std::stod(value);
      else if (key == "cluster_size") cfg.cluster_size = std::stol(value);
      else if (key == "u0_law") {
        if (value == "gauss") cfg.u0_law = U0Law::gauss;
        else if (value == "uniform") cfg.u0_law = U0Law::uniform;
        else throw SchemaError("simulate", "u0_law must be gauss or uniform");
      } else if (key == "group_shares") cfg.group_shares = parse_list(value);
      else if (key == "period_shares") cfg.period_shares = parse_list(value);
      else if (key == "gamma") cfg.gamma = parse_list(value);
      else if (key == "btrend") {
        const auto v = parse_list(value);
        if (v.size() != 2) throw SchemaError("simulate", "btrend needs two values");
        cfg.btrend = {v[0], v[1]};
      } else if (key == "y1_sigma") {
        const auto v = parse_list(value);
        if (v.size() != 2) throw SchemaError("simulate", "y1_sigma needs two values");
        cfg.y1_sigma = {v[0], v[1]};
      } else if (key == "thresholds") {
        // One "v_g0:v_g1" pair per group, comma separated.
        std::stringstream ss(value);
        std::string pair;
        while (std::getline(ss, pair, ',')) {
          const auto colon = pair.find(':');
          if (colon == std::string::npos) {
            throw SchemaError("simulate", "thresholds entries look like v0:v1");
          }
          cfg.thresholds.push_back(
              {std::stod(pair.substr(0, colon)), std::stod(pair.substr(colon + 1))});
        }
      } else {
        throw SchemaError("simulate", "unknown config key '" + key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw SchemaError("simulate", "bad value for config key '" + key + "': '" + value + "'");
    }
  }
  if (cfg.thresholds.empty()) {
    throw SchemaError("simulate", "config must set thresholds");
  }
  return cfg;
}

namespace {

Truth compute_truth(const DgpConfig& cfg) {
  Truth truth;
  truth.constant_effect = cfg.tau1 == 0.0;
  truth.tau_q = cfg.tau0;

  const std::size_t t1 = cfg.period_shares.size() - 1;  // analysis pair
  double shares_total = std::accumulate(cfg.group_shares.begin(), cfg.group_shares.end(), 0.0);
  double mass_up = 0.0, sum_up = 0.0;      // rate rises: v_g1 < v_g0
  double mass_down = 0.0, sum_down = 0.0;  // rate falls
  for (std::size_t g = 0; g < cfg.thresholds.size(); ++g) {
    const double v0 = cfg.thresholds[g][t1 - 1];
    const double v1 = cfg.thresholds[g][t1];
    if (v0 == v1) continue;
    const double lo = std::min(v0, v1);
    const double hi = std::max(v0, v1);
    const double mass = (hi - lo) * cfg.group_shares[g] / shares_total;
    const double mean = tau_interval_mean(cfg, lo, hi);
    if (v1 < v0) {
      mass_up += mass;
      sum_up += mass * mean;
    } else {
      mass_down += mass;
      sum_down += mass * mean;
    }
  }
  if (mass_up + mass_down == 0.0) {
    throw PreconditionError("simulate",
                            "no group switches treatment: the switcher effect is undefined");
  }
  truth.delta = mass_up > 0.0 ? sum_up / mass_up : std::numeric_limits<double>::quiet_NaN();
  truth.delta_prime =
      mass_down > 0.0 ? sum_down / mass_down : std::numeric_limits<double>::quiet_NaN();
  truth.delta_star = (sum_up + sum_down) / (mass_up + mass_down);

  if (cfg.thresholds.size() == 2) {
    // Two-group convention: group 1 is the treatment group.
    const double treat_gap = cfg.thresholds[1][t1 - 1] - cfg.thresholds[1][t1];
    const double control_gap = cfg.thresholds[0][t1 - 1] - cfg.thresholds[0][t1];
    if (treat_gap <= 0.0) {
      throw PreconditionError("simulate",
                              "the treatment group's rate must rise (v_11 < v_10); an equal pair "
                              "leaves the switcher effect undefined");
    }
    const double did_d = treat_gap - control_gap;
    truth.alpha = did_d != 0.0 ? treat_gap / did_d : std::numeric_limits<double>::quiet_NaN();
    const double lo = cfg.thresholds[1][t1], hi = cfg.thresholds[1][t1 - 1];
    truth.delta = tau_interval_mean(cfg, lo, hi);
    if (control_gap != 0.0) {
      const double clo = std::min(cfg.thresholds[0][t1 - 1], cfg.thresholds[0][t1]);
      const double chi = std::max(cfg.thresholds[0][t1 - 1], cfg.thresholds[0][t1]);
      truth.delta_prime = tau_interval_mean(cfg, clo, chi);
    }
  }
  return truth;
}

}  // namespace

Generated generate(const DgpConfig& raw_cfg) {
  const DgpConfig cfg = normalized(raw_cfg);
  const Truth truth = compute_truth(cfg);

  Rng rng(cfg.seed);
  const double shares_total =
      std::accumulate(cfg.group_shares.begin(), cfg.group_shares.end(), 0.0);
  const double period_total =
      std::accumulate(cfg.period_shares.begin(), cfg.period_shares.end(), 0.0);
  const double rho_c = std::sqrt(1.0 - cfg.rho * cfg.rho);

  std::vector<Observation> rows;
  rows.reserve(static_cast<std::size_t>(cfg.n));
  for (long i = 0; i < cfg.n; ++i) {
    Observation o;
    double u = rng.uniform01() * shares_total;
    int g = 0;
    for (; g + 1 < static_cast<int>(cfg.group_shares.size()); ++g) {
      if (u < cfg.group_shares[static_cast<std::size_t>(g)]) break;
      u -= cfg.group_shares[static_cast<std::size_t>(g)];
    }
    o.g = g;
    double ut = rng.uniform01() * period_total;
    int t = 0;
    for (; t + 1 < static_cast<int>(cfg.period_shares.size()); ++t) {
      if (ut < cfg.period_shares[static_cast<std::size_t>(t)]) break;
      ut -= cfg.period_shares[static_cast<std::size_t>(t)];
    }
    o.t = t;

    const double z1 = rng.normal();
    const double z2 = cfg.rho * z1 + rho_c * rng.normal();
    const double v = normal_cdf(z1);
    const double u0 = cfg.u0_scale *
                      (cfg.u0_law == DgpConfig::U0Law::gauss ? z2 : 2.0 * normal_cdf(z2) - 1.0);

    o.d = v >= cfg.thresholds[static_cast<std::size_t>(g)][static_cast<std::size_t>(o.t)] ? 1 : 0;
    const double level = cfg.gamma[static_cast<std::size_t>(g)] +
                         cfg.btrend[static_cast<std::size_t>(o.t)];
    const double y0 = u0 + level;
    const double y1 = cfg.y1_sigma[static_cast<std::size_t>(o.t)] * u0 + level +
                      (cfg.tau0 + cfg.tau1 * v);
    o.y = o.d == 1 ? y1 : y0;
    if (cfg.cluster_size > 0) o.cluster = static_cast<int>(i / cfg.cluster_size);
    rows.push_back(o);
  }
  return Generated{Dataset(std::move(rows)), truth};
}

SupergroupMap true_supergroups(const DgpConfig& cfg) {
  SupergroupMap map;
  const std::size_t t1 = cfg.period_shares.size() - 1;
  for (std::size_t g = 0; g < cfg.thresholds.size(); ++g) {
    GroupStability gs;
    gs.group = static_cast<int>(g);
    const double v0 = cfg.thresholds[g][t1 - 1];
    const double v1 = cfg.thresholds[g][t1];
    gs.label = v1 < v0 ? 1 : (v1 > v0 ? -1 : 0);
    gs.mean_change = v0 - v1;
    map.groups.push_back(gs);
  }
  return map;
}

McReport monte_carlo(const DgpConfig& raw_cfg, const McOptions& options) {
  if (options.reps < 2) throw PreconditionError("simulate", "need at least two replications");
  const DgpConfig cfg = normalized(raw_cfg);

  McReport report;
  report.reps = options.reps;
  report.truth = compute_truth(cfg);
  const int periods = static_cast<int>(cfg.period_shares.size());

  const std::size_t k = options.kinds.size();
  const std::size_t reps = static_cast<std::size_t>(options.reps);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> points(k, std::vector<double>(reps, nan));
  std::vector<std::vector<double>> ci_lo(k, std::vector<double>(reps, nan));
  std::vector<std::vector<double>> ci_hi(k, std::vector<double>(reps, nan));

  parallel_for(reps, options.threads, [&](std::size_t r) {
    DgpConfig rep_cfg = cfg;
    rep_cfg.seed = mix_seed(cfg.seed, r);
    Generated gen = generate(rep_cfg);
    if (periods > 2) {
      // the estimators run on the analysis pair; earlier periods only feed
      // placebo studies
      gen.data = gen.data.select_periods(periods - 2, periods - 1);
    }
    const CellTable ct(gen.data);
    for (std::size_t s = 0; s < k; ++s) {
      const Kind kind = options.kinds[s];
      try {
        const Estimate est = point_estimate(ct, kind, options.stable_tol);
        points[s][r] = est.point;
        if (options.inference == McOptions::Inference::analytic) {
          std::vector<double> psi;
          if (kind == Kind::did) psi = influence_did(gen.data, ct, est.point);
          else if (kind == Kind::tc) psi = influence_tc(gen.data, ct, est.point);
          else psi = influence_cic(gen.data, ct);
          const ConfidenceInterval ci =
              normal_ci(est.point, influence_se(psi), options.level);
          ci_lo[s][r] = ci.lo;
          ci_hi[s][r] = ci.hi;
        } else if (options.inference == McOptions::Inference::bootstrap) {
          BootstrapConfig bc;
          bc.replications = options.bootstrap_replications;
          bc.seed = mix_seed(rep_cfg.seed, 0x626F6F74ULL);
          bc.level = options.level;
          bc.threads = 1;
          // the stability condition was already checked on this replication's
          // sample; resamples inherit the design
          const BootstrapResult b = bootstrap(
              gen.data,
              [kind](const Dataset& re) {
                const CellTable bct(re, kind == Kind::cic);
                return point_estimate(bct, kind,
                                      std::numeric_limits<double>::infinity())
                    .point;
              },
              bc);
          ci_lo[s][r] = b.ci.lo;
          ci_hi[s][r] = b.ci.hi;
        }
      } catch (const Error&) {
        // estimator precondition failed on this replication; counted below
      }
    }
  });

  for (std::size_t s = 0; s < k; ++s) {
    McEstimatorReport er;
    er.kind = options.kinds[s];
    double sum = 0.0;
    std::vector<double> ok_points;
    for (std::size_t r = 0; r < reps; ++r) {
      if (std::isnan(points[s][r])) {
        ++er.failed;
        continue;
      }
      ok_points.push_back(points[s][r]);
      sum += points[s][r];
    }
    er.ok = static_cast<long>(ok_points.size());
    if (er.ok > 0) {
      er.mean_estimate = sum / static_cast<double>(er.ok);
      er.mean_bias = er.mean_estimate - report.truth.delta;
      double ss = 0.0, mse = 0.0;
      for (double p : ok_points) {
        ss += (p - er.mean_estimate) * (p - er.mean_estimate);
        mse += (p - report.truth.delta) * (p - report.truth.delta);
      }
      er.sd = er.ok > 1 ? std::sqrt(ss / static_cast<double>(er.ok - 1)) : 0.0;
      er.rmse = std::sqrt(mse / static_cast<double>(er.ok));
    }
    if (options.inference != McOptions::Inference::none) {
      long covered = 0, with_ci = 0;
      double len = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        if (std::isnan(ci_lo[s][r])) continue;
        ++with_ci;
        len += ci_hi[s][r] - ci_lo[s][r];
        if (ci_lo[s][r] <= report.truth.delta && report.truth.delta <= ci_hi[s][r]) ++covered;
      }
      if (with_ci > 0) {
        er.coverage = static_cast<double>(covered) / static_cast<double>(with_ci);
        er.mean_ci_length = len / static_cast<double>(with_ci);
      }
    }
    report.estimators.push_back(er);
  }
  return report;
}

}  // namespace fdid
