#include "fdid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "fdid/parallel.hpp"
#include "fdid/rng.hpp"

namespace fdid {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// Order statistic at rank q of an ascending vector, left-continuous
// generalized-inverse convention (matches the rest of the project).
double percentile(const std::vector<double>& sorted, double q) {
  const double m = static_cast<double>(sorted.size());
  long k = static_cast<long>(std::ceil(q * m - kRankFuzz));
  k = std::clamp<long>(k, 1, static_cast<long>(sorted.size()));
  return sorted[static_cast<std::size_t>(k - 1)];
}

std::vector<std::vector<std::size_t>> cluster_members(const Dataset& ds) {
  if (!ds.has_clusters()) {
    throw PreconditionError("inference", "cluster bootstrap needs a cluster column");
  }
  std::map<int, std::vector<std::size_t>> by_id;
  const auto rows = ds.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) by_id[*rows[i].cluster].push_back(i);
  std::vector<std::vector<std::size_t>> members;
  members.reserve(by_id.size());
  for (auto& [id, idx] : by_id) members.push_back(std::move(idx));
  return members;
}

std::vector<Observation> resample(const Dataset& ds,
                                  const std::vector<std::vector<std::size_t>>* clusters,
                                  Rng& rng) {
  const auto rows = ds.rows();
  std::vector<Observation> out;
  out.reserve(rows.size());
  if (clusters == nullptr) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      out.push_back(rows[rng.uniform_below(rows.size())]);
    }
  } else {
    const std::size_t m = clusters->size();
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i : (*clusters)[rng.uniform_below(m)]) out.push_back(rows[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<BootstrapResult> bootstrap_many(const Dataset& ds, const std::vector<Statistic>& stats,
                                            const BootstrapConfig& cfg) {
  if (cfg.replications < 2) {
    throw PreconditionError("inference", "bootstrap needs at least 2 replications");
  }
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
    throw PreconditionError("inference", "confidence level must lie in (0,1)");
  }
  const std::size_t b_total = static_cast<std::size_t>(cfg.replications);
  const std::size_t k = stats.size();

  std::vector<std::vector<std::size_t>> clusters;
  const bool clustered = cfg.scheme == BootstrapConfig::Scheme::cluster;
  if (clustered) clusters = cluster_members(ds);

  // Replicate slots are pre-allocated; each task fills its own, so the
  // aggregate is bitwise identical for any thread count.
  std::vector<std::vector<double>> values(k, std::vector<double>(b_total, kNan));
  std::vector<std::vector<std::string>> errors(k, std::vector<std::string>(b_total));

  parallel_for(b_total, cfg.threads, [&](std::size_t b) {
    Rng rng(mix_seed(cfg.seed, b));
    Dataset boot(resample(ds, clustered ? &clusters : nullptr, rng));
    for (std::size_t s = 0; s < k; ++s) {
      try {
        values[s][b] = stats[s](boot);
      } catch (const std::exception& e) {
        errors[s][b] = e.what();
      }
    }
  });

  std::vector<BootstrapResult> results;
  results.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    BootstrapResult r;
    r.requested = cfg.replications;
    for (std::size_t b = 0; b < b_total; ++b) {
      if (std::isnan(values[s][b]) && !errors[s][b].empty()) {
        ++r.failed;
        if (r.failure_examples.size() < 3 &&
            std::find(r.failure_examples.begin(), r.failure_examples.end(), errors[s][b]) ==
                r.failure_examples.end()) {
          r.failure_examples.push_back(errors[s][b]);
        }
      } else {
        r.replicates.push_back(values[s][b]);
      }
    }
    if (r.failed * 10 > cfg.replications) {
      std::string census = "bootstrap: " + std::to_string(r.failed) + " of " +
                           std::to_string(cfg.replications) + " replicates failed";
      for (const auto& e : r.failure_examples) census += "; e.g. " + e;
      throw PreconditionError("inference", census);
    }
    if (r.replicates.size() < 2) {
      throw PreconditionError("inference", "fewer than two successful bootstrap replicates");
    }
    r.point = stats[s](ds);
    const double m = static_cast<double>(r.replicates.size());
    const double mean = std::accumulate(r.replicates.begin(), r.replicates.end(), 0.0) / m;
    double ss = 0.0;
    for (double v : r.replicates) ss += (v - mean) * (v - mean);
    r.se = std::sqrt(ss / (m - 1.0));

    r.ci.level = cfg.level;
    if (cfg.ci_method == BootstrapConfig::CiMethod::percentile) {
      std::vector<double> sorted = r.replicates;
      std::sort(sorted.begin(), sorted.end());
      r.ci.lo = percentile(sorted, (1.0 - cfg.level) / 2.0);
      r.ci.hi = percentile(sorted, (1.0 + cfg.level) / 2.0);
    } else {
      const double z = normal_quantile((1.0 + cfg.level) / 2.0);
      r.ci.lo = r.point - z * r.se;
      r.ci.hi = r.point + z * r.se;
    }
    results.push_back(std::move(r));
  }
  return results;
}

BootstrapResult bootstrap(const Dataset& ds, const Statistic& stat, const BootstrapConfig& cfg) {
  return bootstrap_many(ds, {stat}, cfg).front();
}

double influence_se(std::span<const double> influence) {
  const double n = static_cast<double>(influence.size());
  double mean = 0.0;
  for (double v : influence) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : influence) ss += (v - mean) * (v - mean);
  return std::sqrt(ss) / n;
}

ConfidenceInterval normal_ci(double point, double se, double level) {
  const double z = normal_quantile((1.0 + level) / 2.0);
  return ConfidenceInterval{point - z * se, point + z * se, level};
}

void write_replicates(const std::string& path, std::span<const double> replicates) {
  std::ofstream out(path);
  if (!out) throw SchemaError("inference", "cannot write replicate file '" + path + "'");
  out.precision(17);
  for (double v : replicates) out << v << "\n";
}

std::vector<double> influence_did(const Dataset& ds, const CellTable& ct, double point) {
  detail::require_two_by_two(ct, "inference");
  const double did_d = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0) -
                       (ct.mean_d_gt(0, 1) - ct.mean_d_gt(0, 0));
  if (std::abs(did_d) <= kDenomEps) {
    throw DesignError("inference", "degenerate treatment DID; no influence function");
  }
  // Per-cell means of eps = Y - point * D.
  double mean_eps[2][2];
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      mean_eps[g][t] = ct.mean_y_gt(g, t) - point * ct.mean_d_gt(g, t);
    }
  }
  std::vector<double> psi(ds.n());
  std::size_t i = 0;
  for (const auto& r : ds.rows()) {
    const double sign = (r.g == r.t) ? 1.0 : -1.0;
    const double eps = r.y - point * r.d;
    psi[i++] = sign * (eps - mean_eps[r.g][r.t]) / (did_d * ct.p_gt(r.g, r.t));
  }
  return psi;
}

std::vector<double> influence_tc(const Dataset& ds, const CellTable& ct, double point) {
  detail::require_two_by_two(ct, "inference");
  const double gap = detail::first_stage(ct, "inference");

  const int dmax = ct.dmax();
  std::vector<double> delta(static_cast<std::size_t>(dmax) + 1, 0.0);
  std::vector<char> needed(static_cast<std::size_t>(dmax) + 1, 0);
  double mean_corr_10 = 0.0;  // E(eps + delta_D | g=1, t=0)
  for (int d = 0; d <= dmax; ++d) {
    if (!ct.has_cell(d, 1, 0)) continue;
    ct.require_cell(d, 0, 0, "inference");
    ct.require_cell(d, 0, 1, "inference");
    needed[static_cast<std::size_t>(d)] = 1;
    delta[static_cast<std::size_t>(d)] = ct.mean_y(d, 0, 1) - ct.mean_y(d, 0, 0);
    mean_corr_10 += ct.share(d, 1, 0) * delta[static_cast<std::size_t>(d)];
  }
  const double mean_eps_11 = ct.mean_y_gt(1, 1) - point * ct.mean_d_gt(1, 1);
  const double mean_eps_10 = ct.mean_y_gt(1, 0) - point * ct.mean_d_gt(1, 0) + mean_corr_10;

  std::vector<double> psi(ds.n());
  std::size_t i = 0;
  for (const auto& r : ds.rows()) {
    double v = 0.0;
    const std::size_t dl = static_cast<std::size_t>(r.d);
    if (r.g == 1 && r.t == 1) {
      v = (r.y - point * r.d - mean_eps_11) / ct.p_gt(1, 1);
    } else if (r.g == 1 && r.t == 0) {
      v = -(r.y - point * r.d + delta[dl] - mean_eps_10) / ct.p_gt(1, 0);
    } else if (r.g == 0 && needed[dl]) {
      // Control units carry the sampling noise of the delta_d estimates,
      // weighted by the treatment-group share of their level.
      const double sign = r.t == 1 ? 1.0 : -1.0;
      v = -ct.share(r.d, 1, 0) * sign * (r.y - ct.mean_y(r.d, 0, r.t)) /
          ct.p_dgt(r.d, 0, r.t);
    }
    psi[i++] = v / gap;
  }
  return psi;
}

namespace {

// Gaussian kernel density with Silverman's bandwidth; the explicitly
// approximate ingredient of the cic influence functions.
class Kde {
 public:
  explicit Kde(std::span<const double> sample) : x_(sample.begin(), sample.end()) {
    const double n = static_cast<double>(x_.size());
    double mean = std::accumulate(x_.begin(), x_.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x_) ss += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> sorted = x_;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = percentile(sorted, 0.75) - percentile(sorted, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = std::max(sd, 1e-12);
    h_ = 0.9 * spread * std::pow(n, -0.2);
    if (h_ <= 0.0) h_ = 1e-12;
  }

  double operator()(double x) const {
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    double acc = 0.0;
    for (double xi : x_) {
      const double z = (x - xi) / h_;
      acc += std::exp(-0.5 * z * z);
    }
    return acc * inv_sqrt2pi / (h_ * static_cast<double>(x_.size()));
  }

 private:
  std::vector<double> x_;
  double h_;
};

// Step-function machinery for one treatment level of the cic linearization:
// exact per-observation integrals of Psi_d over the pooled grid.
struct PsiLevel {
  int d;
  double denom;          // p_{d|11} - p_{d|10}
  double p11gt, p10gt;   // p_{gt} weights
  double pd00, pd01;     // p_{dgt} weights
  double share11, share10;
  QqTransform q;
  double lo, hi;
  // Integrals over [lo, hi] of the centering step functions.
  double int_f11 = 0.0, int_fq = 0.0, int_cic = 0.0;
  double int_hp_total = 0.0;           // integral of H'(y)
  double j00 = 0.0, j01 = 0.0;         // integrals of H' * centering cdfs
  std::vector<double> grid;
  std::vector<double> cum_hp;          // prefix integrals of H' at grid points
  StepCdf f11, fq, fq00, f01;
  bool have_density;

  double cum_hp_at(double y) const {
    // y is always a grid point by construction (transformed sample values).
    auto it = std::lower_bound(grid.begin(), grid.end(), y);
    return cum_hp[static_cast<std::size_t>(it - grid.begin())];
  }
};

PsiLevel make_psi_level(const CellTable& ct, int d, const std::vector<double>& grid,
                        bool with_density) {
  ct.require_cell(d, 1, 1, "inference");
  const double s11 = ct.share(d, 1, 1);
  const double s10 = ct.share(d, 1, 0);
  if (std::abs(s11 - s10) <= kDenomEps) {
    throw PreconditionError("inference", "switcher share denominator vanishes at level d=" +
                                             std::to_string(d));
  }

  if (s10 == 0.0) {
    // Nobody in the treatment group held this level at period 0 (a policy
    // extension): every correction term carries the factor p_{d|10} and
    // vanishes, leaving only the period-1 empirical-cdf linearization. The
    // transform slots hold inert placeholders.
    const StepCdf f11 = StepCdf::ecdf(ct.sample(d, 1, 1));
    PsiLevel lv{d,
                s11,
                ct.p_gt(1, 1),
                ct.p_gt(1, 0),
                1.0,
                1.0,
                s11,
                0.0,
                QqTransform(f11, f11),
                grid.front(),
                grid.back(),
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                grid,
                {},
                f11,
                f11,
                f11,
                f11,
                false};
    lv.cum_hp.assign(grid.size() + 1, 0.0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      lv.int_f11 += lv.f11(grid[i]) * (grid[i + 1] - grid[i]);
    }
    lv.int_cic = lv.int_f11;
    return lv;
  }

  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) ct.require_cell(d, g, t, "inference");
  }

  QqTransform q(StepCdf::ecdf(ct.sample(d, 0, 0)), StepCdf::ecdf(ct.sample(d, 0, 1)));
  auto transform_sorted = [&](std::span<const double> ys) {
    std::vector<double> out;
    out.reserve(ys.size());
    for (double y : ys) out.push_back(q(y));
    std::sort(out.begin(), out.end());
    return out;
  };

  PsiLevel lv{d,
              s11 - s10,
              ct.p_gt(1, 1),
              ct.p_gt(1, 0),
              ct.p_dgt(d, 0, 0),
              ct.p_dgt(d, 0, 1),
              s11,
              s10,
              q,
              grid.front(),
              grid.back(),
              0.0,
              0.0,
              0.0,
              0.0,
              0.0,
              0.0,
              grid,
              {},
              StepCdf::ecdf(ct.sample(d, 1, 1)),
              StepCdf::ecdf(transform_sorted(ct.sample(d, 1, 0))),
              StepCdf::ecdf(transform_sorted(ct.sample(d, 0, 0))),
              StepCdf::ecdf(ct.sample(d, 0, 1)),
              with_density};

  // H'(y) = f_{d10}(x) / f_{d00}(x) at x = F_{d00}^{-1}(F_{d01}(y)): the
  // density ratio carried by the double matching. Kernel plug-in with a
  // floor on the denominator.
  std::vector<double> hp(grid.size(), 0.0);
  if (with_density) {
    const Kde kde10(ct.sample(d, 1, 0));
    const Kde kde00(ct.sample(d, 0, 0));
    const StepCdf f00 = StepCdf::ecdf(ct.sample(d, 0, 0));
    const double floor = 1e-6 / std::max(lv.hi - lv.lo, 1e-300);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = f00.quantile(lv.f01(grid[i]));
      hp[i] = kde10(x) / std::max(kde00(x), floor);
    }
  }

  lv.cum_hp.assign(grid.size() + 1, 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double w = grid[i + 1] - grid[i];
    lv.cum_hp[i + 1] = lv.cum_hp[i] + hp[i] * w;
    lv.int_f11 += lv.f11(grid[i]) * w;
    lv.int_fq += lv.fq(grid[i]) * w;
    lv.j00 += hp[i] * lv.fq00(grid[i]) * w;
    lv.j01 += hp[i] * lv.f01(grid[i]) * w;
  }
  if (!grid.empty()) lv.cum_hp[grid.size()] = lv.cum_hp[grid.size() - 1];
  lv.int_hp_total = lv.cum_hp[grid.size()];
  lv.int_cic = (lv.share11 * lv.int_f11 - lv.share10 * lv.int_fq) / lv.denom;
  return lv;
}

// Integral over y of Psi_{d,i}(y) for observation r; exact given the step
// structure. Every term is demeaned within its (d,g,t) cell, so the sum of
// these integrals over the sample vanishes up to float rounding.
double psi_level_integral(const PsiLevel& lv, const Observation& r) {
  const bool at_level = r.d == lv.d;
  if (r.g == 1 && r.t == 1) {
    const double ind = at_level ? (lv.hi - r.y) : 0.0;
    return (ind - lv.share11 * lv.int_f11 - lv.int_cic * ((at_level ? 1.0 : 0.0) - lv.share11)) /
           (lv.denom * lv.p11gt);
  }
  if (r.g == 1 && r.t == 0) {
    const double ind = at_level ? (lv.hi - lv.q(r.y)) : 0.0;
    const double a = at_level ? -(ind - lv.int_fq) : 0.0;
    const double b = ((at_level ? 1.0 : 0.0) - lv.share10) * (lv.int_cic - lv.int_fq);
    return (a + b) / (lv.denom * lv.p10gt);
  }
  if (!at_level || !lv.have_density) return 0.0;
  if (r.t == 0) {
    const double qv = lv.q(r.y);
    const double ind = lv.int_hp_total - lv.cum_hp_at(qv);
    return lv.share10 * (ind - lv.j00) / (lv.denom * lv.pd00);
  }
  const double ind = lv.int_hp_total - lv.cum_hp_at(r.y);
  return -lv.share10 * (ind - lv.j01) / (lv.denom * lv.pd01);
}

std::vector<double> union_grid(const CellTable& ct) {
  // Pooled observed values plus the transformed period-0 samples; every jump
  // point of every step function entering Psi_d lives here.
  std::vector<double> grid = ct.pooled_grid();
  for (int d = 0; d <= 1; ++d) {
    if (!ct.has_cell(d, 0, 0) || !ct.has_cell(d, 0, 1)) continue;
    QqTransform q(StepCdf::ecdf(ct.sample(d, 0, 0)), StepCdf::ecdf(ct.sample(d, 0, 1)));
    for (double y : ct.sample(d, 1, 0)) grid.push_back(q(y));
    for (double y : ct.sample(d, 0, 0)) grid.push_back(q(y));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

void require_binary_for_psi(const CellTable& ct) {
  if (ct.dmax() != 1) {
    throw PreconditionError("inference",
                            "analytic cic influence functions cover a binary treatment; use the "
                            "bootstrap for ordered treatments");
  }
}

}  // namespace

std::vector<double> influence_cic(const Dataset& ds, const CellTable& ct) {
  detail::require_two_by_two(ct, "inference");
  require_binary_for_psi(ct);
  if (!ct.samples_sorted()) {
    throw PreconditionError("inference", "cell table must carry sorted samples");
  }
  const std::vector<double> grid = union_grid(ct);
  const PsiLevel l0 = make_psi_level(ct, 0, grid, true);
  const PsiLevel l1 = make_psi_level(ct, 1, grid, true);
  std::vector<double> psi(ds.n());
  std::size_t i = 0;
  for (const auto& r : ds.rows()) {
    psi[i++] = psi_level_integral(l0, r) - psi_level_integral(l1, r);
  }
  return psi;
}

namespace {

// Psi_{d,i}(y) at a fixed point y; shares the centering choices of the
// integral version.
double psi_level_at(const PsiLevel& lv, const Observation& r, double y) {
  const bool at_level = r.d == lv.d;
  const double f11 = lv.f11(y);
  const double fq = lv.fq(y);
  const double fcic = (lv.share11 * f11 - lv.share10 * fq) / lv.denom;
  if (r.g == 1 && r.t == 1) {
    const double ind = at_level && r.y <= y ? 1.0 : 0.0;
    return (ind - lv.share11 * f11 - fcic * ((at_level ? 1.0 : 0.0) - lv.share11)) /
           (lv.denom * lv.p11gt);
  }
  if (r.g == 1 && r.t == 0) {
    const double a = at_level ? -((lv.q(r.y) <= y ? 1.0 : 0.0) - fq) : 0.0;
    const double b = ((at_level ? 1.0 : 0.0) - lv.share10) * (fcic - fq);
    return (a + b) / (lv.denom * lv.p10gt);
  }
  if (!at_level) return 0.0;
  // The density-ratio factor is evaluated by the caller and folded into the
  // weight below; here only the centered indicator remains.
  if (r.t == 0) {
    return lv.share10 * ((lv.q(r.y) <= y ? 1.0 : 0.0) - lv.fq00(y)) / (lv.denom * lv.pd00);
  }
  return -lv.share10 * ((r.y <= y ? 1.0 : 0.0) - lv.f01(y)) / (lv.denom * lv.pd01);
}

}  // namespace

std::vector<double> influence_lqte(const Dataset& ds, const CellTable& ct, double q) {
  detail::require_two_by_two(ct, "inference");
  require_binary_for_psi(ct);
  if (!(q > 0.0 && q < 1.0)) {
    throw PreconditionError("inference", "quantile order must lie strictly between 0 and 1");
  }
  const std::vector<double> grid = union_grid(ct);
  const PsiLevel l0 = make_psi_level(ct, 0, grid, false);
  const PsiLevel l1 = make_psi_level(ct, 1, grid, false);

  const double range = grid.back() - grid.front();
  const double floor = 1e-6 / std::max(range, 1e-300);

  struct Side {
    double ystar;
    double density;
    double hprime;  // H' at the quantile, for the control-cell terms
  };
  auto prepare = [&](const PsiLevel& lv) {
    const SwitcherCdf sc = switcher_cdf(ct, lv.d);
    Side s;
    s.ystar = sc.rearranged.quantile(q);
    const Kde kde11(ct.sample(lv.d, 1, 1));
    if (lv.share10 == 0.0) {
      // extension design: the switcher distribution is the period-1 cell
      s.density = kde11(s.ystar);
      s.hprime = 0.0;
    } else {
      std::vector<double> transformed;
      for (double y : ct.sample(lv.d, 1, 0)) transformed.push_back(lv.q(y));
      std::sort(transformed.begin(), transformed.end());
      const Kde kdeq(transformed);
      s.density = (lv.share11 * kde11(s.ystar) - lv.share10 * kdeq(s.ystar)) / lv.denom;
      const Kde kde10(ct.sample(lv.d, 1, 0));
      const Kde kde00(ct.sample(lv.d, 0, 0));
      const StepCdf f00 = StepCdf::ecdf(ct.sample(lv.d, 0, 0));
      const double x = f00.quantile(lv.f01(s.ystar));
      s.hprime = kde10(x) / std::max(kde00(x), floor);
    }
    if (!(s.density >= floor)) {
      throw PreconditionError(
          "inference",
          "switcher outcome density below floor at the q=" + std::to_string(q) +
              " quantile; the analytic variance is unreliable -- use the bootstrap");
    }
    return s;
  };
  const Side s0 = prepare(l0);
  const Side s1 = prepare(l1);

  auto psi_at = [&](const PsiLevel& lv, const Side& s, const Observation& r) {
    double v = psi_level_at(lv, r, s.ystar);
    if (r.g == 0 && r.d == lv.d) v *= s.hprime;
    return v / s.density;
  };

  std::vector<double> psi(ds.n());
  std::size_t i = 0;
  for (const auto& r : ds.rows()) {
    psi[i++] = psi_at(l1, s1, r) - psi_at(l0, s0, r);
  }
  return psi;
}

}  // namespace fdid
