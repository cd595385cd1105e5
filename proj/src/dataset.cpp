#include "fdid/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace fdid {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw, const std::string& col, std::size_t row) {
  const std::string s = trim(raw);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw SchemaError("dataset", "column '" + col + "': unparsable value '" + s + "' on row " +
                                     std::to_string(row));
  }
  return v;
}

int parse_int(const std::string& raw, const std::string& col, std::size_t row, bool nonneg) {
  const std::string s = trim(raw);
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    // Accept integral-valued decimals such as "1.0" the way stats packages
    // commonly write them.
    const double dv = parse_double(s, col, row);
    if (std::floor(dv) != dv || !std::isfinite(dv)) {
      throw SchemaError("dataset", "column '" + col + "': expected an integer, got '" + s +
                                       "' on row " + std::to_string(row));
    }
    v = static_cast<long>(dv);
  }
  if (nonneg && v < 0) {
    throw SchemaError("dataset", "column '" + col + "': expected a non-negative integer, got '" +
                                     s + "' on row " + std::to_string(row));
  }
  return static_cast<int>(v);
}

}  // namespace

Dataset::Dataset(std::vector<Observation> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw SchemaError("dataset", "dataset is empty");

  std::map<int, int> gmap, tmap;
  for (const auto& r : rows_) {
    gmap.emplace(r.g, 0);
    tmap.emplace(r.t, 0);
    dmax_ = std::max(dmax_, r.d);
  }
  for (auto& [label, dense] : gmap) {
    dense = static_cast<int>(group_labels_.size());
    group_labels_.push_back(label);
  }
  for (auto& [label, dense] : tmap) {
    dense = static_cast<int>(period_labels_.size());
    period_labels_.push_back(label);
  }

  std::size_t with_cluster = 0;
  for (auto& r : rows_) {
    r.g = gmap[r.g];
    r.t = tmap[r.t];
    if (!std::isfinite(r.y)) throw SchemaError("dataset", "non-finite outcome value");
    if (r.d < 0) throw SchemaError("dataset", "negative treatment level");
    if (r.cluster) ++with_cluster;
  }
  if (with_cluster != 0 && with_cluster != rows_.size()) {
    throw SchemaError("dataset", "cluster ids must be present on every row or on none");
  }
  has_clusters_ = with_cluster == rows_.size();
}

Dataset Dataset::load_table(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("dataset", "cannot open input file '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw SchemaError("dataset", "empty file '" + path + "'");
  const auto cols = split_line(header, schema.delimiter);

  auto find_col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (trim(cols[i]) == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int iy = find_col(schema.y);
  const int id = find_col(schema.d);
  const int ig = find_col(schema.g);
  const int it = find_col(schema.t);
  const int ic = schema.cluster.empty() ? -1 : find_col(schema.cluster);
  for (const auto& [idx, name] :
       {std::pair{iy, schema.y}, {id, schema.d}, {ig, schema.g}, {it, schema.t}}) {
    if (idx < 0) throw SchemaError("dataset", "missing column '" + name + "' in '" + path + "'");
  }

  std::vector<Observation> rows;
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    const auto fields = split_line(line, schema.delimiter);
    auto field = [&](int i) -> const std::string& {
      if (i < 0 || static_cast<std::size_t>(i) >= fields.size()) {
        throw SchemaError("dataset", "row " + std::to_string(row_no) + " has too few fields");
      }
      if (!schema.na_token.empty() && trim(fields[static_cast<std::size_t>(i)]) == schema.na_token) {
        throw SchemaError("dataset", "missing value on row " + std::to_string(row_no));
      }
      return fields[static_cast<std::size_t>(i)];
    };
    Observation o;
    o.y = parse_double(field(iy), schema.y, row_no);
    if (!std::isfinite(o.y)) {
      throw SchemaError("dataset", "column '" + schema.y + "': non-finite value on row " +
                                       std::to_string(row_no));
    }
    o.d = parse_int(field(id), schema.d, row_no, /*nonneg=*/true);
    o.g = parse_int(field(ig), schema.g, row_no, false);
    o.t = parse_int(field(it), schema.t, row_no, false);
    if (ic >= 0) o.cluster = parse_int(field(ic), schema.cluster, row_no, false);
    rows.push_back(o);
  }
  if (rows.empty()) throw SchemaError("dataset", "no data rows in '" + path + "'");
  return Dataset(std::move(rows));
}

Dataset Dataset::select_periods(int raw_t0, int raw_t1) const {
  if (raw_t0 == raw_t1) throw PreconditionError("dataset", "period pair must be distinct");
  std::vector<Observation> sel;
  for (const auto& r : rows_) {
    const int raw = raw_period_label(r.t);
    if (raw != raw_t0 && raw != raw_t1) continue;
    Observation o = r;
    o.g = raw_group_label(r.g);
    o.t = raw == raw_t0 ? 0 : 1;
    sel.push_back(o);
  }
  if (sel.empty()) {
    throw PreconditionError("dataset", "no observations in periods " + std::to_string(raw_t0) +
                                           "," + std::to_string(raw_t1));
  }
  return Dataset(std::move(sel));
}

CellTable::CellTable(const Dataset& ds, bool sort_samples)
    : groups_(ds.num_groups()),
      periods_(ds.num_periods()),
      dmax_(ds.dmax()),
      n_(ds.n()),
      sorted_(sort_samples) {
  const std::size_t cells = static_cast<std::size_t>(dmax_ + 1) * groups_ * periods_;
  const std::size_t gts = static_cast<std::size_t>(groups_) * periods_;
  cell_count_.assign(cells, 0);
  cell_sum_.assign(cells, 0.0);
  cell_sample_.assign(cells, {});
  gt_count_.assign(gts, 0);
  gt_sum_y_.assign(gts, 0.0);
  gt_sum_d_.assign(gts, 0.0);
  pooled_min_ = std::numeric_limits<double>::infinity();
  pooled_max_ = -pooled_min_;

  for (const auto& r : ds.rows()) {
    const std::size_t ci = idx(r.d, r.g, r.t);
    const std::size_t gi = gt_idx(r.g, r.t);
    ++cell_count_[ci];
    cell_sum_[ci] += r.y;
    cell_sample_[ci].push_back(r.y);
    ++gt_count_[gi];
    gt_sum_y_[gi] += r.y;
    gt_sum_d_[gi] += r.d;
    pooled_min_ = std::min(pooled_min_, r.y);
    pooled_max_ = std::max(pooled_max_, r.y);
  }
  if (sort_samples) {
    for (auto& v : cell_sample_) std::sort(v.begin(), v.end());
  }
}

std::size_t CellTable::idx(int d, int g, int t) const {
  return (static_cast<std::size_t>(d) * groups_ + g) * periods_ + t;
}

std::size_t CellTable::gt_idx(int g, int t) const {
  return static_cast<std::size_t>(g) * periods_ + t;
}

double CellTable::mean_y(int d, int g, int t) const {
  const std::size_t i = idx(d, g, t);
  return cell_count_[i] > 0 ? cell_sum_[i] / static_cast<double>(cell_count_[i])
                            : std::numeric_limits<double>::quiet_NaN();
}

double CellTable::mean_y_gt(int g, int t) const {
  const std::size_t i = gt_idx(g, t);
  return gt_count_[i] > 0 ? gt_sum_y_[i] / static_cast<double>(gt_count_[i])
                          : std::numeric_limits<double>::quiet_NaN();
}

double CellTable::mean_d_gt(int g, int t) const {
  const std::size_t i = gt_idx(g, t);
  return gt_count_[i] > 0 ? gt_sum_d_[i] / static_cast<double>(gt_count_[i])
                          : std::numeric_limits<double>::quiet_NaN();
}

double CellTable::share(int d, int g, int t) const {
  const long denom = gt_count_[gt_idx(g, t)];
  if (denom == 0) return 0.0;
  return static_cast<double>(count(d, g, t)) / static_cast<double>(denom);
}

double CellTable::p_gt(int g, int t) const {
  return static_cast<double>(gt_count_[gt_idx(g, t)]) / static_cast<double>(n_);
}

double CellTable::p_dgt(int d, int g, int t) const {
  return static_cast<double>(count(d, g, t)) / static_cast<double>(n_);
}

std::span<const double> CellTable::sample(int d, int g, int t) const {
  return cell_sample_[idx(d, g, t)];
}

std::vector<double> CellTable::pooled_grid() const {
  std::vector<double> all;
  all.reserve(n_);
  for (const auto& s : cell_sample_) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

void CellTable::require_cell(int d, int g, int t, const std::string& who) const {
  if (!has_cell(d, g, t)) {
    throw PreconditionError(who, "required cell (d=" + std::to_string(d) + ", g=" +
                                     std::to_string(g) + ", t=" + std::to_string(t) + ") is empty");
  }
}

void CellTable::require_gt(int g, int t, const std::string& who) const {
  if (!has_gt(g, t)) {
    throw PreconditionError(who, "required cell (g=" + std::to_string(g) + ", t=" +
                                     std::to_string(t) + ") is empty");
  }
}

DesignInfo check_design(const CellTable& ct, double tol) {
  if (ct.num_groups() != 2 || ct.num_periods() != 2) {
    throw PreconditionError("dataset", "design check expects exactly two groups and two periods");
  }
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) ct.require_gt(g, t, "dataset");
  }

  DesignInfo info;
  info.stable_tol = tol;
  info.first_stage_gap = ct.mean_d_gt(1, 1) - ct.mean_d_gt(1, 0);
  info.control_gap = ct.mean_d_gt(0, 1) - ct.mean_d_gt(0, 0);
  info.did_d = info.first_stage_gap - info.control_gap;

  if (info.first_stage_gap < -kDenomEps) {
    throw DesignError("dataset",
                      "treatment rate falls in the treatment group; redefine the treatment as "
                      "d_max - d so that it increases");
  }
  if (std::abs(info.first_stage_gap) <= kDenomEps) {
    throw DesignError("dataset",
                      "no first stage: the treatment rate does not change in the treatment group");
  }
  info.first_stage_ok = info.did_d > kDenomEps;

  info.max_control_share_gap = 0.0;
  info.lambda.assign(2, std::vector<double>(static_cast<std::size_t>(ct.dmax()) + 1, 1.0));
  for (int g = 0; g < 2; ++g) {
    for (int d = 0; d <= ct.dmax(); ++d) {
      const double p0 = ct.share(d, g, 0);
      const double p1 = ct.share(d, g, 1);
      if (g == 0) info.max_control_share_gap = std::max(info.max_control_share_gap, std::abs(p1 - p0));
      if (p0 > 0.0) {
        info.lambda[g][static_cast<std::size_t>(d)] = p1 / p0;
      } else if (p1 > 0.0) {
        info.lambda[g][static_cast<std::size_t>(d)] = std::numeric_limits<double>::quiet_NaN();
      }  // both zero: level absent from the group, ratio stays at 1
    }
  }
  info.stable_control = info.max_control_share_gap <= tol;
  return info;
}

}  // namespace fdid
