#include "lcft/correction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lcft/parallel.hpp"

namespace lcft {

void CorrectionTable::validate() const {
  if (entries.empty()) throw ContractError("correction table: no entries");
  if (entries.front().lo != 0.0 || entries.back().hi != 1.0) {
    throw ContractError("correction table: intervals must cover [0, 1]");
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Entry& e = entries[k];
    if (!(e.lo < e.hi)) throw ContractError("correction table: empty interval");
    if (k + 1 < entries.size() && e.hi != entries[k + 1].lo) {
      throw ContractError("correction table: intervals must be contiguous");
    }
    if (!std::isfinite(e.labels.alpha) || !std::isfinite(e.labels.beta) ||
        !(e.labels.alpha > e.labels.beta)) {
      throw ContractError("correction table: each entry needs finite alpha > beta");
    }
  }
}

CorrectionPolicy::CorrectionPolicy(PolicyKind kind) : kind_(kind) {
  if (kind == PolicyKind::Hard) {
    throw ContractError("hard correction needs a table; use CorrectionPolicy::hard");
  }
}

CorrectionPolicy CorrectionPolicy::hard(CorrectionTable table) {
  table.validate();
  CorrectionPolicy p;
  p.kind_ = PolicyKind::Hard;
  p.table_ = std::make_shared<const CorrectionTable>(std::move(table));
  return p;
}

const CorrectionTable& CorrectionPolicy::table() const {
  if (!table_) throw ContractError("policy has no correction table");
  return *table_;
}

std::string_view CorrectionPolicy::name() const { return to_string(kind_); }

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::None:
      return "none";
    case PolicyKind::ScalePositive:
      return "scale_positive";
    case PolicyKind::ShiftNegative:
      return "shift_negative";
    case PolicyKind::Soft1:
      return "soft1";
    case PolicyKind::Soft2:
      return "soft2";
    case PolicyKind::Hard:
      return "hard";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  for (PolicyKind k : {PolicyKind::None, PolicyKind::ScalePositive, PolicyKind::ShiftNegative,
                       PolicyKind::Soft1, PolicyKind::Soft2, PolicyKind::Hard}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown correction policy: " + std::string(name));
}

double equivalent_ctr_closed(double alpha, double beta, double w) {
  return w * alpha + (1.0 - w) * beta;
}

namespace {

double aggregate_loss(double y, double alpha, double beta, double n_pos, double n_neg,
                      LossKind loss) {
  return n_pos * loss_value(loss, y, alpha) + n_neg * loss_value(loss, y, beta);
}

double aggregate_derivative(double y, double alpha, double beta, double n_pos, double n_neg,
                            LossKind loss) {
  if (loss == LossKind::MeanSquaredError) {
    return -2.0 * n_pos * (alpha - y) - 2.0 * n_neg * (beta - y);
  }
  const auto term = [y](double label) { return label / y - (1.0 - label) / (1.0 - y); };
  return -n_pos * term(alpha) - n_neg * term(beta);
}

}  // namespace

double equivalent_ctr_numeric(double alpha, double beta, Index n_pos, Index n_neg,
                              LossKind loss) {
  if (n_pos < 0 || n_neg < 0 || n_pos + n_neg < 1) {
    throw DomainError("equivalent_ctr_numeric: need at least one sample");
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw DomainError("equivalent_ctr_numeric: non-finite labels");
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  if (loss == LossKind::CrossEntropy) {
    const double mean_label = (np * alpha + nn * beta) / (np + nn);
    if (!(mean_label > 0.01 && mean_label < 0.99)) {
      throw DomainError("equivalent_ctr_numeric: cross-entropy minimum is not interior");
    }
  }

  constexpr int kGrid = 10000;
  const auto grid_point = [](int k) { return static_cast<double>(k) / (kGrid + 1); };
  int best = 1;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kGrid; ++k) {
    const double l = aggregate_loss(grid_point(k), alpha, beta, np, nn, loss);
    if (l < best_loss) {
      best_loss = l;
      best = k;
    }
  }
  double lo = grid_point(std::max(best - 1, 1));
  double hi = grid_point(std::min(best + 1, kGrid));
  double d_lo = aggregate_derivative(lo, alpha, beta, np, nn, loss);
  const double d_hi = aggregate_derivative(hi, alpha, beta, np, nn, loss);
  if (d_lo > 0.0 || d_hi < 0.0) {
    throw DomainError("equivalent_ctr_numeric: minimum lies on the boundary of (0, 1)");
  }
  for (int step = 0; step < 60; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double d = aggregate_derivative(mid, alpha, beta, np, nn, loss);
    if (d < 0.0) {
      lo = mid;
      d_lo = d;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

CorrectedLabels scale_positive(double w_i, double w_g) { return {w_g / w_i, 0.0}; }
CorrectedLabels shift_negative(double w_i, double w_g) { return {1.0, (w_g - w_i) / (1.0 - w_i)}; }

}  // namespace

CorrectedLabels soft_correct(PolicyKind policy, double w_i, double w_g) {
  if (!(w_i >= 0.0 && w_i <= 1.0)) throw DomainError("soft_correct: local CTR outside [0, 1]");
  if (!(w_g > 0.0 && w_g < 1.0)) throw DomainError("soft_correct: global CTR outside (0, 1)");
  switch (policy) {
    case PolicyKind::None:
      return kIdentityLabels;
    case PolicyKind::ScalePositive:
      if (w_i == 0.0) throw DomainError("soft_correct: scale_positive undefined at local CTR 0");
      return scale_positive(w_i, w_g);
    case PolicyKind::ShiftNegative:
      if (w_i == 1.0) throw DomainError("soft_correct: shift_negative undefined at local CTR 1");
      return shift_negative(w_i, w_g);
    case PolicyKind::Soft1:
    case PolicyKind::Soft2: {
      if (w_i == 0.0) return shift_negative(w_i, w_g);
      if (w_i == 1.0) return scale_positive(w_i, w_g);
      const bool above = w_i > w_g;
      const bool scale = policy == PolicyKind::Soft1 ? above : !above;
      return scale ? scale_positive(w_i, w_g) : shift_negative(w_i, w_g);
    }
    case PolicyKind::Hard:
      break;
  }
  throw ContractError("soft_correct: hard correction needs a table");
}

CorrectedLabels hard_lookup(const CorrectionTable& table, double w_i) {
  if (!(w_i >= 0.0 && w_i <= 1.0)) throw DomainError("hard_lookup: local CTR outside [0, 1]");
  if (table.entries.empty()) throw ContractError("hard_lookup: empty table");
  for (const auto& e : table.entries) {
    if (w_i >= e.lo && w_i < e.hi) return e.labels;
  }
  return table.entries.back().labels;
}

CorrectedLabels corrected_labels(const CorrectionPolicy& policy, double w_i, double w_g) {
  if (policy.kind() == PolicyKind::Hard) return hard_lookup(policy.table(), w_i);
  return soft_correct(policy.kind(), w_i, w_g);
}

std::vector<Sample> apply_correction(const UserDataset& dataset, CorrectedLabels labels) {
  std::vector<Sample> out = dataset.samples();
  for (Sample& s : out) {
    if (s.label == 1.0) {
      s.label = labels.alpha;
    } else if (s.label == 0.0) {
      s.label = labels.beta;
    } else {
      throw DataError("apply_correction: raw label must be 0 or 1");
    }
  }
  return out;
}

std::vector<CtrGroup> group_by_local_ctr(std::span<const double> local_ctrs,
                                         std::span<const double> edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
    throw ContractError("group_by_local_ctr: edges must run from 0 to 1");
  }
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) {
      throw ContractError("group_by_local_ctr: edges must be strictly increasing");
    }
  }
  std::vector<CtrGroup> groups(edges.size() - 1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    groups[k].lo = edges[k];
    groups[k].hi = edges[k + 1];
  }
  for (std::size_t u = 0; u < local_ctrs.size(); ++u) {
    const Index k = bucket_index(edges, local_ctrs[u]);
    if (k < 0) throw DomainError("group_by_local_ctr: local CTR outside [0, 1]");
    groups[static_cast<std::size_t>(k)].members.push_back(u);
  }
  for (CtrGroup& g : groups) {
    double sum = 0.0;
    for (std::size_t u : g.members) sum += local_ctrs[u];
    g.mean_local_ctr = g.members.empty() ? 0.0 : sum / static_cast<double>(g.members.size());
  }
  return groups;
}

CorrectionTable build_hard_table(std::span<const CtrGroup> groups,
                                 std::span<const CorrectedLabels> grid, double w_g,
                                 const GroupEvaluator& evaluate, unsigned threads) {
  if (grid.empty()) throw ContractError("build_hard_table: empty grid");
  for (const auto& c : grid) {
    if (!(c.alpha > c.beta)) throw ContractError("build_hard_table: grid needs alpha > beta");
  }
  if (groups.empty()) throw ContractError("build_hard_table: no groups");

  CorrectionTable table;
  table.entries.resize(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    const CtrGroup& group = groups[g];
    CorrectionTable::Entry& entry = table.entries[g];
    entry.lo = group.lo;
    entry.hi = group.hi;
    entry.labels = kIdentityLabels;
    if (group.members.empty()) return;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_distance = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const CorrectedLabels& candidate : grid) {
      const double score = evaluate(group, candidate);
      if (std::isnan(score)) continue;
      const double distance = std::abs(
          equivalent_ctr_closed(candidate.alpha, candidate.beta, group.mean_local_ctr) - w_g);
      if (!found || score > best_score || (score == best_score && distance < best_distance)) {
        found = true;
        best_score = score;
        best_distance = distance;
        entry.labels = candidate;
      }
    }
  });
  table.validate();
  return table;
}

std::vector<CorrectedLabels> default_hard_grid() {
  std::vector<CorrectedLabels> grid;
  for (int a = 1; a <= 12; ++a) {
    for (double beta : {-0.5, -0.25, 0.0, 0.25}) {
      const double alpha = 0.25 * a;
      if (alpha > beta) grid.push_back({alpha, beta});
    }
  }
  return grid;
}

void write_table(std::ostream& out, const CorrectionTable& table) {
  table.validate();
  out << "# lo hi alpha beta\n";
  char buf[128];
  for (const auto& e : table.entries) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", e.lo, e.hi, e.labels.alpha,
                  e.labels.beta);
    out << buf;
  }
}

void write_table(const std::filesystem::path& path, const CorrectionTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_table(out, table);
}

CorrectionTable read_table(std::istream& in) {
  CorrectionTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string tok[4];
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!(fields >> tok[k])) throw ParseError("expected 4 values: lo hi alpha beta", line_no);
      char* end = nullptr;
      v[k] = std::strtod(tok[k].c_str(), &end);
      if (end != tok[k].c_str() + tok[k].size()) {
        throw ParseError("invalid number '" + tok[k] + "'", line_no);
      }
    }
    std::string extra;
    if (fields >> extra) throw ParseError("trailing field '" + extra + "'", line_no);
    table.entries.push_back({v[0], v[1], {v[2], v[3]}});
  }
  try {
    table.validate();
  } catch (const ContractError& e) {
    throw DataError(e.what());
  }
  return table;
}

CorrectionTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open correction table " + path.string());
  return read_table(in);
}

}  // namespace lcft
