#include "lcft/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace lcft {

std::optional<double> auc(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) throw ContractError("auc: length mismatch");
  const std::size_t n = predictions.size();
  double n_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1.0) {
      n_pos += 1.0;
    } else if (labels[k] != 0.0) {
      throw DataError("auc: labels must be 0 or 1");
    }
    if (std::isnan(predictions[k])) throw DomainError("auc: NaN prediction");
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && predictions[order[end]] == predictions[order[start]]) ++end;
    const double mean_rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1.0) rank_sum += mean_rank;
    }
    start = end;
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

UserEval evaluate_user(const ModelParams& model, const UserDataset& test, double local_ctr,
                       std::string policy, bool fallback) {
  UserEval e;
  e.user_id = test.user_id();
  e.test_size = static_cast<Index>(test.size());
  e.local_ctr = local_ctr;
  e.policy = std::move(policy);
  e.fallback = fallback;
  if (test.empty()) return e;
  const std::vector<double> p = predict(model, test.samples());
  std::vector<double> labels;
  labels.reserve(test.size());
  for (const Sample& s : test.samples()) labels.push_back(s.label);
  e.auc = auc(p, labels);
  return e;
}

double user_avg_auc(std::span<const UserEval> entries) {
  double weighted = 0.0;
  double total = 0.0;
  for (const UserEval& e : entries) {
    if (!e.auc) continue;
    weighted += static_cast<double>(e.test_size) * *e.auc;
    total += static_cast<double>(e.test_size);
  }
  if (total == 0.0) throw ReportError("user_avg_auc: no user has a defined AUC");
  return weighted / total;
}

Index undefined_auc_count(std::span<const UserEval> entries) {
  return static_cast<Index>(
      std::count_if(entries.begin(), entries.end(), [](const UserEval& e) { return !e.auc; }));
}

namespace {

void check_aligned(std::span<const UserEval> a, std::span<const UserEval> b) {
  if (a.size() != b.size()) throw ContractError("comparison: user sets differ in size");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].user_id != b[k].user_id) throw ContractError("comparison: user sets differ");
  }
}

}  // namespace

std::vector<DriftBucket> drift_buckets(std::span<const UserEval> a, std::span<const UserEval> b,
                                       std::span<const double> edges, double w_g,
                                       BucketAxis axis) {
  check_aligned(a, b);
  if (edges.size() < 2) throw ContractError("drift_buckets: need at least two edges");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) throw ContractError("drift_buckets: edges must increase");
  }
  std::vector<DriftBucket> out(edges.size() - 1);
  std::vector<double> sums(out.size(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].lo = edges[k];
    out[k].hi = edges[k + 1];
  }
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (!a[u].auc || !b[u].auc) continue;
    const double key =
        axis == BucketAxis::LocalCtr ? a[u].local_ctr : std::abs(a[u].local_ctr - w_g);
    const Index k = bucket_index(edges, key);
    if (k < 0) continue;
    sums[static_cast<std::size_t>(k)] += *a[u].auc - *b[u].auc;
    ++out[static_cast<std::size_t>(k)].count;
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mean_improvement = out[k].count == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                : sums[k] / static_cast<double>(out[k].count);
  }
  return out;
}

WinTieLoss win_tie_loss(std::span<const UserEval> a, std::span<const UserEval> b,
                        double tolerance) {
  check_aligned(a, b);
  WinTieLoss w;
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (!a[u].auc || !b[u].auc) continue;
    const double diff = *a[u].auc - *b[u].auc;
    if (std::abs(diff) <= tolerance) {
      ++w.ties;
    } else if (diff > 0.0) {
      ++w.wins;
    } else {
      ++w.losses;
    }
  }
  return w;
}

std::vector<Index> ranking_order(const RankingCase& rc, RankBy by) {
  const std::size_t n = rc.item_ids.size();
  if (rc.true_ctr.size() != n || rc.predicted_ctr.size() != n) {
    throw InputError("ranking_order: lengths differ");
  }
  if (std::set<Index>(rc.item_ids.begin(), rc.item_ids.end()).size() != n) {
    throw InputError("ranking_order: duplicate item ids");
  }
  const auto& ctr = by == RankBy::True ? rc.true_ctr : rc.predicted_ctr;
  for (double v : ctr) {
    if (!std::isfinite(v)) throw InputError("ranking_order: non-finite CTR");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ctr[a] != ctr[b]) return ctr[a] > ctr[b];
    return rc.item_ids[a] < rc.item_ids[b];
  });
  std::vector<Index> out;
  out.reserve(n);
  for (std::size_t k : order) out.push_back(rc.item_ids[k]);
  return out;
}

EvalReport make_report(std::vector<UserEval> entries, std::span<const UserEval> baseline,
                       std::string baseline_name, std::span<const double> edges, double w_g) {
  EvalReport r;
  r.entries = std::move(entries);
  r.auc_avg = user_avg_auc(r.entries);
  r.excluded = undefined_auc_count(r.entries);
  r.fallbacks = static_cast<Index>(std::count_if(r.entries.begin(), r.entries.end(),
                                                 [](const UserEval& e) { return e.fallback; }));
  r.buckets = drift_buckets(r.entries, baseline, edges, w_g);
  r.versus_baseline = win_tie_loss(r.entries, baseline);
  r.baseline = std::move(baseline_name);
  return r;
}

}  // namespace lcft
