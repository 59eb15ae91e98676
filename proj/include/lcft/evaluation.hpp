#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcft/dataset.hpp"
#include "lcft/models.hpp"

namespace lcft {

// Probability that a random positive outranks a random negative, ties counted
// as one half, via the rank-sum statistic. Empty when a class is absent.
// Labels must be exactly 0 or 1.
std::optional<double> auc(std::span<const double> predictions, std::span<const double> labels);

struct UserEval {
  Index user_id = 0;
  Index test_size = 0;  // m_i
  std::optional<double> auc;
  double local_ctr = 0.0;
  std::string policy;
  bool fallback = false;  // fine-tuning failed; global model used
};

// Predicts the user's test samples with `model` and scores them.
UserEval evaluate_user(const ModelParams& model, const UserDataset& test, double local_ctr,
                       std::string policy, bool fallback = false);

// sum(m_i * auc_i) / sum(m_i) over users with a defined AUC. Throws
// ReportError when no user has one.
double user_avg_auc(std::span<const UserEval> entries);
Index undefined_auc_count(std::span<const UserEval> entries);

// Which per-user quantity the drift buckets are keyed on.
enum class BucketAxis { LocalCtr, AbsDrift };

struct DriftBucket {
  double lo = 0.0;
  double hi = 0.0;
  double mean_improvement = 0.0;  // mean(auc_a - auc_b); NaN for an empty bucket
  Index count = 0;
};

// Mean per-user AUC difference a - b per bucket of local CTR (or of
// |local CTR - w_g|). Users without a defined AUC on both sides are skipped.
// Entries must list the same users in the same order.
std::vector<DriftBucket> drift_buckets(std::span<const UserEval> a, std::span<const UserEval> b,
                                       std::span<const double> edges, double w_g,
                                       BucketAxis axis = BucketAxis::LocalCtr);

struct WinTieLoss {
  Index wins = 0;
  Index ties = 0;
  Index losses = 0;
  Index total() const { return wins + ties + losses; }
};

inline constexpr double kTieTolerance = 1e-6;

WinTieLoss win_tie_loss(std::span<const UserEval> a, std::span<const UserEval> b,
                        double tolerance = kTieTolerance);

struct RankingCase {
  std::vector<Index> item_ids;
  std::vector<double> true_ctr;
  std::vector<double> predicted_ctr;
};

enum class RankBy { True, Predicted };

// Item ids by descending CTR, ties by ascending id. Throws InputError on
// duplicate ids or mismatched lengths.
std::vector<Index> ranking_order(const RankingCase& rc, RankBy by);

struct EvalReport {
  std::vector<UserEval> entries;
  double auc_avg = 0.0;
  Index excluded = 0;  // users without a defined AUC
  Index fallbacks = 0;
  std::vector<DriftBucket> buckets;  // vs. the baseline
  WinTieLoss versus_baseline;
  std::string baseline;
};

EvalReport make_report(std::vector<UserEval> entries, std::span<const UserEval> baseline,
                       std::string baseline_name, std::span<const double> edges, double w_g);

}  // namespace lcft
