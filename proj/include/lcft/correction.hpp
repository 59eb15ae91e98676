#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcft/dataset.hpp"
#include "lcft/loss.hpp"

namespace lcft {

// Labels substituted for raw positives (alpha) and negatives (beta).
struct CorrectedLabels {
  double alpha = 1.0;
  double beta = 0.0;

  friend bool operator==(const CorrectedLabels&, const CorrectedLabels&) = default;
};

inline constexpr CorrectedLabels kIdentityLabels{1.0, 0.0};

// Interval table consulted by hard correction. Entries are sorted, contiguous
// and partition [0, 1]: [lo, hi) each, the last one closed at 1.
struct CorrectionTable {
  struct Entry {
    double lo = 0.0;
    double hi = 1.0;
    CorrectedLabels labels;

    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries;

  // Throws ContractError unless the entries partition [0, 1] with alpha > beta.
  void validate() const;
  friend bool operator==(const CorrectionTable&, const CorrectionTable&) = default;
};

enum class PolicyKind { None, ScalePositive, ShiftNegative, Soft1, Soft2, Hard };

class CorrectionPolicy {
 public:
  CorrectionPolicy() = default;
  explicit CorrectionPolicy(PolicyKind kind);
  static CorrectionPolicy hard(CorrectionTable table);

  PolicyKind kind() const { return kind_; }
  const CorrectionTable& table() const;
  std::string_view name() const;

 private:
  PolicyKind kind_ = PolicyKind::None;
  std::shared_ptr<const CorrectionTable> table_;
};

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

// w * alpha + (1 - w) * beta: the constant prediction minimizing the user's
// aggregate loss, for both squared error and cross-entropy.
double equivalent_ctr_closed(double alpha, double beta, double w);

// The same quantity found by direct 1-D minimization of the aggregate loss
// over y in (0, 1): a 10^4-point grid scan, then 60 bisection steps on the
// derivative inside the bracket around the best grid point. Throws DomainError
// if the minimum is not interior (for cross-entropy the closed-form value must
// lie in (0.01, 0.99)).
double equivalent_ctr_numeric(double alpha, double beta, Index n_pos, Index n_neg, LossKind loss);

// Labels for a non-hard policy so that w_i * alpha + (1 - w_i) * beta = w_g.
//   ScalePositive  (w_g / w_i, 0)
//   ShiftNegative  (1, (w_g - w_i) / (1 - w_i))
//   Soft1          ScalePositive if w_i > w_g else ShiftNegative
//   Soft2          ShiftNegative if w_i > w_g else ScalePositive
// Soft1/Soft2 route w_i = 0 to ShiftNegative and w_i = 1 to ScalePositive; an
// explicit ScalePositive at w_i = 0 or ShiftNegative at w_i = 1 is a DomainError.
CorrectedLabels soft_correct(PolicyKind policy, double w_i, double w_g);

CorrectedLabels hard_lookup(const CorrectionTable& table, double w_i);

// Dispatches on the policy kind (hard policies consult their table).
CorrectedLabels corrected_labels(const CorrectionPolicy& policy, double w_i, double w_g);

// Raw 1 -> alpha, raw 0 -> beta; everything else unchanged.
std::vector<Sample> apply_correction(const UserDataset& dataset, CorrectedLabels labels);

// Users grouped by local-CTR interval for the hard-table search.
struct CtrGroup {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> members;  // indices into the caller's user list
  double mean_local_ctr = 0.0;       // 0 when empty
};

// `edges` strictly increasing from 0 to 1; the last interval is closed.
std::vector<CtrGroup> group_by_local_ctr(std::span<const double> local_ctrs,
                                         std::span<const double> edges);

// Returns held-out user-level average AUC after fine-tuning the group's users
// with the candidate labels; NaN when undefined.
using GroupEvaluator = std::function<double(const CtrGroup&, CorrectedLabels)>;

// Grid search per group for the labels with the best evaluator score. Ties go
// to the smaller |mean_w * alpha + (1 - mean_w) * beta - w_g|, then to the
// earlier grid entry. Empty groups (or groups with no defined score) get the
// identity labels. Groups are evaluated on up to `threads` workers.
CorrectionTable build_hard_table(std::span<const CtrGroup> groups,
                                 std::span<const CorrectedLabels> grid, double w_g,
                                 const GroupEvaluator& evaluate, unsigned threads = 1);

// Alpha in {0.25, 0.5, ..., 3.0} x beta in {-0.5, -0.25, 0, 0.25}, alpha > beta.
std::vector<CorrectedLabels> default_hard_grid();

// Text form: one `lo hi alpha beta` row per entry, '#' starts a comment.
// Values are written with 17 significant digits and read back bit-exact.
void write_table(std::ostream& out, const CorrectionTable& table);
void write_table(const std::filesystem::path& path, const CorrectionTable& table);
CorrectionTable read_table(std::istream& in);
CorrectionTable read_table(const std::filesystem::path& path);

}  // namespace lcft
