#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "lcft/tensor.hpp"

namespace lcft {

inline constexpr std::size_t kDefaultMaxHistory = 50;
inline constexpr int kTsvSchemaVersion = 1;

// One impression.
struct Sample {
  Index user_id = 0;
  Index item_id = 0;
  Index category_id = 0;
  std::vector<Index> history;  // oldest first
  double label = 0.0;          // raw labels are 0 or 1; corrected labels any real
  std::int64_t timestamp = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// A user's local samples with positive/negative counts taken on the raw labels
// when the dataset is built. Label correction rewrites labels but never these
// statistics.
class UserDataset {
 public:
  UserDataset() = default;
  // Throws DataError if any label is not exactly 0 or 1, or a sample belongs to
  // another user.
  UserDataset(Index user_id, std::vector<Sample> samples);

  Index user_id() const { return user_id_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  Index n_pos() const { return n_pos_; }
  Index n_neg() const { return n_neg_; }
  // n_pos / (n_pos + n_neg); 0 for an empty dataset.
  double local_ctr() const;

  friend bool operator==(const UserDataset&, const UserDataset&) = default;

 private:
  Index user_id_ = 0;
  std::vector<Sample> samples_;
  Index n_pos_ = 0;
  Index n_neg_ = 0;
};

struct GlobalStats {
  Index num_users = 0;
  Index n_pos = 0;
  Index n_total = 0;
  double global_ctr = 0.0;
};

// Vocabulary sizes (max id + 1) per feature field.
struct Vocab {
  Index num_users = 0;
  Index num_items = 0;
  Index num_categories = 0;

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct TrainTestSplit {
  std::vector<UserDataset> train;
  std::vector<UserDataset> test;  // same users, same order as train
};

// Reads `user \t item \t category \t h1|h2|... \t label \t timestamp` lines
// ('-' for an empty history). Returns one dataset per user in ascending id.
std::vector<UserDataset> load_tsv(const std::filesystem::path& path,
                                  int schema_version = kTsvSchemaVersion);
std::vector<UserDataset> parse_tsv(std::istream& in, int schema_version = kTsvSchemaVersion);

void write_tsv(const std::filesystem::path& path, std::span<const UserDataset> datasets);
void write_tsv(std::ostream& out, std::span<const UserDataset> datasets);

// timestamp <= cutoff goes to train, the rest to test. Users missing either
// side are dropped.
TrainTestSplit split_by_timestamp(std::span<const UserDataset> datasets, std::int64_t cutoff);

// Drops users whose training side has fewer than `min_train_samples` samples.
TrainTestSplit filter_min_train(TrainTestSplit split, std::size_t min_train_samples);

// Throws DataError on an empty pool or a pool with a single label class.
GlobalStats global_stats(std::span<const UserDataset> datasets);

Vocab vocab_of(std::span<const UserDataset> datasets);

// Counts of users per local-CTR bucket; `edges` strictly increasing, covering
// [0, 1]; the last bucket is closed at 1.
std::vector<Index> local_ctr_histogram(std::span<const UserDataset> datasets,
                                       std::span<const double> edges);

// Index of the half-open bucket [edges[k], edges[k+1]) holding x, with the last
// bucket closed. Returns -1 when x lies outside [edges.front(), edges.back()].
Index bucket_index(std::span<const double> edges, double x);

}  // namespace lcft
