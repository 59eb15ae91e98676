#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcft/correction.hpp"
#include "lcft/dataset.hpp"
#include "lcft/models.hpp"
#include "lcft/optim.hpp"

namespace lcft {

struct CloudResult {
  ModelParams model;
  std::vector<double> epoch_loss;  // mean training loss seen during each epoch
};

// Mini-batch training over the pooled samples of all users, shuffled every
// epoch. Deterministic given (config, loss, opt, init_seed, data).
CloudResult train_cloud(std::span<const UserDataset> datasets, const ModelConfig& config,
                        LossKind loss, const OptimizerConfig& opt, std::uint64_t init_seed);

// Trains an existing model in place on an explicit sample list (labels may be
// corrected). Returns the per-epoch mean loss.
std::vector<double> train_samples(ModelParams& model, std::span<const Sample> samples,
                                  LossKind loss, const OptimizerConfig& opt);

struct FinetuneOptions {
  LossKind loss = LossKind::CrossEntropy;
  bool embeddings_only = false;      // freeze every dense array
  std::vector<std::string> frozen;   // extra arrays kept at their global values
};

struct FinetuneResult {
  ModelParams model;
  TouchedSet touched;
  double final_loss = 0.0;  // mean loss over the user's (corrected) samples after training
  long steps = 0;
};

// Starts from the global model and trains on one user's samples only. The
// shuffle stream is derived from (opt.seed, user_id). Throws TrainingError on
// divergence.
FinetuneResult finetune_user(const ModelParams& global, std::span<const Sample> samples,
                             Index user_id, const OptimizerConfig& opt,
                             const FinetuneOptions& options);

// Outcome of one user in a fleet run; `result` is empty when fine-tuning
// failed, in which case `error` says why and evaluation falls back to the
// global model.
struct UserOutcome {
  Index user_id = 0;
  double local_ctr = 0.0;
  CorrectedLabels labels;
  std::optional<FinetuneResult> result;
  std::string error;
};

// Algorithm of label-correction fine-tuning: for every user, derive (alpha,
// beta) from the frozen local CTR, rewrite labels, fine-tune from `global`.
// `consume` is called once per user (from worker threads, in any order) with
// the user's index in `datasets`; it may move from the outcome.
void run_lcft_each(std::span<const UserDataset> datasets, const CorrectionPolicy& policy,
                   const ModelParams& global, double w_g, const OptimizerConfig& opt,
                   const FinetuneOptions& options, unsigned threads,
                   const std::function<void(std::size_t, UserOutcome&)>& consume);

// Collecting variant keyed by user id.
std::map<Index, UserOutcome> run_lcft(std::span<const UserDataset> datasets,
                                      const CorrectionPolicy& policy, const ModelParams& global,
                                      double w_g, const OptimizerConfig& opt,
                                      const FinetuneOptions& options, unsigned threads = 1);

// Per-user shuffle seed.
std::uint64_t user_seed(std::uint64_t base, Index user_id);

}  // namespace lcft
