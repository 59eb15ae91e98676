#include "lcft/training.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>

#include "lcft/parallel.hpp"

namespace lcft {

std::uint64_t user_seed(std::uint64_t base, Index user_id) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(user_id) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct EpochStats {
  double loss_sum = 0.0;
  std::size_t count = 0;
};

// One pass over `order` in mini-batches. Calls `on_batch(batch)` before the
// update so callers can track touched parameters.
template <typename OnBatch>
EpochStats run_epoch(ModelParams& model, std::span<const Sample> samples,
                     const std::vector<std::size_t>& order, LossKind loss,
                     const OptimizerConfig& opt, double lr, AdamState& adam, long& step,
                     const std::vector<std::string>& frozen, bool dense_frozen,
                     OnBatch&& on_batch) {
  EpochStats stats;
  std::vector<const Sample*> batch;
  std::vector<double> labels;
  for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
    const std::size_t end = std::min(order.size(), start + opt.batch_size);
    batch.clear();
    labels.clear();
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(&samples[order[k]]);
      labels.push_back(samples[order[k]].label);
    }
    on_batch(std::span<const Sample* const>(batch));
    double batch_loss = 0.0;
    Gradients grads;
    try {
      ForwardPass pass = forward(model, make_batch(std::span<const Sample* const>(batch)));
      const Matrix& p = pass.predictions();
      for (Index k = 0; k < p.rows(); ++k) {
        batch_loss += loss_value(loss, p(k, 0), labels[static_cast<std::size_t>(k)]);
      }
      if (!std::isfinite(batch_loss)) throw DomainError("non-finite loss");
      grads = pass.tape.backward(pass.output, loss, labels);
    } catch (const DomainError& e) {
      throw TrainingError(std::string("training diverged at step ") + std::to_string(step) + ": " +
                              e.what(),
                          step);
    }
    for (const auto& name : frozen) grads.erase(name);
    if (dense_frozen) {
      std::vector<std::string> dense_names;
      for (const auto& [name, entry] : grads.entries()) {
        if (!param_names::is_embedding(name)) dense_names.push_back(name);
      }
      for (const auto& name : dense_names) grads.erase(name);
    }
    optimizer_step(model.params, grads, adam, opt, lr);
    stats.loss_sum += batch_loss;
    stats.count += batch.size();
    ++step;
  }
  return stats;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = n; k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(order[k - 1], order[pick(rng)]);
  }
  return order;
}

double mean_loss(const ModelParams& model, std::span<const Sample> samples, LossKind loss) {
  const std::vector<double> p = predict(model, samples);
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += loss_value(loss, p[k], samples[k].label);
  return sum / static_cast<double>(samples.size());
}

}  // namespace

std::vector<double> train_samples(ModelParams& model, std::span<const Sample> samples,
                                  LossKind loss, const OptimizerConfig& opt) {
  opt.validate();
  if (samples.empty()) throw DataError("train: no samples");
  std::mt19937_64 rng(opt.seed);
  AdamState adam;
  long step = 0;
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto order = shuffled(samples.size(), rng);
    const EpochStats s = run_epoch(model, samples, order, loss, opt, opt.learning_rate_at(epoch),
                                   adam, step, {}, false, [](auto) {});
    epoch_loss.push_back(s.loss_sum / static_cast<double>(s.count));
  }
  return epoch_loss;
}

CloudResult train_cloud(std::span<const UserDataset> datasets, const ModelConfig& config,
                        LossKind loss, const OptimizerConfig& opt, std::uint64_t init_seed) {
  std::vector<Sample> pooled;
  for (const UserDataset& d : datasets) {
    pooled.insert(pooled.end(), d.samples().begin(), d.samples().end());
  }
  if (pooled.empty()) throw DataError("train_cloud: pooled dataset is empty");
  CloudResult out;
  out.model = init_model(config, init_seed);
  out.epoch_loss = train_samples(out.model, pooled, loss, opt);
  return out;
}

FinetuneResult finetune_user(const ModelParams& global, std::span<const Sample> samples,
                             Index user_id, const OptimizerConfig& opt,
                             const FinetuneOptions& options) {
  opt.validate();
  if (samples.empty()) throw DataError("finetune_user: empty dataset");
  FinetuneResult out;
  out.model = global;
  std::mt19937_64 rng(user_seed(opt.seed, user_id));
  AdamState adam;
  std::vector<std::string> frozen = options.frozen;
  std::sort(frozen.begin(), frozen.end());
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto order = shuffled(samples.size(), rng);
    run_epoch(out.model, samples, order, options.loss, opt, opt.learning_rate_at(epoch), adam,
              out.steps, frozen, options.embeddings_only,
              [&](std::span<const Sample* const> batch) {
                std::vector<Sample> copy;
                copy.reserve(batch.size());
                for (const Sample* s : batch) copy.push_back(*s);
                out.touched.merge(touched_rows(global.config, copy));
              });
  }
  // Frozen arrays are never updated, so they do not belong to the touched set.
  for (const auto& name : frozen) {
    out.touched.rows.erase(name);
    std::erase(out.touched.dense, name);
  }
  if (options.embeddings_only) out.touched.dense.clear();
  out.final_loss = mean_loss(out.model, samples, options.loss);
  if (!std::isfinite(out.final_loss) || !out.model.params.all_finite()) {
    throw TrainingError("fine-tuning diverged for user " + std::to_string(user_id), out.steps);
  }
  return out;
}

void run_lcft_each(std::span<const UserDataset> datasets, const CorrectionPolicy& policy,
                   const ModelParams& global, double w_g, const OptimizerConfig& opt,
                   const FinetuneOptions& options, unsigned threads,
                   const std::function<void(std::size_t, UserOutcome&)>& consume) {
  if (!(w_g > 0.0 && w_g < 1.0)) throw DomainError("run_lcft: global CTR must lie in (0, 1)");
  opt.validate();
  parallel_for(datasets.size(), threads, [&](std::size_t k) {
    const UserDataset& d = datasets[k];
    UserOutcome outcome;
    outcome.user_id = d.user_id();
    outcome.local_ctr = d.local_ctr();
    try {
      outcome.labels = corrected_labels(policy, outcome.local_ctr, w_g);
      const std::vector<Sample> corrected = apply_correction(d, outcome.labels);
      outcome.result = finetune_user(global, corrected, d.user_id(), opt, options);
    } catch (const Error& e) {
      outcome.result.reset();
      outcome.error = e.what();
    }
    consume(k, outcome);
  });
}

std::map<Index, UserOutcome> run_lcft(std::span<const UserDataset> datasets,
                                      const CorrectionPolicy& policy, const ModelParams& global,
                                      double w_g, const OptimizerConfig& opt,
                                      const FinetuneOptions& options, unsigned threads) {
  std::vector<UserOutcome> slots(datasets.size());
  run_lcft_each(datasets, policy, global, w_g, opt, options, threads,
                [&](std::size_t k, UserOutcome& o) { slots[k] = std::move(o); });
  std::map<Index, UserOutcome> out;
  for (auto& o : slots) out.emplace(o.user_id, std::move(o));
  return out;
}

}  // namespace lcft
