#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcft/models.hpp"
#include "lcft/params.hpp"
#include "lcft/tape.hpp"

namespace lcft::oracle {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
// Norm floor for the relative error so arrays whose true gradient is zero
// compare on an absolute scale.
inline constexpr double kFdNormFloor = 1e-6;

struct FdReport {
  double worst = 0.0;
  std::string where;
};

// Central differences of `objective` over every entry of every array,
// compared array-wise against `analytic`:
//   |g_fd - g_ad| / max(|g_fd|, |g_ad|, floor)
inline FdReport compare_with_fd(ParameterSet& params, const Gradients& analytic,
                                const std::function<double()>& objective,
                                double h = kFdStep) {
  FdReport report;
  for (auto& [name, array] : params.arrays()) {
    const Matrix g_ad = analytic.contains(name) ? analytic.dense(name, array.rows(), array.cols())
                                                : Matrix::Zero(array.rows(), array.cols());
    Matrix g_fd(array.rows(), array.cols());
    for (Index k = 0; k < array.size(); ++k) {
      double& x = array.data()[k];
      const double saved = x;
      x = saved + h;
      const double up = objective();
      x = saved - h;
      const double down = objective();
      x = saved;
      g_fd.data()[k] = (up - down) / (2.0 * h);
    }
    const double scale = std::max({g_fd.norm(), g_ad.norm(), kFdNormFloor});
    const double rel = (g_fd - g_ad).norm() / scale;
    if (report.where.empty() || rel > report.worst) {
      report.worst = rel;
      report.where = name;
    }
  }
  return report;
}

// Probability that a random positive outranks a random negative by explicit
// pair counting, ties worth one half.
inline std::optional<double> pairwise_auc(std::span<const double> preds,
                                          std::span<const double> labels) {
  double pos = 0.0;
  double neg = 0.0;
  for (double y : labels) (y == 1.0 ? pos : neg) += 1.0;
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  double twice_wins = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (labels[j] != 0.0) continue;
      if (preds[i] > preds[j]) {
        twice_wins += 2.0;
      } else if (preds[i] == preds[j]) {
        twice_wins += 1.0;
      }
    }
  }
  return twice_wins / 2.0 / (pos * neg);
}

// Replaces every parameter with N(0, scale) noise so gradients are not tiny.
inline void randomize(ParameterSet& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& [name, array] : params.arrays()) {
    for (Index k = 0; k < array.size(); ++k) array.data()[k] = normal(rng);
  }
}

struct ModelCase {
  ModelParams model;
  std::vector<Sample> batch;
  std::vector<double> labels;
};

// Small random model and batch. Histories include empty ones and repeats.
inline ModelCase random_model_case(ModelKind kind, std::uint64_t seed, bool generalized_labels) {
  std::mt19937_64 rng(seed);
  ModelCase c;
  ModelConfig config;
  config.kind = kind;
  config.vocab = Vocab{5, 12, 3};
  config.embed_dim = 4;
  config.hidden = {6, 5};
  c.model = init_model(config, seed);
  randomize(c.model.params, seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Index> user(0, 4), item(0, 11), cat(0, 2), hist_len(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 6;
  for (int k = 0; k < n; ++k) {
    Sample s;
    s.user_id = user(rng);
    s.item_id = item(rng);
    s.category_id = cat(rng);
    const Index len = hist_len(rng);
    for (Index j = 0; j < len; ++j) s.history.push_back(item(rng));
    s.label = unit(rng) < 0.5 ? 1.0 : 0.0;
    c.labels.push_back(generalized_labels ? -0.5 + 2.5 * unit(rng) : s.label);
    c.batch.push_back(std::move(s));
  }
  return c;
}

inline double mean_batch_loss(const ModelParams& model, const BatchInputs& batch,
                              std::span<const double> labels, LossKind loss) {
  const ForwardPass pass = forward(model, batch);
  const Matrix& p = pass.predictions();
  double sum = 0.0;
  for (Index k = 0; k < p.rows(); ++k) sum += loss_value(loss, p(k, 0), labels[k]);
  return sum / static_cast<double>(p.rows());
}

// Gradient check of one model case. Cases whose ReLU inputs sit near a kink
// are re-drawn (the seed advances), since central differences straddle it.
inline FdReport check_model_case(ModelKind kind, std::uint64_t seed, LossKind loss) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    ModelCase c = random_model_case(kind, seed * 1000 + attempt, attempt % 2 == 1 || seed % 2 == 1);
    const BatchInputs batch = make_batch(c.batch);
    ForwardPass pass = forward(c.model, batch);
    if (pass.tape.nonsmooth_margin() < 1e-3 && attempt < 50) continue;
    const Gradients analytic = pass.tape.backward(pass.output, loss, c.labels);
    return compare_with_fd(c.model.params, analytic,
                           [&] { return mean_batch_loss(c.model, batch, c.labels, loss); });
  }
}

}  // namespace lcft::oracle
