#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>

#include "lcft/params.hpp"

namespace lcft {

enum class OptimizerKind { SGD, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SGD;
  double learning_rate = 0.01;
  double lr_decay = 1.0;  // SGD: learning rate multiplied by this after every epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  int epochs = 1;
  std::uint64_t seed = 0;  // shuffling

  // Throws ConfigError unless lr > 0, batch_size >= 1 and epochs >= 1.
  void validate() const;
  double learning_rate_at(int epoch) const;
};

// p <- p - lr * g, applied only where the gradient exists (embedding rows in
// a sparse gradient, whole arrays otherwise).
void sgd_step(ParameterSet& params, const Gradients& grads, double lr);

// Bias-corrected Adam moments, allocated lazily: a dense array gets its moments
// on its first gradient, an embedding row on the first batch that touches it.
// Each slot counts its own steps, so a row first touched late still gets the
// t = 1 bias correction. Rows absent from a sparse gradient are not updated.
class AdamState {
 public:
  struct Moments {
    Matrix m;
    Matrix v;
    long steps = 0;
  };

  Moments& dense(const std::string& name, Index rows, Index cols);
  Moments& row(const std::string& table, Index row, Index cols);
  std::size_t allocated_rows(std::string_view table) const;

 private:
  std::map<std::string, Moments, std::less<>> dense_;
  std::map<std::string, std::unordered_map<Index, Moments>, std::less<>> rows_;
};

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const OptimizerConfig& opt, double lr);

// Dispatches on opt.kind; `adam` is ignored for SGD.
void optimizer_step(ParameterSet& params, const Gradients& grads, AdamState& adam,
                    const OptimizerConfig& opt, double lr);

}  // namespace lcft
