#include "lcft/optim.hpp"

#include <cmath>
#include <variant>

namespace lcft {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer: " + std::string(name));
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer: learning rate must be > 0");
  }
  if (!(lr_decay > 0.0)) throw ConfigError("optimizer: lr_decay must be > 0");
  if (batch_size < 1) throw ConfigError("optimizer: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("optimizer: epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("optimizer: invalid Adam constants");
  }
}

double OptimizerConfig::learning_rate_at(int epoch) const {
  if (kind != OptimizerKind::SGD) return learning_rate;
  return learning_rate * std::pow(lr_decay, epoch);
}

namespace {

void check_shape(const Matrix& p, const Matrix& g, const std::string& name) {
  if (p.rows() != g.rows() || p.cols() != g.cols()) {
    throw ContractError("optimizer: gradient shape mismatch for " + name);
  }
}

void check_sparse(const Matrix& p, const SparseRows& g, const std::string& name) {
  if (g.values.cols() != p.cols() || g.values.rows() != static_cast<Index>(g.rows.size())) {
    throw ContractError("optimizer: sparse gradient shape mismatch for " + name);
  }
  for (Index r : g.rows) {
    if (r < 0 || r >= p.rows()) throw ContractError("optimizer: gradient row out of range in " + name);
  }
}

}  // namespace

void sgd_step(ParameterSet& params, const Gradients& grads, double lr) {
  for (const auto& [name, entry] : grads.entries()) {
    Matrix& p = params.at(name);
    if (const auto* g = std::get_if<Matrix>(&entry)) {
      check_shape(p, *g, name);
      p -= lr * *g;
    } else {
      const auto& s = std::get<SparseRows>(entry);
      check_sparse(p, s, name);
      for (std::size_t k = 0; k < s.rows.size(); ++k) {
        p.row(s.rows[k]) -= lr * s.values.row(static_cast<Index>(k));
      }
    }
  }
}

AdamState::Moments& AdamState::dense(const std::string& name, Index rows, Index cols) {
  auto [it, inserted] = dense_.try_emplace(name);
  if (inserted) {
    it->second.m = Matrix::Zero(rows, cols);
    it->second.v = Matrix::Zero(rows, cols);
  }
  return it->second;
}

AdamState::Moments& AdamState::row(const std::string& table, Index row, Index cols) {
  auto& rows = rows_[table];
  auto [it, inserted] = rows.try_emplace(row);
  if (inserted) {
    it->second.m = Matrix::Zero(1, cols);
    it->second.v = Matrix::Zero(1, cols);
  }
  return it->second;
}

std::size_t AdamState::allocated_rows(std::string_view table) const {
  auto it = rows_.find(table);
  return it == rows_.end() ? 0 : it->second.size();
}

namespace {

template <typename Param, typename Grad>
void adam_update(Param&& p, const Grad& g, AdamState::Moments& s, const OptimizerConfig& opt,
                 double lr) {
  ++s.steps;
  s.m = opt.beta1 * s.m + (1.0 - opt.beta1) * g;
  s.v = opt.beta2 * s.v + (1.0 - opt.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(s.steps));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(s.steps));
  p.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + opt.epsilon);
}

}  // namespace

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const OptimizerConfig& opt, double lr) {
  for (const auto& [name, entry] : grads.entries()) {
    Matrix& p = params.at(name);
    if (const auto* g = std::get_if<Matrix>(&entry)) {
      check_shape(p, *g, name);
      adam_update(p, *g, state.dense(name, p.rows(), p.cols()), opt, lr);
    } else {
      const auto& s = std::get<SparseRows>(entry);
      check_sparse(p, s, name);
      for (std::size_t k = 0; k < s.rows.size(); ++k) {
        const Index r = s.rows[k];
        adam_update(p.row(r), s.values.row(static_cast<Index>(k)), state.row(name, r, p.cols()),
                    opt, lr);
      }
    }
  }
}

void optimizer_step(ParameterSet& params, const Gradients& grads, AdamState& adam,
                    const OptimizerConfig& opt, double lr) {
  if (opt.kind == OptimizerKind::SGD) {
    sgd_step(params, grads, lr);
  } else {
    adam_step(params, grads, adam, opt, lr);
  }
}

}  // namespace lcft
