#include "lcft/params.hpp"

#include <utility>

namespace lcft {

void ParameterSet::add(std::string name, Matrix value) {
  if (arrays_.contains(name)) {
    throw ContractError("duplicate parameter name: " + name);
  }
  arrays_.emplace(std::move(name), std::move(value));
}

bool ParameterSet::contains(std::string_view name) const {
  return arrays_.find(name) != arrays_.end();
}

const Matrix& ParameterSet::at(std::string_view name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) {
    throw ContractError("unknown parameter: " + std::string(name));
  }
  return it->second;
}

Matrix& ParameterSet::at(std::string_view name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) {
    throw ContractError("unknown parameter: " + std::string(name));
  }
  return it->second;
}

Index ParameterSet::total_size() const {
  Index n = 0;
  for (const auto& [name, m] : arrays_) n += m.size();
  return n;
}

bool ParameterSet::all_finite() const {
  for (const auto& [name, m] : arrays_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

void Gradients::set_dense(std::string name, Matrix grad) {
  entries_.insert_or_assign(std::move(name), Entry(std::move(grad)));
}

void Gradients::set_sparse(std::string name, SparseRows grad) {
  entries_.insert_or_assign(std::move(name), Entry(std::move(grad)));
}

void Gradients::erase(std::string_view name) {
  auto it = entries_.find(name);
  if (it != entries_.end()) entries_.erase(it);
}

bool Gradients::contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const Gradients::Entry& Gradients::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ContractError("no gradient for parameter: " + std::string(name));
  }
  return it->second;
}

Matrix Gradients::dense(std::string_view name, Index rows, Index cols) const {
  Matrix out = Matrix::Zero(rows, cols);
  auto it = entries_.find(name);
  if (it == entries_.end()) return out;
  if (const auto* d = std::get_if<Matrix>(&it->second)) {
    if (d->rows() != rows || d->cols() != cols) {
      throw ContractError("gradient shape mismatch for " + std::string(name));
    }
    return *d;
  }
  const auto& sparse = std::get<SparseRows>(it->second);
  if (sparse.values.cols() != cols) {
    throw ContractError("gradient shape mismatch for " + std::string(name));
  }
  for (std::size_t k = 0; k < sparse.rows.size(); ++k) {
    if (sparse.rows[k] < 0 || sparse.rows[k] >= rows) {
      throw ContractError("sparse gradient row out of range for " + std::string(name));
    }
    out.row(sparse.rows[k]) = sparse.values.row(static_cast<Index>(k));
  }
  return out;
}

bool Gradients::all_finite() const {
  for (const auto& [name, entry] : entries_) {
    if (const auto* d = std::get_if<Matrix>(&entry)) {
      if (!d->allFinite()) return false;
    } else if (!std::get<SparseRows>(entry).values.allFinite()) {
      return false;
    }
  }
  return true;
}

}  // namespace lcft
