#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lcft/tensor.hpp"

namespace lcft {

// Named parameter arrays. Names are unique; iteration order is lexicographic,
// which fixes the order of every traversal (serialization, updates, hashing).
class ParameterSet {
 public:
  void add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);

  const std::map<std::string, Matrix, std::less<>>& arrays() const { return arrays_; }
  std::map<std::string, Matrix, std::less<>>& arrays() { return arrays_; }

  Index total_size() const;
  bool all_finite() const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::map<std::string, Matrix, std::less<>> arrays_;
};

// Gradient for an embedding table restricted to the rows a batch looked up.
// `rows` is strictly increasing and `values.row(k)` belongs to `rows[k]`.
struct SparseRows {
  std::vector<Index> rows;
  Matrix values;
};

// Per-parameter gradient: dense arrays get a full matrix, embedding tables get
// only the rows that were referenced.
class Gradients {
 public:
  using Entry = std::variant<Matrix, SparseRows>;

  void set_dense(std::string name, Matrix grad);
  void set_sparse(std::string name, SparseRows grad);

  void erase(std::string_view name);
  bool contains(std::string_view name) const;
  const Entry& at(std::string_view name) const;
  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }

  // Materializes the gradient with the parameter's full shape.
  Matrix dense(std::string_view name, Index rows, Index cols) const;

  bool all_finite() const;

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace lcft
