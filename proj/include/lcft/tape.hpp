#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcft/loss.hpp"
#include "lcft/params.hpp"
#include "lcft/tensor.hpp"

namespace lcft {

enum class PoolKind { Mean, Sum };

// Single-use reverse-mode tape over a fixed ParameterSet.
//
// Forward ops are recorded in call order and each node caches what its
// backward rule needs. backward() walks the nodes in exact reverse order and
// may be called once; the referenced ParameterSet must outlive the tape and
// must not change while it is alive.
//
// Shapes: activations are (batch x features) row-major matrices. Embedding
// lookups produce one row per requested index; only those rows receive
// gradient, which is the sparse-update substrate of per-user fine-tuning.
class GradientTape {
 public:
  using NodeId = std::size_t;

  explicit GradientTape(const ParameterSet& params) : params_(&params) {}

  NodeId constant(Matrix value);
  NodeId parameter(std::string_view name);
  NodeId lookup(std::string_view table, std::vector<Index> rows);

  // x (n x k) * w (k x m)
  NodeId matmul(NodeId x, NodeId w);
  // x * w + b, with b a (1 x m) row broadcast over the batch
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId concat_cols(std::span<const NodeId> parts);

  // Pools consecutive row segments of `values`: segment k spans rows
  // [offsets[k], offsets[k+1]). An empty segment pools to the zero row.
  NodeId segment_pool(NodeId values, std::vector<Index> offsets, PoolKind kind);

  // Dot-product attention: segment k is weighted by softmax_j(<values_j, queries_k>).
  NodeId attention_pool(NodeId values, NodeId queries, std::vector<Index> offsets);

  const Matrix& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Smallest |input| seen by any ReLU; finite-difference checks are only
  // meaningful when this exceeds the probe step.
  double nonsmooth_margin() const;

  // Mean loss over the batch. `output` must be a sigmoid node of shape (n x 1)
  // and labels must hold n entries.
  Gradients backward(NodeId output, LossKind loss, std::span<const double> labels);

  // Propagates an explicit upstream gradient `seed` (same shape as output).
  Gradients backward_from(NodeId output, const Matrix& seed);

 private:
  enum class Op {
    Constant,
    Parameter,
    Lookup,
    MatMul,
    Affine,
    Add,
    Relu,
    Sigmoid,
    Concat,
    SegmentPool,
    AttentionPool,
  };

  struct Node {
    Op op = Op::Constant;
    Matrix value{};
    std::vector<NodeId> inputs{};
    std::string name{};            // parameter / table name
    const Matrix* ref = nullptr;   // parameter nodes alias the array
    std::vector<Index> indices{};  // lookup rows, pool offsets, concat widths
    PoolKind pool = PoolKind::Mean;
    Matrix cache{};                // attention weights
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  Gradients run_backward(NodeId output, std::vector<Matrix> grads, bool skip_output);

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace lcft
