#include "lcft/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

namespace lcft {

namespace {

void accumulate(Matrix& slot, const Matrix& delta) {
  if (slot.size() == 0) {
    slot = delta;
  } else {
    slot += delta;
  }
}

void check_output(const Matrix& m, const char* op) {
  if (!m.allFinite()) {
    throw DomainError(std::string(op) + ": produced a non-finite value");
  }
}

void check_offsets(const std::vector<Index>& offsets, Index rows, const char* op) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw ContractError(std::string(op) + ": offsets must start at 0 and end at the row count");
  }
  for (std::size_t k = 1; k < offsets.size(); ++k) {
    if (offsets[k] < offsets[k - 1]) {
      throw ContractError(std::string(op) + ": offsets must be non-decreasing");
    }
  }
}

}  // namespace

GradientTape::NodeId GradientTape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const GradientTape::Node& GradientTape::node(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("tape: unknown node id");
  return nodes_[id];
}

const Matrix& GradientTape::value(NodeId id) const {
  const Node& n = node(id);
  return n.ref != nullptr ? *n.ref : n.value;
}

GradientTape::NodeId GradientTape::constant(Matrix value) {
  check_output(value, "constant");
  Node n{.op = Op::Constant, .value = std::move(value)};
  return push(std::move(n));
}

GradientTape::NodeId GradientTape::parameter(std::string_view name) {
  Node n{.op = Op::Parameter};
  n.name = std::string(name);
  n.ref = &params_->at(name);
  return push(std::move(n));
}

GradientTape::NodeId GradientTape::lookup(std::string_view table, std::vector<Index> rows) {
  const Matrix& t = params_->at(table);
  Matrix out(static_cast<Index>(rows.size()), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= t.rows()) {
      throw InputError("lookup: index " + std::to_string(rows[k]) + " out of range for " +
                       std::string(table) + " (" + std::to_string(t.rows()) + " rows)");
    }
    out.row(static_cast<Index>(k)) = t.row(rows[k]);
  }
  Node n{.op = Op::Lookup, .value = std::move(out)};
  n.name = std::string(table);
  n.indices = std::move(rows);
  return push(std::move(n));
}

GradientTape::NodeId GradientTape::matmul(NodeId x, NodeId w) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  if (xv.cols() != wv.rows()) throw ContractError("matmul: inner dimensions differ");
  Matrix out = xv * wv;
  check_output(out, "matmul");
  return push(Node{.op = Op::MatMul, .value = std::move(out), .inputs = {x, w}});
}

GradientTape::NodeId GradientTape::affine(NodeId x, NodeId w, NodeId b) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  const Matrix& bv = value(b);
  if (xv.cols() != wv.rows()) throw ContractError("affine: inner dimensions differ");
  if (bv.rows() != 1 || bv.cols() != wv.cols()) throw ContractError("affine: bias shape");
  Matrix out = xv * wv;
  out.rowwise() += bv.row(0);
  check_output(out, "affine");
  return push(Node{.op = Op::Affine, .value = std::move(out), .inputs = {x, w, b}});
}

GradientTape::NodeId GradientTape::add(NodeId a, NodeId b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw ContractError("add: shape mismatch");
  Matrix out = av + bv;
  check_output(out, "add");
  return push(Node{.op = Op::Add, .value = std::move(out), .inputs = {a, b}});
}

GradientTape::NodeId GradientTape::relu(NodeId x) {
  Matrix out = value(x).cwiseMax(0.0);
  return push(Node{.op = Op::Relu, .value = std::move(out), .inputs = {x}});
}

GradientTape::NodeId GradientTape::sigmoid(NodeId x) {
  const Matrix& xv = value(x);
  Matrix out = xv.unaryExpr([](double z) {
    // Split by sign so exp never overflows.
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
  check_output(out, "sigmoid");
  return push(Node{.op = Op::Sigmoid, .value = std::move(out), .inputs = {x}});
}

GradientTape::NodeId GradientTape::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const Index rows = value(parts[0]).rows();
  Index cols = 0;
  std::vector<Index> widths;
  for (NodeId p : parts) {
    if (value(p).rows() != rows) throw ContractError("concat_cols: row counts differ");
    widths.push_back(value(p).cols());
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (NodeId p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  Node n{.op = Op::Concat, .value = std::move(out)};
  n.inputs.assign(parts.begin(), parts.end());
  n.indices = std::move(widths);
  return push(std::move(n));
}

GradientTape::NodeId GradientTape::segment_pool(NodeId values, std::vector<Index> offsets,
                                                PoolKind kind) {
  const Matrix& v = value(values);
  check_offsets(offsets, v.rows(), "segment_pool");
  const Index segments = static_cast<Index>(offsets.size()) - 1;
  Matrix out = Matrix::Zero(segments, v.cols());
  for (Index k = 0; k < segments; ++k) {
    const Index begin = offsets[k];
    const Index len = offsets[k + 1] - begin;
    if (len == 0) continue;
    for (Index j = begin; j < begin + len; ++j) out.row(k) += v.row(j);
    if (kind == PoolKind::Mean) out.row(k) /= static_cast<double>(len);
  }
  Node n{.op = Op::SegmentPool, .value = std::move(out), .inputs = {values}};
  n.indices = std::move(offsets);
  n.pool = kind;
  return push(std::move(n));
}

GradientTape::NodeId GradientTape::attention_pool(NodeId values, NodeId queries,
                                                  std::vector<Index> offsets) {
  const Matrix& v = value(values);
  const Matrix& q = value(queries);
  check_offsets(offsets, v.rows(), "attention_pool");
  const Index segments = static_cast<Index>(offsets.size()) - 1;
  if (q.rows() != segments || q.cols() != v.cols()) {
    throw ContractError("attention_pool: query shape must be (segments x dim)");
  }
  Matrix out = Matrix::Zero(segments, v.cols());
  Matrix weights(v.rows(), 1);
  for (Index k = 0; k < segments; ++k) {
    const Index begin = offsets[k];
    const Index len = offsets[k + 1] - begin;
    if (len == 0) continue;
    auto scores = weights.middleRows(begin, len);
    scores = v.middleRows(begin, len) * q.row(k).transpose();
    const double top = scores.maxCoeff();
    scores = (scores.array() - top).exp().matrix();
    scores /= scores.sum();
    for (Index j = 0; j < len; ++j) out.row(k) += scores(j, 0) * v.row(begin + j);
  }
  check_output(out, "attention_pool");
  Node n{.op = Op::AttentionPool, .value = std::move(out), .inputs = {values, queries}};
  n.indices = std::move(offsets);
  n.cache = std::move(weights);
  return push(std::move(n));
}

double GradientTape::nonsmooth_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op != Op::Relu) continue;
    const Matrix& in = value(n.inputs[0]);
    if (in.size() > 0) margin = std::min(margin, in.cwiseAbs().minCoeff());
  }
  return margin;
}

Gradients GradientTape::backward(NodeId output, LossKind loss, std::span<const double> labels) {
  const Node& out = node(output);
  if (out.op != Op::Sigmoid) throw ContractError("backward: output must be a sigmoid node");
  if (out.value.cols() != 1 || out.value.rows() != static_cast<Index>(labels.size())) {
    throw ContractError("backward: labels not aligned with predictions");
  }
  const Index n = out.value.rows();
  Matrix dlogit(n, 1);
  for (Index k = 0; k < n; ++k) {
    if (!std::isfinite(labels[static_cast<std::size_t>(k)])) {
      throw DomainError("backward: non-finite label");
    }
    dlogit(k, 0) = loss_grad_logit(loss, out.value(k, 0), labels[static_cast<std::size_t>(k)]) /
                   static_cast<double>(n);
  }
  std::vector<Matrix> grads(nodes_.size());
  grads[out.inputs[0]] = std::move(dlogit);
  return run_backward(output, std::move(grads), true);
}

Gradients GradientTape::backward_from(NodeId output, const Matrix& seed) {
  const Matrix& v = value(output);
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) {
    throw ContractError("backward_from: seed shape mismatch");
  }
  std::vector<Matrix> grads(nodes_.size());
  grads[output] = seed;
  return run_backward(output, std::move(grads), false);
}

Gradients GradientTape::run_backward(NodeId output, std::vector<Matrix> grads, bool skip_output) {
  if (consumed_) throw ContractError("backward: tape already consumed; run a new forward");
  consumed_ = true;

  std::map<std::string, Matrix, std::less<>> dense;
  // (row, contribution order, source node, source row) per embedding table.
  struct RowContribution {
    Index row;
    std::size_t order;
    NodeId node;
    Index source_row;
  };
  std::map<std::string, std::vector<RowContribution>, std::less<>> sparse;
  std::size_t order = 0;

  const NodeId start = skip_output ? output : output + 1;
  for (NodeId id = start; id-- > 0;) {
    Node& n = nodes_[id];
    Matrix& g = grads[id];
    if (g.size() == 0) continue;
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Parameter:
        accumulate(dense[n.name], g);
        break;
      case Op::Lookup: {
        auto& list = sparse[n.name];
        for (std::size_t k = 0; k < n.indices.size(); ++k) {
          list.push_back({n.indices[k], order++, id, static_cast<Index>(k)});
        }
        break;
      }
      case Op::MatMul: {
        const Matrix& x = value(n.inputs[0]);
        const Matrix& w = value(n.inputs[1]);
        accumulate(grads[n.inputs[0]], g * w.transpose());
        accumulate(grads[n.inputs[1]], x.transpose() * g);
        break;
      }
      case Op::Affine: {
        const Matrix& x = value(n.inputs[0]);
        const Matrix& w = value(n.inputs[1]);
        accumulate(grads[n.inputs[0]], g * w.transpose());
        accumulate(grads[n.inputs[1]], x.transpose() * g);
        Matrix db = Matrix::Zero(1, g.cols());
        for (Index r = 0; r < g.rows(); ++r) db.row(0) += g.row(r);
        accumulate(grads[n.inputs[2]], db);
        break;
      }
      case Op::Add:
        accumulate(grads[n.inputs[0]], g);
        accumulate(grads[n.inputs[1]], g);
        break;
      case Op::Relu: {
        const Matrix& x = value(n.inputs[0]);
        accumulate(grads[n.inputs[0]], (x.array() > 0.0).select(g, 0.0));
        break;
      }
      case Op::Sigmoid: {
        const Matrix& y = n.value;
        accumulate(grads[n.inputs[0]], g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
        break;
      }
      case Op::Concat: {
        Index at = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const Index width = n.indices[p];
          accumulate(grads[n.inputs[p]], g.middleCols(at, width));
          at += width;
        }
        break;
      }
      case Op::SegmentPool: {
        const Matrix& v = value(n.inputs[0]);
        Matrix dv = Matrix::Zero(v.rows(), v.cols());
        for (std::size_t k = 0; k + 1 < n.indices.size(); ++k) {
          const Index begin = n.indices[k];
          const Index len = n.indices[k + 1] - begin;
          if (len == 0) continue;
          const double scale = n.pool == PoolKind::Mean ? 1.0 / static_cast<double>(len) : 1.0;
          for (Index j = begin; j < begin + len; ++j) {
            dv.row(j) = scale * g.row(static_cast<Index>(k));
          }
        }
        accumulate(grads[n.inputs[0]], dv);
        break;
      }
      case Op::AttentionPool: {
        const Matrix& v = value(n.inputs[0]);
        const Matrix& q = value(n.inputs[1]);
        Matrix dv = Matrix::Zero(v.rows(), v.cols());
        Matrix dq = Matrix::Zero(q.rows(), q.cols());
        for (std::size_t k = 0; k + 1 < n.indices.size(); ++k) {
          const Index begin = n.indices[k];
          const Index len = n.indices[k + 1] - begin;
          if (len == 0) continue;
          const Index seg = static_cast<Index>(k);
          const auto gk = g.row(seg);
          const double g_dot_out = gk.dot(n.value.row(seg));
          for (Index j = begin; j < begin + len; ++j) {
            const double a = n.cache(j, 0);
            const double dscore = a * (gk.dot(v.row(j)) - g_dot_out);
            dv.row(j) = a * gk + dscore * q.row(seg);
            dq.row(seg) += dscore * v.row(j);
          }
        }
        accumulate(grads[n.inputs[0]], dv);
        accumulate(grads[n.inputs[1]], dq);
        break;
      }
    }
  }

  Gradients result;
  for (auto& [name, g] : dense) {
    const Matrix& p = params_->at(name);
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ContractError("backward: gradient shape mismatch for " + name);
    }
    result.set_dense(name, std::move(g));
  }
  for (auto& [name, list] : sparse) {
    std::stable_sort(list.begin(), list.end(), [](const RowContribution& a, const RowContribution& b) {
      return a.row != b.row ? a.row < b.row : a.order < b.order;
    });
    SparseRows rows;
    const Index dim = params_->at(name).cols();
    for (const auto& c : list) {
      if (rows.rows.empty() || rows.rows.back() != c.row) rows.rows.push_back(c.row);
    }
    rows.values = Matrix::Zero(static_cast<Index>(rows.rows.size()), dim);
    Index slot = -1;
    Index last_row = -1;
    for (const auto& c : list) {
      if (c.row != last_row) {
        ++slot;
        last_row = c.row;
      }
      rows.values.row(slot) += grads[c.node].row(c.source_row);
    }
    result.set_sparse(name, std::move(rows));
  }
  if (!result.all_finite()) throw DomainError("backward: non-finite gradient");
  return result;
}

}  // namespace lcft
