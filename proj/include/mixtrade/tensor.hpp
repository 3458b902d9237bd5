#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mixtrade/errors.hpp"

// Reverse-mode automatic differentiation over dense row-major 2-D arrays.
//
// A Tape is an arena: every operation appends one node whose value block
// lives in a single growable buffer, so building a graph is a bump
// allocation plus the forward arithmetic. backward() walks the nodes in
// reverse id order (construction order is already topological) and
// accumulates gradients into a parallel buffer.
//
// Shapes are rows x cols; scalars are 1x1. Inputs always have smaller ids
// than outputs, and a node's inputs must live on the same tape.
namespace mixtrade {

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kMin,
  kScale,       // a * c0
  kAddConst,    // a + c0
  kAddRow,      // [m x n] + broadcast [1 x n]
  kMulColvec,   // [m x n] * broadcast [m x 1]
  kMatmul,
  kTanh,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kClamp,  // clamp(a, c0, c1)
  kSoftmaxRows,
  kLogSoftmaxRows,
  kGatherCols,  // out[i] = a[i, idx[i]]
  kSliceCols,   // out[i, j] = a[i, c0 + j]
  kConcatCols,
  kSumAll,
  kMeanAll,
};

class Tape;

struct Tensor {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }

  const double* data() const;
  double* data();
  // Gradient block; only meaningful after backward() over a graph that
  // reaches this node.
  const double* grad() const;

  double at(std::size_t i, std::size_t j) const;
  // Value of a 1x1 tensor.
  double value() const;
  std::vector<double> to_vector() const;
};

class Tape {
 public:
  Tape() = default;

  // Drops all nodes but keeps buffer capacity for reuse.
  void reset();
  std::size_t node_count() const { return nodes_.size(); }

  Tensor leaf(std::size_t rows, std::size_t cols);
  Tensor leaf(std::size_t rows, std::size_t cols, const double* src);
  Tensor leaf(std::size_t rows, std::size_t cols,
              const std::vector<double>& src);
  Tensor scalar(double v);

  // Runs reverse accumulation from a 1x1 loss node. Non-scalar loss is a
  // contract violation.
  void backward(Tensor loss);

 private:
  friend struct Tensor;
  friend Tensor add(Tensor, Tensor);
  friend Tensor sub(Tensor, Tensor);
  friend Tensor mul(Tensor, Tensor);
  friend Tensor minimum(Tensor, Tensor);
  friend Tensor scale(Tensor, double);
  friend Tensor add_const(Tensor, double);
  friend Tensor add_row(Tensor, Tensor);
  friend Tensor mul_colvec(Tensor, Tensor);
  friend Tensor matmul(Tensor, Tensor);
  friend Tensor tanh(Tensor);
  friend Tensor sigmoid(Tensor);
  friend Tensor relu(Tensor);
  friend Tensor exp(Tensor);
  friend Tensor log(Tensor);
  friend Tensor clamp(Tensor, double, double);
  friend Tensor softmax_rows(Tensor);
  friend Tensor log_softmax_rows(Tensor);
  friend Tensor gather_cols(Tensor, const std::vector<std::int32_t>&);
  friend Tensor slice_cols(Tensor, std::size_t, std::size_t);
  friend Tensor concat_cols(Tensor, Tensor);
  friend Tensor sum_all(Tensor);
  friend Tensor mean_all(Tensor);

  struct Node {
    Op op = Op::kLeaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::size_t off = 0;   // into values_ / grads_
    std::size_t iaux = 0;  // into iaux_ (gather indices)
    double c0 = 0.0;
    double c1 = 0.0;
  };

  std::int32_t push(Op op, std::size_t rows, std::size_t cols,
                    std::int32_t a = -1, std::int32_t b = -1, double c0 = 0.0,
                    double c1 = 0.0);
  const Node& node(std::int32_t id) const { return nodes_[id]; }
  double* val(std::int32_t id) { return values_.data() + nodes_[id].off; }
  const double* val(std::int32_t id) const {
    return values_.data() + nodes_[id].off;
  }
  double* grd(std::int32_t id) { return grads_.data() + nodes_[id].off; }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<std::int32_t> iaux_;
};

Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor minimum(Tensor a, Tensor b);
Tensor scale(Tensor a, double c);
Tensor add_const(Tensor a, double c);
// [m x n] + row [1 x n], broadcast over rows.
Tensor add_row(Tensor a, Tensor row);
// [m x n] * col [m x 1], broadcast over columns.
Tensor mul_colvec(Tensor a, Tensor col);
Tensor matmul(Tensor a, Tensor b);
Tensor tanh(Tensor a);
Tensor sigmoid(Tensor a);
Tensor relu(Tensor a);
Tensor exp(Tensor a);
Tensor log(Tensor a);
Tensor clamp(Tensor a, double lo, double hi);
Tensor softmax_rows(Tensor a);
Tensor log_softmax_rows(Tensor a);
// out[i, 0] = a[i, idx[i]]; idx[i] in [0, cols).
Tensor gather_cols(Tensor a, const std::vector<std::int32_t>& idx);
Tensor slice_cols(Tensor a, std::size_t c0, std::size_t len);
Tensor concat_cols(Tensor a, Tensor b);
Tensor sum_all(Tensor a);
Tensor mean_all(Tensor a);

}  // namespace mixtrade
