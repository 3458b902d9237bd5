#include "mixtrade/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mixtrade/kernels.hpp"

namespace mixtrade {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_valid(const Tensor& t, const char* op) {
  if (!t.valid()) throw ShapeError(std::string(op) + ": invalid tensor");
}

void require_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  require_valid(a, op);
  require_valid(b, op);
  if (a.tape != b.tape)
    throw StateError(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
}

}  // namespace

std::size_t Tensor::rows() const { return tape->node(id).rows; }
std::size_t Tensor::cols() const { return tape->node(id).cols; }
const double* Tensor::data() const { return tape->val(id); }
double* Tensor::data() { return tape->val(id); }
const double* Tensor::grad() const {
  return const_cast<Tape*>(tape)->grd(id);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data()[i * cols() + j];
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value: tensor is not 1x1");
  return data()[0];
}

std::vector<double> Tensor::to_vector() const {
  return std::vector<double>(data(), data() + size());
}

void Tape::reset() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  iaux_.clear();
}

std::int32_t Tape::push(Op op, std::size_t rows, std::size_t cols,
                        std::int32_t a, std::int32_t b, double c0, double c1) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.rows = static_cast<std::uint32_t>(rows);
  n.cols = static_cast<std::uint32_t>(cols);
  n.off = values_.size();
  n.c0 = c0;
  n.c1 = c1;
  values_.resize(values_.size() + rows * cols, 0.0);
  nodes_.push_back(n);
  return static_cast<std::int32_t>(nodes_.size()) - 1;
}

Tensor Tape::leaf(std::size_t rows, std::size_t cols) {
  return Tensor{this, push(Op::kLeaf, rows, cols)};
}

Tensor Tape::leaf(std::size_t rows, std::size_t cols, const double* src) {
  Tensor t = leaf(rows, cols);
  std::memcpy(t.data(), src, rows * cols * sizeof(double));
  return t;
}

Tensor Tape::leaf(std::size_t rows, std::size_t cols,
                  const std::vector<double>& src) {
  if (src.size() != rows * cols)
    throw ShapeError("leaf: data length does not match shape");
  return leaf(rows, cols, src.data());
}

Tensor Tape::scalar(double v) { return leaf(1, 1, &v); }

Tensor add(Tensor a, Tensor b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kAdd, a.rows(), a.cols(), a.id, b.id)};
  kernels::active().add(t.val(a.id), t.val(b.id), t.val(out.id), out.size());
  return out;
}

Tensor sub(Tensor a, Tensor b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kSub, a.rows(), a.cols(), a.id, b.id)};
  kernels::active().sub(t.val(a.id), t.val(b.id), t.val(out.id), out.size());
  return out;
}

Tensor mul(Tensor a, Tensor b) {
  require_same_shape(a, b, "mul");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kMul, a.rows(), a.cols(), a.id, b.id)};
  kernels::active().mul(t.val(a.id), t.val(b.id), t.val(out.id), out.size());
  return out;
}

Tensor minimum(Tensor a, Tensor b) {
  require_same_shape(a, b, "minimum");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kMin, a.rows(), a.cols(), a.id, b.id)};
  const double* pa = t.val(a.id);
  const double* pb = t.val(b.id);
  double* po = t.val(out.id);
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = std::min(pa[i], pb[i]);
  return out;
}

Tensor scale(Tensor a, double c) {
  require_valid(a, "scale");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kScale, a.rows(), a.cols(), a.id, -1, c)};
  kernels::active().scale(t.val(a.id), c, t.val(out.id), out.size());
  return out;
}

Tensor add_const(Tensor a, double c) {
  require_valid(a, "add_const");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kAddConst, a.rows(), a.cols(), a.id, -1, c)};
  const double* pa = t.val(a.id);
  double* po = t.val(out.id);
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + c;
  return out;
}

Tensor add_row(Tensor a, Tensor row) {
  require_same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: row must be 1x" + std::to_string(a.cols()) +
                     ", got " + shape_str(row));
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kAddRow, a.rows(), a.cols(), a.id, row.id)};
  const double* pa = t.val(a.id);
  const double* pr = t.val(row.id);
  double* po = t.val(out.id);
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    kernels::active().add(pa + i * n, pr, po + i * n, n);
  return out;
}

Tensor mul_colvec(Tensor a, Tensor col) {
  require_same_tape(a, col, "mul_colvec");
  if (col.cols() != 1 || col.rows() != a.rows())
    throw ShapeError("mul_colvec: col must be " + std::to_string(a.rows()) +
                     "x1, got " + shape_str(col));
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kMulColvec, a.rows(), a.cols(), a.id, col.id)};
  const double* pa = t.val(a.id);
  const double* pc = t.val(col.id);
  double* po = t.val(out.id);
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    kernels::active().scale(pa + i * n, pc[i], po + i * n, n);
  return out;
}

Tensor matmul(Tensor a, Tensor b) {
  require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a) +
                     " * " + shape_str(b));
  Tape& t = *a.tape;
  const std::size_t m = a.rows(), p = a.cols(), n = b.cols();
  Tensor out{&t, t.push(Op::kMatmul, m, n, a.id, b.id)};
  kernels::active().gemm_nn(t.val(a.id), t.val(b.id), t.val(out.id), m, n, p);
  return out;
}

Tensor tanh(Tensor a) {
  require_valid(a, "tanh");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kTanh, a.rows(), a.cols(), a.id)};
  kernels::vtanh(t.val(a.id), t.val(out.id), out.size());
  return out;
}

Tensor sigmoid(Tensor a) {
  require_valid(a, "sigmoid");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kSigmoid, a.rows(), a.cols(), a.id)};
  kernels::vsigmoid(t.val(a.id), t.val(out.id), out.size());
  return out;
}

Tensor relu(Tensor a) {
  require_valid(a, "relu");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kRelu, a.rows(), a.cols(), a.id)};
  kernels::vrelu(t.val(a.id), t.val(out.id), out.size());
  return out;
}

Tensor exp(Tensor a) {
  require_valid(a, "exp");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kExp, a.rows(), a.cols(), a.id)};
  kernels::vexp(t.val(a.id), t.val(out.id), out.size());
  return out;
}

Tensor log(Tensor a) {
  require_valid(a, "log");
  Tape& t = *a.tape;
  const double* pa = t.val(a.id);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(pa[i] > 0.0))
      throw NumericError("log: nonpositive input " + std::to_string(pa[i]));
  Tensor out{&t, t.push(Op::kLog, a.rows(), a.cols(), a.id)};
  kernels::vlog(t.val(a.id), t.val(out.id), out.size());
  return out;
}

Tensor clamp(Tensor a, double lo, double hi) {
  require_valid(a, "clamp");
  if (!(lo <= hi)) throw ShapeError("clamp: lo > hi");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kClamp, a.rows(), a.cols(), a.id, -1, lo, hi)};
  const double* pa = t.val(a.id);
  double* po = t.val(out.id);
  for (std::size_t i = 0; i < out.size(); ++i)
    po[i] = std::min(std::max(pa[i], lo), hi);
  return out;
}

Tensor softmax_rows(Tensor a) {
  require_valid(a, "softmax_rows");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kSoftmaxRows, a.rows(), a.cols(), a.id)};
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    kernels::softmax_row(t.val(a.id) + i * n, t.val(out.id) + i * n, n);
  return out;
}

Tensor log_softmax_rows(Tensor a) {
  require_valid(a, "log_softmax_rows");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kLogSoftmaxRows, a.rows(), a.cols(), a.id)};
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    kernels::log_softmax_row(t.val(a.id) + i * n, t.val(out.id) + i * n, n);
  return out;
}

Tensor gather_cols(Tensor a, const std::vector<std::int32_t>& idx) {
  require_valid(a, "gather_cols");
  if (idx.size() != a.rows())
    throw ShapeError("gather_cols: need one index per row");
  for (std::int32_t j : idx)
    if (j < 0 || static_cast<std::size_t>(j) >= a.cols())
      throw ShapeError("gather_cols: index out of range");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kGatherCols, a.rows(), 1, a.id)};
  t.nodes_[out.id].iaux = t.iaux_.size();
  t.iaux_.insert(t.iaux_.end(), idx.begin(), idx.end());
  const double* pa = t.val(a.id);
  double* po = t.val(out.id);
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) po[i] = pa[i * n + idx[i]];
  return out;
}

Tensor slice_cols(Tensor a, std::size_t c0, std::size_t len) {
  require_valid(a, "slice_cols");
  if (c0 + len > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kSliceCols, a.rows(), len, a.id, -1,
                        static_cast<double>(c0))};
  const double* pa = t.val(a.id);
  double* po = t.val(out.id);
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::memcpy(po + i * len, pa + i * a.cols() + c0, len * sizeof(double));
  return out;
}

Tensor concat_cols(Tensor a, Tensor b) {
  require_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a) +
                     " vs " + shape_str(b));
  Tape& t = *a.tape;
  const std::size_t na = a.cols(), nb = b.cols();
  Tensor out{&t, t.push(Op::kConcatCols, a.rows(), na + nb, a.id, b.id)};
  const double* pa = t.val(a.id);
  const double* pb = t.val(b.id);
  double* po = t.val(out.id);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::memcpy(po + i * (na + nb), pa + i * na, na * sizeof(double));
    std::memcpy(po + i * (na + nb) + na, pb + i * nb, nb * sizeof(double));
  }
  return out;
}

Tensor sum_all(Tensor a) {
  require_valid(a, "sum_all");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kSumAll, 1, 1, a.id)};
  t.val(out.id)[0] = kernels::active().sum(t.val(a.id), a.size());
  return out;
}

Tensor mean_all(Tensor a) {
  require_valid(a, "mean_all");
  Tape& t = *a.tape;
  Tensor out{&t, t.push(Op::kMeanAll, 1, 1, a.id)};
  t.val(out.id)[0] = kernels::active().sum(t.val(a.id), a.size()) /
                     static_cast<double>(a.size());
  return out;
}

void Tape::backward(Tensor loss) {
  if (!loss.valid() || loss.tape != this)
    throw StateError("backward: loss not on this tape");
  if (loss.size() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(loss));

  grads_.assign(values_.size(), 0.0);
  grads_[nodes_[loss.id].off] = 1.0;
  const kernels::Backend& k = kernels::active();

  for (std::int32_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (n.op == Op::kLeaf) continue;
    const double* g = grads_.data() + n.off;
    const double* y = values_.data() + n.off;
    const std::size_t sz = static_cast<std::size_t>(n.rows) * n.cols;
    const Node& na = nodes_[n.a];
    double* ga = grads_.data() + na.off;
    const double* va = values_.data() + na.off;

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        k.axpy(1.0, g, ga, sz);
        k.axpy(1.0, g, grads_.data() + nodes_[n.b].off, sz);
        break;
      }
      case Op::kSub: {
        k.axpy(1.0, g, ga, sz);
        k.axpy(-1.0, g, grads_.data() + nodes_[n.b].off, sz);
        break;
      }
      case Op::kMul: {
        double* gb = grads_.data() + nodes_[n.b].off;
        const double* vb = values_.data() + nodes_[n.b].off;
        for (std::size_t i = 0; i < sz; ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kMin: {
        double* gb = grads_.data() + nodes_[n.b].off;
        const double* vb = values_.data() + nodes_[n.b].off;
        for (std::size_t i = 0; i < sz; ++i) {
          if (va[i] <= vb[i])
            ga[i] += g[i];
          else
            gb[i] += g[i];
        }
        break;
      }
      case Op::kScale: {
        k.axpy(n.c0, g, ga, sz);
        break;
      }
      case Op::kAddConst: {
        k.axpy(1.0, g, ga, sz);
        break;
      }
      case Op::kAddRow: {
        k.axpy(1.0, g, ga, sz);
        double* gr = grads_.data() + nodes_[n.b].off;
        for (std::size_t i = 0; i < n.rows; ++i)
          k.axpy(1.0, g + i * n.cols, gr, n.cols);
        break;
      }
      case Op::kMulColvec: {
        double* gc = grads_.data() + nodes_[n.b].off;
        const double* vc = values_.data() + nodes_[n.b].off;
        for (std::size_t i = 0; i < n.rows; ++i) {
          k.axpy(vc[i], g + i * n.cols, ga + i * n.cols, n.cols);
          gc[i] += k.dot(g + i * n.cols, va + i * n.cols, n.cols);
        }
        break;
      }
      case Op::kMatmul: {
        const Node& nb = nodes_[n.b];
        double* gb = grads_.data() + nb.off;
        const double* vb = values_.data() + nb.off;
        const std::size_t m = n.rows, nn = n.cols, p = na.cols;
        // dA += dC * B^T ; dB += A^T * dC
        k.gemm_nt(g, vb, ga, m, p, nn);
        k.gemm_tn(va, g, gb, p, nn, m);
        break;
      }
      case Op::kTanh: {
        for (std::size_t i = 0; i < sz; ++i)
          ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kSigmoid: {
        for (std::size_t i = 0; i < sz; ++i)
          ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kRelu: {
        for (std::size_t i = 0; i < sz; ++i)
          if (va[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kExp: {
        for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * y[i];
        break;
      }
      case Op::kLog: {
        for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] / va[i];
        break;
      }
      case Op::kClamp: {
        for (std::size_t i = 0; i < sz; ++i)
          if (va[i] >= n.c0 && va[i] <= n.c1) ga[i] += g[i];
        break;
      }
      case Op::kSoftmaxRows: {
        for (std::size_t i = 0; i < n.rows; ++i) {
          const double* yr = y + i * n.cols;
          const double* gr = g + i * n.cols;
          const double s = k.dot(gr, yr, n.cols);
          double* gar = ga + i * n.cols;
          for (std::size_t j = 0; j < n.cols; ++j)
            gar[j] += yr[j] * (gr[j] - s);
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        for (std::size_t i = 0; i < n.rows; ++i) {
          const double* yr = y + i * n.cols;
          const double* gr = g + i * n.cols;
          const double s = k.sum(gr, n.cols);
          double* gar = ga + i * n.cols;
          for (std::size_t j = 0; j < n.cols; ++j)
            gar[j] += gr[j] - std::exp(yr[j]) * s;
        }
        break;
      }
      case Op::kGatherCols: {
        const std::int32_t* idx = iaux_.data() + n.iaux;
        for (std::size_t i = 0; i < n.rows; ++i)
          ga[i * na.cols + idx[i]] += g[i];
        break;
      }
      case Op::kSliceCols: {
        const std::size_t c0 = static_cast<std::size_t>(n.c0);
        for (std::size_t i = 0; i < n.rows; ++i)
          k.axpy(1.0, g + i * n.cols, ga + i * na.cols + c0, n.cols);
        break;
      }
      case Op::kConcatCols: {
        const Node& nb = nodes_[n.b];
        double* gb = grads_.data() + nb.off;
        for (std::size_t i = 0; i < n.rows; ++i) {
          k.axpy(1.0, g + i * n.cols, ga + i * na.cols, na.cols);
          k.axpy(1.0, g + i * n.cols + na.cols, gb + i * nb.cols, nb.cols);
        }
        break;
      }
      case Op::kSumAll: {
        const double gv = g[0];
        for (std::size_t i = 0; i < na.rows * na.cols; ++i) ga[i] += gv;
        break;
      }
      case Op::kMeanAll: {
        const double gv = g[0] / static_cast<double>(na.rows * na.cols);
        for (std::size_t i = 0; i < na.rows * na.cols; ++i) ga[i] += gv;
        break;
      }
    }
  }
}

}  // namespace mixtrade
