#include "mixtrade/nn.hpp"

#include <cmath>
#include <cstring>

#include "mixtrade/kernels.hpp"

namespace mixtrade {

int ParamStore::add(const std::string& name, std::size_t rows,
                    std::size_t cols, std::size_t fan_in) {
  Entry e;
  e.name = name;
  e.rows = rows;
  e.cols = cols;
  e.fan_in = fan_in;
  e.w.assign(rows * cols, 0.0);
  e.m.assign(rows * cols, 0.0);
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

void ParamStore::init_uniform(Rng& rng) {
  for (Entry& e : entries_) {
    const double s = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
    for (double& v : e.w) v = rng.uniform(-s, s);
    std::fill(e.m.begin(), e.m.end(), 0.0);
  }
}

bool ParamStore::any_nonfinite() const {
  for (const Entry& e : entries_)
    for (double v : e.w)
      if (!std::isfinite(v)) return true;
  return false;
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const Entry& e : entries_) {
    arr.push_back({{"name", e.name},
                   {"rows", e.rows},
                   {"cols", e.cols},
                   {"fan_in", e.fan_in},
                   {"data", e.w}});
  }
  return arr;
}

void ParamStore::load_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != entries_.size())
    throw DataError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const nlohmann::json& p = j[i];
    Entry& e = entries_[i];
    if (p.at("name").get<std::string>() != e.name ||
        p.at("rows").get<std::size_t>() != e.rows ||
        p.at("cols").get<std::size_t>() != e.cols)
      throw DataError("checkpoint: layout mismatch at parameter '" + e.name +
                      "'");
    const auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != e.w.size())
      throw DataError("checkpoint: data length mismatch at '" + e.name + "'");
    e.w = data;
    std::fill(e.m.begin(), e.m.end(), 0.0);
  }
}

GruParams make_gru(ParamStore& store, const std::string& prefix,
                   std::size_t in_dim, std::size_t hidden_dim) {
  GruParams g;
  g.in_dim = in_dim;
  g.hidden_dim = hidden_dim;
  g.wz = store.add(prefix + ".wz", in_dim, hidden_dim, in_dim);
  g.uz = store.add(prefix + ".uz", hidden_dim, hidden_dim, hidden_dim);
  g.bz = store.add(prefix + ".bz", 1, hidden_dim, hidden_dim);
  g.wr = store.add(prefix + ".wr", in_dim, hidden_dim, in_dim);
  g.ur = store.add(prefix + ".ur", hidden_dim, hidden_dim, hidden_dim);
  g.br = store.add(prefix + ".br", 1, hidden_dim, hidden_dim);
  g.wh = store.add(prefix + ".wh", in_dim, hidden_dim, in_dim);
  g.uh = store.add(prefix + ".uh", hidden_dim, hidden_dim, hidden_dim);
  g.bh = store.add(prefix + ".bh", 1, hidden_dim, hidden_dim);
  return g;
}

LinearParams make_linear(ParamStore& store, const std::string& prefix,
                         std::size_t in_dim, std::size_t out_dim) {
  LinearParams l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.w = store.add(prefix + ".w", in_dim, out_dim, in_dim);
  l.b = store.add(prefix + ".b", 1, out_dim, in_dim);
  return l;
}

TapedParams::TapedParams(Tape& tape, const ParamStore& store) {
  leaves_.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const int id = static_cast<int>(i);
    leaves_.push_back(
        tape.leaf(store.rows(id), store.cols(id), store.values(id).data()));
  }
}

Tensor gru_step(const TapedParams& p, const GruParams& g, Tensor h, Tensor x) {
  Tensor z = sigmoid(add_row(add(matmul(x, p[g.wz]), matmul(h, p[g.uz])),
                             p[g.bz]));
  Tensor r = sigmoid(add_row(add(matmul(x, p[g.wr]), matmul(h, p[g.ur])),
                             p[g.br]));
  Tensor cand = tanh(add_row(
      add(matmul(x, p[g.wh]), matmul(mul(r, h), p[g.uh])), p[g.bh]));
  return add(h, mul(z, sub(cand, h)));
}

Tensor linear(const TapedParams& p, const LinearParams& l, Tensor x) {
  return add_row(matmul(x, p[l.w]), p[l.b]);
}

namespace {

// out (batch x cols) = x (batch x rows(w)) * w, then + bias per row.
void affine_infer(const ParamStore& s, int w, int b, const double* x,
                  std::size_t batch, std::size_t in_dim, std::size_t out_dim,
                  double* out) {
  const kernels::Backend& k = kernels::active();
  std::memset(out, 0, batch * out_dim * sizeof(double));
  k.gemm_nn(x, s.values(w).data(), out, batch, out_dim, in_dim);
  const double* bias = s.values(b).data();
  for (std::size_t i = 0; i < batch; ++i)
    k.add(out + i * out_dim, bias, out + i * out_dim, out_dim);
}

// c = a * w into zeroed c.
void matmul_infer(const ParamStore& s, int w, const double* a,
                  std::size_t batch, std::size_t in_dim, std::size_t out_dim,
                  double* c) {
  std::memset(c, 0, batch * out_dim * sizeof(double));
  kernels::active().gemm_nn(a, s.values(w).data(), c, batch, out_dim, in_dim);
}

}  // namespace

void gru_step_infer(const ParamStore& s, const GruParams& g, const double* x,
                    std::size_t batch, double* h, NnWork& w) {
  const kernels::Backend& k = kernels::active();
  const std::size_t hd = g.hidden_dim;
  const std::size_t n = batch * hd;
  w.a.resize(n);
  w.b.resize(n);
  w.c.resize(n);
  w.d.resize(n);
  double* t1 = w.a.data();
  double* t2 = w.b.data();
  double* zg = w.c.data();
  double* cand = w.d.data();

  // Mirrors the taped gru_step op-for-op so values match bit for bit:
  // each gate is (x W + h U) + bias, evaluated in that order.
  matmul_infer(s, g.wz, x, batch, g.in_dim, hd, t1);
  matmul_infer(s, g.uz, h, batch, hd, hd, t2);
  k.add(t1, t2, zg, n);
  const double* bz = s.values(g.bz).data();
  for (std::size_t i = 0; i < batch; ++i)
    k.add(zg + i * hd, bz, zg + i * hd, hd);
  kernels::vsigmoid(zg, zg, n);

  matmul_infer(s, g.wr, x, batch, g.in_dim, hd, t1);
  matmul_infer(s, g.ur, h, batch, hd, hd, t2);
  k.add(t1, t2, t1, n);
  const double* br = s.values(g.br).data();
  for (std::size_t i = 0; i < batch; ++i)
    k.add(t1 + i * hd, br, t1 + i * hd, hd);
  kernels::vsigmoid(t1, t1, n);  // t1 = reset gate

  matmul_infer(s, g.wh, x, batch, g.in_dim, hd, cand);
  k.mul(t1, h, t2, n);  // r o h
  matmul_infer(s, g.uh, t2, batch, hd, hd, t1);
  k.add(cand, t1, cand, n);
  const double* bh = s.values(g.bh).data();
  for (std::size_t i = 0; i < batch; ++i)
    k.add(cand + i * hd, bh, cand + i * hd, hd);
  kernels::vtanh(cand, cand, n);

  // h' = h + z o (cand - h)
  k.sub(cand, h, t2, n);
  k.mul(zg, t2, t2, n);
  k.add(h, t2, h, n);
}

void linear_infer(const ParamStore& s, const LinearParams& l, const double* x,
                  std::size_t batch, double* out, NnWork&) {
  affine_infer(s, l.w, l.b, x, batch, l.in_dim, l.out_dim, out);
}

void sgd_step(ParamStore& store, const TapedParams& taped, double lr,
              double momentum) {
  for (std::size_t i = 0; i < store.count(); ++i) {
    const int id = static_cast<int>(i);
    const double* g = taped[id].grad();
    std::vector<double>& w = store.values(id);
    std::vector<double>& m = store.momentum(id);
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = momentum * m[j] + g[j];
      w[j] -= lr * m[j];
    }
  }
}

}  // namespace mixtrade
