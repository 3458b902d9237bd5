#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixtrade/rng.hpp"
#include "mixtrade/tensor.hpp"

// Parameter storage plus the two network building blocks (GRU cell, fully
// connected layer), each in two forms: a taped form that records onto a
// Tape for gradient computation, and an inference form that performs the
// same kernel calls in the same order without recording, so both produce
// bit-identical values for the same parameters and inputs.
namespace mixtrade {

// Handle into a ParamStore; indexes are stable for the store's lifetime.
struct GruParams {
  int wz = -1, uz = -1, bz = -1;
  int wr = -1, ur = -1, br = -1;
  int wh = -1, uh = -1, bh = -1;
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
};

struct LinearParams {
  int w = -1, b = -1;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
};

class ParamStore {
 public:
  int add(const std::string& name, std::size_t rows, std::size_t cols,
          std::size_t fan_in);

  std::size_t count() const { return entries_.size(); }
  const std::string& name(int id) const { return entries_[id].name; }
  std::size_t rows(int id) const { return entries_[id].rows; }
  std::size_t cols(int id) const { return entries_[id].cols; }
  std::vector<double>& values(int id) { return entries_[id].w; }
  const std::vector<double>& values(int id) const { return entries_[id].w; }
  std::vector<double>& momentum(int id) { return entries_[id].m; }

  // Draws every entry, in insertion order, uniform in +-1/sqrt(fan_in).
  void init_uniform(Rng& rng);

  bool any_nonfinite() const;

  nlohmann::json to_json() const;
  // Loads values into an already-built store with matching names/shapes.
  void load_json(const nlohmann::json& j);

 private:
  struct Entry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t fan_in = 1;
    std::vector<double> w;
    std::vector<double> m;
  };
  std::vector<Entry> entries_;
};

GruParams make_gru(ParamStore& store, const std::string& prefix,
                   std::size_t in_dim, std::size_t hidden_dim);
LinearParams make_linear(ParamStore& store, const std::string& prefix,
                         std::size_t in_dim, std::size_t out_dim);

// Binds every store entry to a tape leaf (in store order). Gradients land
// on the leaves after backward(); sgd_step folds them back into the store.
class TapedParams {
 public:
  TapedParams(Tape& tape, const ParamStore& store);
  Tensor operator[](int id) const { return leaves_[id]; }

 private:
  std::vector<Tensor> leaves_;
};

// z = sigmoid(x Wz + h Uz + bz); r = sigmoid(x Wr + h Ur + br);
// cand = tanh(x Wh + (r o h) Uh + bh); h' = h + z o (cand - h).
Tensor gru_step(const TapedParams& p, const GruParams& g, Tensor h, Tensor x);
// x W + b (bias broadcast over rows).
Tensor linear(const TapedParams& p, const LinearParams& l, Tensor x);

// Scratch buffers for inference-mode evaluation; reusable across calls.
struct NnWork {
  std::vector<double> a, b, c, d;
};

// In-place hidden update: h (batch x hidden) advances one step on inputs
// x (batch x in_dim).
void gru_step_infer(const ParamStore& s, const GruParams& g, const double* x,
                    std::size_t batch, double* h, NnWork& w);
void linear_infer(const ParamStore& s, const LinearParams& l, const double* x,
                  std::size_t batch, double* out, NnWork& w);

// v = momentum * v + grad; w -= lr * v, reading grads from the tape leaves.
void sgd_step(ParamStore& store, const TapedParams& taped, double lr,
              double momentum);

}  // namespace mixtrade
