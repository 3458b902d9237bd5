#include <cmath>
#include <vector>

#include <doctest.h>

#include "mixtrade/nn.hpp"
#include "mixtrade/rng.hpp"
#include "mixtrade/tensor.hpp"
#include "support/grad_suites.hpp"

using namespace mixtrade;

namespace {

struct GruFixture {
  ParamStore store;
  GruParams gru;
  GruFixture(size_t in_dim, size_t hid, uint64_t seed = 0, bool init = false)
      : gru(make_gru(store, "g", in_dim, hid)) {
    if (init) {
      Rng r(Rng::derive(seed, rng_role::kInit));
      store.init_uniform(r);
    }
  }
};

}  // namespace

TEST_CASE("gru with zero parameters halves the hidden state") {
  GruFixture f(3, 4);
  Tape t;
  TapedParams p(t, f.store);
  Tensor h = t.leaf(1, 4, std::vector<double>{0.8, -0.2, 0.4, 1.0});
  Tensor x = t.leaf(1, 3, std::vector<double>{5.0, -3.0, 2.0});
  Tensor h1 = gru_step(p, f.gru, h, x);
  for (size_t j = 0; j < 4; ++j)
    CHECK(h1.at(0, j) == doctest::Approx(0.5 * h.at(0, j)).epsilon(1e-15));
}

TEST_CASE("gru with zero parameters and zero inputs stays zero") {
  GruFixture f(3, 4);
  Tape t;
  TapedParams p(t, f.store);
  Tensor h1 = gru_step(p, f.gru, t.leaf(1, 4), t.leaf(1, 3));
  for (size_t j = 0; j < 4; ++j) CHECK(h1.at(0, j) == 0.0);
}

TEST_CASE("gru hidden entries stay inside (-1, 1) from a bounded start") {
  GruFixture f(5, 6, 42, true);
  Rng r(7);
  Tape t;
  TapedParams p(t, f.store);
  std::vector<double> h0(6);
  for (auto& v : h0) v = r.uniform(-0.99, 0.99);
  Tensor h = t.leaf(1, 6, h0);
  for (int s = 0; s < 50; ++s) {
    std::vector<double> x(5);
    for (auto& v : x) v = r.uniform(-3.0, 3.0);
    h = gru_step(p, f.gru, h, t.leaf(1, 5, x));
    for (size_t j = 0; j < 6; ++j) {
      CHECK(h.at(0, j) > -1.0);
      CHECK(h.at(0, j) < 1.0);
    }
  }
}

TEST_CASE("gru BPTT gradients match finite differences") {
  for (uint64_t seed : {3ULL, 11ULL}) {
    INFO("seed = ", seed);
    CHECK(support::gru_bptt_fd_err(seed, 5) < 1e-4);
  }
}

TEST_CASE("inference-mode gru matches the taped forward bit for bit") {
  const size_t in_dim = 7, hid = 5, batch = 3, steps = 6;
  GruFixture f(in_dim, hid, 123, true);
  Rng r(55);

  std::vector<std::vector<double>> xs(steps);
  for (auto& x : xs) {
    x.resize(batch * in_dim);
    for (auto& v : x) v = r.uniform(-2.0, 2.0);
  }

  Tape t;
  TapedParams p(t, f.store);
  Tensor h = t.leaf(batch, hid);
  for (size_t s = 0; s < steps; ++s)
    h = gru_step(p, f.gru, h, t.leaf(batch, in_dim, xs[s]));

  std::vector<double> hi(batch * hid, 0.0);
  NnWork work;
  for (size_t s = 0; s < steps; ++s)
    gru_step_infer(f.store, f.gru, xs[s].data(), batch, hi.data(), work);

  for (size_t i = 0; i < batch * hid; ++i) CHECK(hi[i] == h.data()[i]);
}

TEST_CASE("inference-mode linear matches the taped forward bit for bit") {
  ParamStore store;
  LinearParams lin = make_linear(store, "l", 4, 3);
  Rng r(Rng::derive(9, rng_role::kInit));
  store.init_uniform(r);

  std::vector<double> x(2 * 4);
  for (auto& v : x) v = r.uniform(-1.0, 1.0);

  Tape t;
  TapedParams p(t, store);
  Tensor y = linear(p, lin, t.leaf(2, 4, x));

  std::vector<double> yi(2 * 3);
  NnWork work;
  linear_infer(store, lin, x.data(), 2, yi.data(), work);
  for (size_t i = 0; i < yi.size(); ++i) CHECK(yi[i] == y.data()[i]);
}

TEST_CASE("init_uniform is deterministic and scale-bounded") {
  ParamStore a, b;
  make_gru(a, "g", 9, 16);
  make_gru(b, "g", 9, 16);
  Rng r1(Rng::derive(77, rng_role::kInit));
  Rng r2(Rng::derive(77, rng_role::kInit));
  a.init_uniform(r1);
  b.init_uniform(r2);
  for (size_t i = 0; i < a.count(); ++i) {
    const int id = static_cast<int>(i);
    CHECK(a.values(id) == b.values(id));
    const double bound = 1.0 / 3.0;  // fan_in >= 9 everywhere here
    for (double v : a.values(id)) CHECK(std::fabs(v) <= bound);
  }
}

TEST_CASE("sgd with zero learning rate leaves parameters untouched") {
  ParamStore store;
  LinearParams lin = make_linear(store, "l", 3, 2);
  Rng r(Rng::derive(5, rng_role::kInit));
  store.init_uniform(r);
  const std::vector<double> before_w = store.values(lin.w);
  const std::vector<double> before_b = store.values(lin.b);

  Tape t;
  TapedParams p(t, store);
  Tensor x = t.leaf(1, 3, std::vector<double>{1.0, 2.0, 3.0});
  t.backward(sum_all(linear(p, lin, x)));
  sgd_step(store, p, 0.0, 0.9);

  CHECK(store.values(lin.w) == before_w);
  CHECK(store.values(lin.b) == before_b);
}

TEST_CASE("sgd descends a simple quadratic") {
  // loss = (w x - 4)^2 with x = 2: minimum at w = 2.
  ParamStore store;
  const int w = store.add("w", 1, 1, 1);
  store.values(w)[0] = 0.0;
  for (int i = 0; i < 200; ++i) {
    Tape t;
    TapedParams p(t, store);
    Tensor x = t.leaf(1, 1, std::vector<double>{2.0});
    Tensor err = add_const(mul(p[w], x), -4.0);
    t.backward(mul(err, err));
    sgd_step(store, p, 0.05, 0.0);
  }
  CHECK(store.values(w)[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("param store json round-trips exactly") {
  ParamStore store;
  make_gru(store, "g", 3, 4);
  make_linear(store, "head", 4, 2);
  Rng r(Rng::derive(31, rng_role::kInit));
  store.init_uniform(r);

  const nlohmann::json j = store.to_json();
  const std::string text = j.dump();

  ParamStore loaded;
  make_gru(loaded, "g", 3, 4);
  make_linear(loaded, "head", 4, 2);
  loaded.load_json(nlohmann::json::parse(text));

  for (size_t i = 0; i < store.count(); ++i) {
    const int id = static_cast<int>(i);
    CHECK(store.values(id) == loaded.values(id));
  }
}

TEST_CASE("checkpoint layout mismatches are rejected") {
  ParamStore store;
  make_linear(store, "l", 3, 2);
  nlohmann::json j = store.to_json();
  j[0]["name"] = "other";
  ParamStore target;
  make_linear(target, "l", 3, 2);
  CHECK_THROWS_AS(target.load_json(j), DataError);
}
