#include "mixtrade/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mixtrade/errors.hpp"

namespace mixtrade {

namespace {

constexpr double kLogDomainBelow = 0.02;

double logsumexp(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

struct Residuals {
  double row = 0.0;
  double col = 0.0;
  double max() const { return std::max(row, col); }
};

Residuals marginal_residuals(const std::vector<double>& p, std::size_t n,
                             std::size_t k, double row_mass,
                             const std::vector<double>& w) {
  Residuals r;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += p[i * k + j];
    r.row = std::max(r.row, std::fabs(s - row_mass));
  }
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i * k + j];
    r.col = std::max(r.col, std::fabs(s - w[j]));
  }
  return r;
}

// Projects an approximately feasible plan onto the transport polytope:
// rows and columns are scaled down to their targets where they overshoot
// and the missing mass is re-added as a rank-one outer product of the
// deficits. Marginals come out exact up to roundoff; the plan moves by
// at most the order of the incoming residual.
void project_to_marginals(std::vector<double>& p, std::size_t n,
                          std::size_t k, double row_mass,
                          const std::vector<double>& w) {
  std::vector<double> row_def(n, 0.0), col_def(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += p[i * k + j];
    if (s > row_mass) {
      const double f = row_mass / s;
      for (std::size_t j = 0; j < k; ++j) p[i * k + j] *= f;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i * k + j];
    if (s > w[j]) {
      const double f = w[j] / s;
      for (std::size_t i = 0; i < n; ++i) p[i * k + j] *= f;
    }
  }
  double total_def = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += p[i * k + j];
    row_def[i] = std::max(row_mass - s, 0.0);
    total_def += row_def[i];
  }
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i * k + j];
    col_def[j] = std::max(w[j] - s, 0.0);
  }
  if (total_def > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j)
        p[i * k + j] += row_def[i] * col_def[j] / total_def;
}

}  // namespace

void TransportProblem::validate() const {
  if (n < 1 || k < 1) throw ConfigError("transport: n and k must be >= 1");
  if (cost.size() != n * k)
    throw ShapeError("transport: cost is " + std::to_string(cost.size()) +
                     " entries, expected " + std::to_string(n * k));
  for (double c : cost)
    if (!std::isfinite(c)) throw ConfigError("transport: cost must be finite");
  if (column_marginals.size() != k)
    throw ShapeError("transport: column_marginals length mismatch");
  double sum = 0.0;
  for (double w : column_marginals) {
    if (!(w > 0.0))
      throw ConfigError("transport: column marginals must be positive");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("transport: column marginals must sum to 1");
  if (!(epsilon_reg > 0.0))
    throw ConfigError("transport: epsilon_reg must be > 0");
  if (max_iters < 1) throw ConfigError("transport: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("transport: tol must be > 0");
}

TransportProblem TransportProblem::balanced(std::size_t n, std::size_t k,
                                            std::vector<double> cost,
                                            double epsilon_reg) {
  TransportProblem pb;
  pb.n = n;
  pb.k = k;
  pb.cost = std::move(cost);
  pb.column_marginals.assign(k, 1.0 / static_cast<double>(k));
  pb.epsilon_reg = epsilon_reg;
  return pb;
}

TransportPlan sinkhorn_solve(const TransportProblem& pb) {
  pb.validate();
  const std::size_t n = pb.n, k = pb.k;
  const double a = pb.row_mass();
  const std::vector<double>& w = pb.column_marginals;
  const double eps = pb.epsilon_reg;

  TransportPlan out;
  out.n = n;
  out.k = k;
  out.plan.assign(n * k, 0.0);

  Residuals res;
  if (eps < kLogDomainBelow) {
    // Potential form: plan_ij = exp((f_i + g_j - cost_ij) / eps). The
    // updates below are the scaling steps expressed through logsumexp,
    // immune to kernel underflow.
    std::vector<double> f(n, 0.0), g(k, 0.0), scratch(std::max(n, k));
    const double log_a = std::log(a);
    std::vector<double> log_w(k);
    for (std::size_t j = 0; j < k; ++j) log_w[j] = std::log(w[j]);

    for (std::size_t it = 1; it <= pb.max_iters; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j)
          scratch[j] = (g[j] - pb.cost[i * k + j]) / eps;
        f[i] = eps * (log_a - logsumexp(scratch.data(), k));
      }
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i)
          scratch[i] = (f[i] - pb.cost[i * k + j]) / eps;
        g[j] = eps * (log_w[j] - logsumexp(scratch.data(), n));
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          out.plan[i * k + j] =
              std::exp((f[i] + g[j] - pb.cost[i * k + j]) / eps);
      out.iterations_used = it;
      res = marginal_residuals(out.plan, n, k, a, w);
      if (res.max() < pb.tol) {
        out.converged = true;
        break;
      }
    }
  } else {
    std::vector<double> kernel(n * k);
    for (std::size_t i = 0; i < n * k; ++i)
      kernel[i] = std::exp(-pb.cost[i] / eps);
    std::vector<double> u(n, 1.0), v(k, 1.0);

    for (std::size_t it = 1; it <= pb.max_iters; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += kernel[i * k + j] * v[j];
        if (!(s > 0.0))
          throw NumericError(
              "sinkhorn: kernel row underflow; increase epsilon_reg or "
              "rescale costs");
        u[i] = a / s;
      }
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += kernel[i * k + j] * u[i];
        if (!(s > 0.0))
          throw NumericError(
              "sinkhorn: kernel column underflow; increase epsilon_reg or "
              "rescale costs");
        v[j] = w[j] / s;
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          out.plan[i * k + j] = u[i] * kernel[i * k + j] * v[j];
      out.iterations_used = it;
      res = marginal_residuals(out.plan, n, k, a, w);
      if (res.max() < pb.tol) {
        out.converged = true;
        break;
      }
    }
  }

  // Feasibility rounding: scaling alone approaches the polytope only in
  // the limit (sublinearly on degenerate instances), so finish by
  // restoring both marginals exactly. Total mass 1 follows because the
  // marginals each sum to 1.
  project_to_marginals(out.plan, n, k, a, w);
  out.marginal_residual = marginal_residuals(out.plan, n, k, a, w).max();
  return out;
}

HardAssignment exact_assignment_oracle(
    const std::vector<double>& cost, std::size_t n, std::size_t k,
    const std::vector<std::size_t>& counts) {
  if (n > 12)
    throw StateError("exact_assignment_oracle: enumeration bound is n <= 12");
  if (n < 1 || k < 1 || cost.size() != n * k)
    throw ShapeError("exact_assignment_oracle: cost shape mismatch");
  if (counts.size() != k)
    throw ShapeError("exact_assignment_oracle: counts length mismatch");
  if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) != n)
    throw StateError("exact_assignment_oracle: counts must sum to n");

  HardAssignment best;
  best.total_cost = std::numeric_limits<double>::infinity();
  std::vector<int> current(n, -1);
  std::vector<std::size_t> remaining = counts;

  auto recurse = [&](auto&& self, std::size_t i, double acc) -> void {
    if (i == n) {
      if (acc < best.total_cost) {
        best.total_cost = acc;
        best.actor_of = current;
      }
      return;
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (remaining[j] == 0) continue;
      --remaining[j];
      current[i] = static_cast<int>(j);
      self(self, i + 1, acc + cost[i * k + j]);
      ++remaining[j];
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

std::vector<std::vector<std::size_t>> fair_count_vectors(
    std::size_t n, const std::vector<double>& w) {
  const std::size_t k = w.size();
  if (k == 0) throw ShapeError("fair_count_vectors: empty marginals");
  std::vector<std::size_t> base(k);
  std::vector<std::size_t> fractional;  // indices that may take one extra
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double share = w[j] * static_cast<double>(n);
    base[j] = static_cast<std::size_t>(std::floor(share + 1e-9));
    assigned += base[j];
    if (share - static_cast<double>(base[j]) > 1e-9) fractional.push_back(j);
  }
  const std::size_t leftover = n - assigned;

  std::vector<std::vector<std::size_t>> out;
  if (leftover == 0) {
    out.push_back(base);
    return out;
  }
  // One candidate per way of placing the leftover samples on actors whose
  // share was rounded down.
  std::vector<std::size_t> pick;
  auto choose = [&](auto&& self, std::size_t from, std::size_t need) -> void {
    if (need == 0) {
      std::vector<std::size_t> c = base;
      for (std::size_t j : pick) ++c[j];
      out.push_back(std::move(c));
      return;
    }
    for (std::size_t idx = from; idx + need <= fractional.size(); ++idx) {
      pick.push_back(fractional[idx]);
      self(self, idx + 1, need - 1);
      pick.pop_back();
    }
  };
  choose(choose, 0, leftover);
  if (out.empty())
    throw StateError("fair_count_vectors: marginals do not admit a fair "
                     "integer split");
  return out;
}

HardAssignment round_plan(const TransportPlan& plan,
                          const std::vector<double>& cost,
                          const std::vector<std::size_t>& counts) {
  const std::size_t n = plan.n, k = plan.k;
  if (cost.size() != n * k) throw ShapeError("round_plan: cost shape mismatch");
  if (counts.size() != k) throw ShapeError("round_plan: counts length");
  if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) != n)
    throw StateError("round_plan: counts must sum to n");

  // Confidence = gap between a row's two largest plan entries; rows that
  // clearly prefer one actor claim capacity first.
  std::vector<double> margin(n, std::numeric_limits<double>::infinity());
  if (k > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      double top = -1.0, second = -1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double p = plan.at(i, j);
        if (p > top) {
          second = top;
          top = p;
        } else if (p > second) {
          second = p;
        }
      }
      margin[i] = top - second;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return margin[a] > margin[b];
                   });

  HardAssignment out;
  out.actor_of.assign(n, -1);
  std::vector<std::size_t> remaining = counts;
  std::vector<std::size_t> pref(k);
  for (std::size_t i : order) {
    std::iota(pref.begin(), pref.end(), 0);
    std::stable_sort(pref.begin(), pref.end(),
                     [&](std::size_t a, std::size_t b) {
                       return plan.at(i, a) > plan.at(i, b);
                     });
    for (std::size_t j : pref) {
      if (remaining[j] > 0) {
        --remaining[j];
        out.actor_of[i] = static_cast<int>(j);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    out.total_cost += cost[i * k + static_cast<std::size_t>(out.actor_of[i])];
  return out;
}

HardAssignment round_plan_balanced(const TransportPlan& plan,
                                   const std::vector<double>& cost,
                                   const std::vector<double>& w) {
  HardAssignment best;
  best.total_cost = std::numeric_limits<double>::infinity();
  for (const auto& counts : fair_count_vectors(plan.n, w)) {
    HardAssignment cand = round_plan(plan, cost, counts);
    if (cand.total_cost < best.total_cost) best = std::move(cand);
  }
  return best;
}

std::vector<double> row_targets(const TransportPlan& plan) {
  const std::size_t n = plan.n, k = plan.k;
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += plan.at(i, j);
    if (s > 0.0) {
      for (std::size_t j = 0; j < k; ++j) out[i * k + j] = plan.at(i, j) / s;
    } else {
      for (std::size_t j = 0; j < k; ++j)
        out[i * k + j] = 1.0 / static_cast<double>(k);
    }
  }
  return out;
}

}  // namespace mixtrade
