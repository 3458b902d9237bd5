#pragma once

#include <cstddef>
#include <vector>

namespace mixtrade {

// Balanced sample-to-actor allocation: move one unit of mass, 1/n per
// sample row, onto k actor columns with prescribed proportions, at
// minimal total cost, softened by an entropic regularizer.
struct TransportProblem {
  std::size_t n = 0;                     // samples (rows)
  std::size_t k = 0;                     // actors (columns)
  std::vector<double> cost;              // n x k, row-major, finite
  std::vector<double> column_marginals;  // w, length k, positive, sums to 1
  double epsilon_reg = 0.05;
  std::size_t max_iters = 500;
  double tol = 1e-6;

  double row_mass() const { return 1.0 / static_cast<double>(n); }
  void validate() const;

  // Uniform column proportions 1/k.
  static TransportProblem balanced(std::size_t n, std::size_t k,
                                   std::vector<double> cost,
                                   double epsilon_reg = 0.05);
};

struct TransportPlan {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> plan;  // n x k, nonnegative, total mass 1
  bool converged = false;
  std::size_t iterations_used = 0;
  double marginal_residual = 0.0;  // max row/column deviation at exit

  double at(std::size_t i, std::size_t j) const { return plan[i * k + j]; }
};

// Alternating row/column scaling of exp(-cost/epsilon_reg) until both
// marginal residuals drop below tol or max_iters is hit (converged=false,
// plan still returned). Switches to log-domain potentials below
// epsilon_reg = 0.02 where the kernel would underflow. The returned plan
// is finished with a feasibility rounding onto the transport polytope, so
// its marginals (and total mass 1) hold to roundoff even when the scaling
// loop stalled; `converged` reports the scaling loop's own exit.
TransportPlan sinkhorn_solve(const TransportProblem& problem);

struct HardAssignment {
  std::vector<int> actor_of;  // length n
  double total_cost = 0.0;    // sum of the chosen cost entries, unit rows
};

// Exhaustive minimum over all assignments with exactly counts[j] samples
// on actor j. Enumeration oracle only: refuses n > 12.
HardAssignment exact_assignment_oracle(const std::vector<double>& cost,
                                       std::size_t n, std::size_t k,
                                       const std::vector<std::size_t>& counts);

// Integer count vectors nearest to w*n: each entry floor or ceil of its
// share, summing to n. Unique when every share is integral; otherwise one
// candidate per fair placement of the leftover samples.
std::vector<std::vector<std::size_t>> fair_count_vectors(
    std::size_t n, const std::vector<double>& w);

// Row-argmax rounding with capacity repair: rows are processed in
// decreasing order of assignment confidence (gap between their top two
// plan entries) and take their most-weighted actor that still has
// capacity under `counts`.
HardAssignment round_plan(const TransportPlan& plan,
                          const std::vector<double>& cost,
                          const std::vector<std::size_t>& counts);

// Cheapest rounding across all fair count vectors for w.
HardAssignment round_plan_balanced(const TransportPlan& plan,
                                   const std::vector<double>& cost,
                                   const std::vector<double>& w);

// Per-sample target distribution over actors: each plan row divided by
// its own mass. Zero rows (unreachable for converged plans) fall back to
// uniform.
std::vector<double> row_targets(const TransportPlan& plan);

}  // namespace mixtrade
