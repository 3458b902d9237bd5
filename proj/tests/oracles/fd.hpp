#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

// Central finite-difference gradient oracle.
//
// `loss_fn` maps a set of flat input vectors to a scalar by building and
// evaluating the computation afresh on every call; the oracle perturbs one
// entry at a time and differentiates numerically, independent of any
// reverse-mode machinery. Relative error for one entry is
//   |ad - fd| / max(1, |ad|, |fd|)
// and the maximum over all entries of all inputs is returned.
namespace oracles {

template <typename LossFn>
double fd_max_rel_err(std::vector<std::vector<double>> inputs,
                      const std::vector<std::vector<double>>& analytic,
                      LossFn&& loss_fn, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      const double up = loss_fn(inputs);
      inputs[k][i] = saved - h;
      const double down = loss_fn(inputs);
      inputs[k][i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[k][i];
      const double denom = std::max({1.0, std::fabs(fd), std::fabs(ad)});
      worst = std::max(worst, std::fabs(ad - fd) / denom);
    }
  }
  return worst;
}

}  // namespace oracles
