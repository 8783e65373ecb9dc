#pragma once

#include <functional>
#include <vector>

#include "rgi/ops.hpp"

namespace rgitest {

// Central-difference gradient check: rebuilds the graph through `f` after
// each perturbation of the leaf values. Returns the worst relative error over
// every entry of every leaf.
template <typename F>
double grad_check(std::vector<rgi::Tensor<double>> leaves, F f, double h = 1e-5) {
  for (auto& l : leaves) l.set_requires_grad(true);
  auto loss = f();
  for (auto& l : leaves) l.zero_grad();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) analytic.push_back(l.grad());

  double worst = 0.0;
  for (size_t k = 0; k < leaves.size(); ++k) {
    auto& vals = leaves[k].values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      const double step = h * std::max(1.0, std::abs(orig));
      vals[i] = orig + step;
      const double lp = f().item();
      vals[i] = orig - step;
      const double lm = f().item();
      vals[i] = orig;
      const double fd = (lp - lm) / (2 * step);
      const double an = analytic[k][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

inline rgi::Tensor<double> randn_d(rgi::Shape s, rgi::Rng& rng, double std = 1.0) {
  return rgi::Tensor<double>::randn(std::move(s), rng, std);
}

}  // namespace rgitest
