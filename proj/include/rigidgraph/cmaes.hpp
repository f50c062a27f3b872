#pragma once

#include "rigidgraph/types.hpp"

#include <functional>
#include <vector>

namespace rigidgraph {

struct CmaesResult {
  VecX x;                       // best-ever candidate, box coordinates
  double loss = 0.0;            // its objective value
  std::vector<double> history;  // best-ever loss after each generation
};

// Default population size 4 + floor(3 ln n).
int cmaes_default_lambda(int n);

// Gradient-free minimization of a box-constrained objective. The search
// runs in unbounded coordinates via a logit map of the normalized range,
// starting from the box center; candidates whose objective is non-finite
// are assigned a 1e12 penalty. The population is evaluated concurrently,
// so the objective must be pure. Throws if budget < population size.
CmaesResult cmaes_minimize(const std::function<double(const VecX&)>& objective,
                           const VecX& lower, const VecX& upper, int budget,
                           unsigned long seed, int lambda = 0);

}  // namespace rigidgraph
