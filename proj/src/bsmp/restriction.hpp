#pragma once

#include "bsmp/bsde.hpp"
#include "bsmp/model.hpp"

#include <functional>
#include <string>

namespace bsmp {

/// Terminal value of the auxiliary cost equation, a function of W_T.
struct TerminalShift {
  std::function<double(CVecRef w)> value;
  std::string label;
};

TerminalShift zero_shift();
/// eta(W_T) = W_T[component] (mean zero).
TerminalShift brownian_shift(int component);

/// The cost-carrying extension of a problem: state (y, x) in R^{n+1} with
///   dx = h dt + k dW,  x_T = eta,
/// and terminal cost g(y) - x. The running cost of the extended problem is zero.
struct AugmentedProblem {
  ProblemSpec base;
  ProblemSpec spec;
  TerminalShift shift;
};

AugmentedProblem augment_problem(const ProblemSpec& spec, TerminalShift shift = zero_shift());

/// Mean over paths of g(y_0) - x_0 + eta(W_T), computed on a trajectory of the
/// extended problem.
CostEstimate restricted_cost(const AugmentedProblem& aug, const Trajectory& aug_traj);

}  // namespace bsmp
