#pragma once

// Limited-memory quasi-Newton minimisation under box constraints.
//
// Variables at a bound whose projected gradient points outward are held
// fixed; the remaining free subspace is searched along the two-loop L-BFGS
// direction with a projected backtracking (Armijo) line search.

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace bandfit::opt {

using Vector = Eigen::VectorXd;

// Returns the objective, or std::nullopt when it cannot be evaluated at x
// (the line search then treats the point as infeasible).
using Objective = std::function<std::optional<double>(const Vector& x)>;

struct LbfgsbOptions {
  int memory = 6;
  int max_iterations = 100;
  double projected_gradient_tolerance = 1e-7;
  double relative_decrease_tolerance = 1e-12;
  double fd_step = 1e-4;
  int max_backtracks = 30;
};

struct LbfgsbResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Central-difference gradient. Returns nullopt if any evaluation fails.
std::optional<Vector> central_difference_gradient(const Objective& fn,
                                                  const Vector& x, double step,
                                                  const Vector& lower,
                                                  const Vector& upper,
                                                  int* evaluations = nullptr);

Vector project(const Vector& x, const Vector& lower, const Vector& upper);

// Minimises fn from x0 (projected into the box). The gradient comes from
// central differences; steps that would leave the box are clipped to it.
// Throws OptimizationError if fn cannot be evaluated at the start point.
LbfgsbResult minimize_bounded(const Objective& fn, const Vector& x0,
                              const Vector& lower, const Vector& upper,
                              const LbfgsbOptions& options = {});

}  // namespace bandfit::opt
