#pragma once

// Central-difference derivatives of a scalar function of a vector.

#include <functional>

#include <Eigen/Dense>

namespace oracle {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

inline Eigen::VectorXd fd_gradient(const ScalarFn& fn, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (fn(xp) - fn(xm)) / (2 * h);
  }
  return g;
}

// Hessian from central differences of an analytic gradient.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
    const Eigen::VectorXd& x, double h = 1e-5) {
  const auto n = x.size();
  Eigen::MatrixXd J(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (grad(xp) - grad(xm)) / (2 * h);
  }
  return J;
}

// Hessian from second central differences of the function itself.
inline Eigen::MatrixXd fd_hessian(const ScalarFn& fn, const Eigen::VectorXd& x,
                                  double h = 1e-4) {
  const auto n = x.size();
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      H(i, j) = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (4 * h * h);
    }
  }
  return H;
}

}  // namespace oracle
