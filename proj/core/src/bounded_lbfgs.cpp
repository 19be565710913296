#include "bandfit/bounded_lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "bandfit/errors.hpp"

namespace bandfit::opt {

Vector project(const Vector& x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

std::optional<Vector> central_difference_gradient(const Objective& fn,
                                                  const Vector& x, double step,
                                                  const Vector& lower,
                                                  const Vector& upper,
                                                  int* evaluations) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x;
    Vector xm = x;
    xp[i] = std::min(x[i] + step, upper[i]);
    xm[i] = std::max(x[i] - step, lower[i]);
    const double width = xp[i] - xm[i];
    if (width <= 0.0) {
      g[i] = 0.0;
      continue;
    }
    const auto fp = fn(xp);
    const auto fm = fn(xm);
    if (evaluations != nullptr) *evaluations += 2;
    if (!fp || !fm) return std::nullopt;
    g[i] = (*fp - *fm) / width;
  }
  return g;
}

namespace {

struct Pair {
  Vector s;
  Vector y;
};

// Two-loop recursion restricted to the free variables.
Vector lbfgs_direction(const Vector& g, const std::deque<Pair>& memory,
                       const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
  const auto mask = free.cast<double>().matrix();
  Vector q = g.cwiseProduct(mask);
  std::vector<double> alpha(memory.size());
  std::vector<double> rho(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    const Vector s = memory[k].s.cwiseProduct(mask);
    const Vector y = memory[k].y.cwiseProduct(mask);
    const double sy = s.dot(y);
    rho[k] = sy > 1e-12 ? 1.0 / sy : 0.0;
    alpha[k] = rho[k] * s.dot(q);
    q -= alpha[k] * y;
  }
  double gamma = 1.0;
  if (!memory.empty()) {
    const Vector s = memory.back().s.cwiseProduct(mask);
    const Vector y = memory.back().y.cwiseProduct(mask);
    const double yy = y.dot(y);
    if (yy > 1e-16 && s.dot(y) > 1e-12) gamma = s.dot(y) / yy;
  }
  Vector r = gamma * q;
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const Vector s = memory[k].s.cwiseProduct(mask);
    const Vector y = memory[k].y.cwiseProduct(mask);
    const double beta = rho[k] * y.dot(r);
    r += s * (alpha[k] - beta);
  }
  return -r;
}

}  // namespace

LbfgsbResult minimize_bounded(const Objective& fn, const Vector& x0,
                              const Vector& lower, const Vector& upper,
                              const LbfgsbOptions& options) {
  if (x0.size() != lower.size() || x0.size() != upper.size()) {
    throw DomainError("bound dimensions disagree with start point");
  }
  if ((lower.array() > upper.array()).any()) throw DomainError("lower bound above upper");

  LbfgsbResult res;
  res.x = project(x0, lower, upper);
  const auto f0 = fn(res.x);
  ++res.evaluations;
  if (!f0) throw OptimizationError("objective not evaluable at the start point");
  res.value = *f0;

  auto g = central_difference_gradient(fn, res.x, options.fd_step, lower, upper,
                                       &res.evaluations);
  if (!g) return res;

  std::deque<Pair> memory;
  const auto n = res.x.size();
  Eigen::Array<bool, Eigen::Dynamic, 1> free(n);

  for (; res.iterations < options.max_iterations; ++res.iterations) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lower = res.x[i] <= lower[i] && (*g)[i] > 0.0;
      const bool at_upper = res.x[i] >= upper[i] && (*g)[i] < 0.0;
      free[i] = !(at_lower || at_upper);
    }
    const Vector projected_grad = g->cwiseProduct(free.cast<double>().matrix());
    if (projected_grad.lpNorm<Eigen::Infinity>() <= options.projected_gradient_tolerance) {
      res.converged = true;
      break;
    }

    Vector d = lbfgs_direction(*g, memory, free);
    if (d.dot(*g) >= 0.0) {
      d = -projected_grad;
      memory.clear();
    }
    double t = 1.0;
    if (memory.empty()) t = std::min(1.0, 1.0 / projected_grad.lpNorm<Eigen::Infinity>());

    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    for (int k = 0; k < options.max_backtracks; ++k, t *= 0.5) {
      x_new = project(res.x + t * d, lower, upper);
      if ((x_new - res.x).lpNorm<Eigen::Infinity>() == 0.0) break;
      const auto fv = fn(x_new);
      ++res.evaluations;
      if (!fv) continue;
      if (*fv <= res.value + 1e-4 * g->dot(x_new - res.x)) {
        f_new = *fv;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    auto g_new = central_difference_gradient(fn, x_new, options.fd_step, lower,
                                             upper, &res.evaluations);
    const double decrease = res.value - f_new;
    Pair p{x_new - res.x, Vector()};
    res.x = std::move(x_new);
    res.value = f_new;
    if (!g_new) break;
    p.y = *g_new - *g;
    g = std::move(g_new);
    if (p.s.dot(p.y) > 1e-10) {
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    if (decrease <= options.relative_decrease_tolerance * std::max(1.0, std::abs(res.value))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace bandfit::opt
