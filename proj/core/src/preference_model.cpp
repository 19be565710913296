#include "bandfit/preference_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bandfit/bounded_lbfgs.hpp"
#include "bandfit/errors.hpp"

namespace bandfit::pref {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
// Below this argument log Phi and phi/Phi switch to the erfcx form.
constexpr double kTailSwitch = -5.0;

Matrix jittered(const Matrix& K) {
  Matrix Kj = K;
  Kj.diagonal().array() += kJitter;
  return Kj;
}

Eigen::LLT<Matrix> factor_prior(const Matrix& Kj) {
  Eigen::LLT<Matrix> llt(Kj);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("kernel matrix is not positive definite after jitter");
  }
  return llt;
}

double probit_argument(const Vector& f, const Comparison& c, double sigma) {
  const auto a = static_cast<Eigen::Index>(c.a - 1);
  const auto b = static_cast<Eigen::Index>(c.b - 1);
  return c.d * (f[a] - f[b]) / (kSqrt2 * sigma);
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("sigma must be positive and finite");
  }
}

}  // namespace

bool HyperBounds::contains(const Hyperparams& hp) const {
  return hp.lambda >= lambda_min && hp.lambda <= lambda_max &&
         hp.sigma >= sigma_min && hp.sigma <= sigma_max;
}

void HyperBounds::validate() const {
  if (!(lambda_min > 0.0 && lambda_max >= lambda_min && sigma_min > 0.0 &&
        sigma_max >= sigma_min)) {
    throw DomainError("hyperparameter bounds must be positive and ordered");
  }
}

double erfcx(double x) {
  if (x < 3.0) return std::exp(x * x) * std::erfc(x);
  // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + 1/2/(x + 1/(x + ...)))
  // evaluated bottom-up; 60 levels are far beyond double precision for x >= 3.
  double t = x;
  for (int k = 60; k >= 1; --k) t = x + 0.5 * k / t;
  return 1.0 / (std::sqrt(std::numbers::pi) * t);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double log_normal_cdf(double z) {
  if (z >= kTailSwitch) return std::log(normal_cdf(z));
  const double x = -z / kSqrt2;
  return std::log(0.5 * erfcx(x)) - 0.5 * z * z;
}

double inverse_mills_ratio(double z) {
  if (z >= kTailSwitch) {
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return pdf / normal_cdf(z);
  }
  return std::sqrt(2.0 / std::numbers::pi) / erfcx(-z / kSqrt2);
}

Matrix kernel_matrix(int n_levels, double lambda) {
  if (n_levels < 2) throw DomainError("kernel needs at least two levels");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("lambda must be positive and finite");
  }
  Matrix K(n_levels, n_levels);
  for (int i = 0; i < n_levels; ++i) {
    for (int j = 0; j < n_levels; ++j) {
      const double dx = static_cast<double>(i - j);
      K(i, j) = std::exp(-dx * dx / (2.0 * lambda));
    }
  }
  return K;
}

void validate_comparisons(std::span<const Comparison> data, int n_levels) {
  for (const auto& c : data) {
    if (c.a < 1 || c.a > n_levels || c.b < 1 || c.b > n_levels) {
      throw DomainError("comparison level out of range");
    }
    if (c.a == c.b) throw DomainError("comparison must involve two levels");
    if (c.d != 1 && c.d != -1) throw DomainError("comparison outcome must be +-1");
  }
}

double log_likelihood(const Vector& f, std::span<const Comparison> data,
                      double sigma) {
  check_sigma(sigma);
  double sum = 0.0;
  for (const auto& c : data) sum += log_normal_cdf(probit_argument(f, c, sigma));
  return sum;
}

LikelihoodDerivatives likelihood_grad_hessian(const Vector& f,
                                              std::span<const Comparison> data,
                                              double sigma) {
  check_sigma(sigma);
  const auto n = f.size();
  LikelihoodDerivatives out{Vector::Zero(n), Matrix::Zero(n, n)};
  const double scale = kSqrt2 * sigma;
  for (const auto& c : data) {
    const double z = probit_argument(f, c, sigma);
    const double r = inverse_mills_ratio(z);
    const double g = c.d * r / scale;
    // d^2 log Phi / dz^2 = -r (z + r); chain rule contributes 1 / (2 sigma^2).
    const double h = r * (z + r) / (scale * scale);
    const auto a = static_cast<Eigen::Index>(c.a - 1);
    const auto b = static_cast<Eigen::Index>(c.b - 1);
    out.gradient[a] += g;
    out.gradient[b] -= g;
    out.W(a, a) += h;
    out.W(b, b) += h;
    out.W(a, b) -= h;
    out.W(b, a) -= h;
  }
  return out;
}

double stationarity_residual(const Matrix& K, std::span<const Comparison> data,
                             double sigma, const Vector& f) {
  const Matrix Kj = jittered(K);
  const auto llt = factor_prior(Kj);
  const Vector alpha = llt.solve(f);
  const auto derivs = likelihood_grad_hessian(f, data, sigma);
  return (derivs.gradient - alpha).lpNorm<Eigen::Infinity>();
}

Vector laplace_mode(const Matrix& K, std::span<const Comparison> data,
                    double sigma, const Vector& f_init,
                    const LaplaceOptions& options) {
  check_sigma(sigma);
  const auto n = K.rows();
  if (K.cols() != n || f_init.size() != n) {
    throw DomainError("kernel and initial mode dimensions disagree");
  }
  if (!f_init.allFinite()) throw DomainError("initial mode must be finite");
  validate_comparisons(data, static_cast<int>(n));

  const Matrix Kj = jittered(K);
  const auto llt = factor_prior(Kj);
  if (data.empty()) return Vector::Zero(n);

  // alpha tracks Kj^-1 f so the ill-conditioned inverse is never formed.
  Vector f = f_init;
  Vector alpha = llt.solve(f);
  const Matrix I = Matrix::Identity(n, n);

  auto log_posterior = [&](const Vector& v, const Vector& a) {
    return log_likelihood(v, data, sigma) - 0.5 * v.dot(a);
  };

  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const auto derivs = likelihood_grad_hessian(f, data, sigma);
    residual = (derivs.gradient - alpha).lpNorm<Eigen::Infinity>();
    if (residual <= options.tolerance) return f;
    if (iter == options.max_iterations) break;

    // (K^-1 + W)^-1 b = K (I + W K)^-1 b
    const Vector rhs = derivs.W * f + derivs.gradient;
    const Vector alpha_full = (I + derivs.W * Kj).partialPivLu().solve(rhs);
    const Vector f_full = Kj * alpha_full;
    if (!f_full.allFinite()) throw NumericalError("Newton step is not finite");

    const double current = log_posterior(f, alpha);
    // Near the mode the objective changes by less than its rounding error.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(current));
    double step = 1.0;
    Vector f_next = f_full;
    Vector alpha_next = alpha_full;
    for (int h = 0; h < options.max_halvings; ++h) {
      if (log_posterior(f_next, alpha_next) >= current - slack) break;
      step *= 0.5;
      f_next = f + step * (f_full - f);
      alpha_next = alpha + step * (alpha_full - alpha);
    }
    f = std::move(f_next);
    alpha = std::move(alpha_next);
  }
  throw ConvergenceError("Laplace mode did not converge in " +
                             std::to_string(options.max_iterations) +
                             " iterations (residual " + std::to_string(residual) +
                             ")",
                         residual);
}

Matrix posterior_covariance(const Matrix& K, const Matrix& W) {
  const auto n = K.rows();
  if (K.cols() != n || W.rows() != n || W.cols() != n) {
    throw DomainError("posterior_covariance dimension mismatch");
  }
  const Matrix Kj = jittered(K);
  factor_prior(Kj);
  // Sigma = K (I + W K)^-1, so Sigma^T = (I + K W)^-1 K.
  const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + Kj * W);
  Matrix sigma = lu.solve(Kj).transpose();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  if (!sigma.allFinite()) throw NumericalError("posterior covariance is not finite");
  Matrix probe = sigma;
  probe.diagonal().array() += kJitter;
  if (Eigen::LLT<Matrix>(probe).info() != Eigen::Success) {
    throw NumericalError("posterior covariance is not positive definite");
  }
  return sigma;
}

Posterior laplace_posterior(const Matrix& K, std::span<const Comparison> data,
                            double sigma, const Vector& f_init,
                            const LaplaceOptions& options) {
  Posterior post;
  post.mode = laplace_mode(K, data, sigma, f_init, options);
  const auto derivs = likelihood_grad_hessian(post.mode, data, sigma);
  post.covariance = posterior_covariance(K, derivs.W);
  return post;
}

double log_marginal_laplace(std::span<const Comparison> data, int n_levels,
                            const Hyperparams& hp, Vector* mode_out) {
  const Matrix K = kernel_matrix(n_levels, hp.lambda);
  const Vector mode = laplace_mode(K, data, hp.sigma, Vector::Zero(n_levels));
  if (mode_out != nullptr) *mode_out = mode;
  if (data.empty()) return 0.0;

  const Matrix Kj = jittered(K);
  const auto llt = factor_prior(Kj);
  const auto derivs = likelihood_grad_hessian(mode, data, hp.sigma);
  const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n_levels, n_levels) +
                                       Kj * derivs.W);
  double log_det = 0.0;
  const Matrix& lu_mat = lu.matrixLU();
  for (int i = 0; i < n_levels; ++i) log_det += std::log(std::abs(lu_mat(i, i)));

  return log_likelihood(mode, data, hp.sigma) - 0.5 * mode.dot(llt.solve(mode)) -
         0.5 * log_det;
}

Hyperparams fit_hyperparams(std::span<const Comparison> data, int n_levels,
                            const HyperBounds& bounds, const Hyperparams& init,
                            const HyperFitOptions& options) {
  bounds.validate();
  if (!bounds.contains(init)) throw DomainError("initial hyperparameters outside bounds");
  validate_comparisons(data, n_levels);
  if (data.empty()) return init;

  const Vector lower{{std::log(bounds.lambda_min), std::log(bounds.sigma_min)}};
  const Vector upper{{std::log(bounds.lambda_max), std::log(bounds.sigma_max)}};

  int failures = 0;
  int evaluations = 0;
  opt::Objective negative_evidence = [&](const Vector& x) -> std::optional<double> {
    ++evaluations;
    try {
      const double v =
          log_marginal_laplace(data, n_levels, {std::exp(x[0]), std::exp(x[1])});
      if (!std::isfinite(v)) {
        ++failures;
        return std::nullopt;
      }
      return -v;
    } catch (const bandfit::Error&) {
      ++failures;
      return std::nullopt;
    }
  };

  const Vector x_init{{std::log(init.lambda), std::log(init.sigma)}};
  std::vector<Vector> starts{x_init};

  if (options.seed_grid >= 2 && options.restarts > 0) {
    std::vector<std::pair<double, Vector>> scored;
    const int g = options.seed_grid;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const double ti = static_cast<double>(i) / (g - 1);
        const double tj = static_cast<double>(j) / (g - 1);
        Vector x{{lower[0] + ti * (upper[0] - lower[0]),
                  lower[1] + tj * (upper[1] - lower[1])}};
        if (auto v = negative_evidence(x)) scored.emplace_back(*v, x);
      }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    for (int k = 0; k < options.restarts && k < static_cast<int>(scored.size()); ++k) {
      starts.push_back(scored[static_cast<std::size_t>(k)].second);
    }
  }

  opt::LbfgsbOptions lopts;
  lopts.fd_step = options.fd_step;
  lopts.max_iterations = options.max_iterations;

  std::optional<opt::LbfgsbResult> best;
  for (const auto& start : starts) {
    try {
      auto res = opt::minimize_bounded(negative_evidence, start, lower, upper, lopts);
      if (!best || res.value < best->value) best = std::move(res);
    } catch (const OptimizationError&) {
      // start point not evaluable; try the others
    }
  }
  if (!best) {
    throw OptimizationError("every hyperparameter evaluation failed (" +
                            std::to_string(failures) + " of " +
                            std::to_string(evaluations) + ")");
  }
  Hyperparams out{std::exp(best->x[0]), std::exp(best->x[1])};
  // exp(log(v)) may land one ulp outside the box.
  out.lambda = std::clamp(out.lambda, bounds.lambda_min, bounds.lambda_max);
  out.sigma = std::clamp(out.sigma, bounds.sigma_min, bounds.sigma_max);
  return out;
}

int best_level(const Vector& f) {
  if (f.size() == 0) throw DomainError("best_level of an empty preference function");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < f.size(); ++i) {
    if (f[i] > f[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

}  // namespace bandfit::pref
