#pragma once

// Single-band Bayesian preference learning over a discrete grid of
// adjustment levels: squared-exponential GP prior, probit likelihood for
// paired comparisons, Laplace posterior and evidence-based hyperparameters.
//
// Level indices are 1-based throughout. All functions are pure.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bandfit::pref {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Added to the kernel diagonal before any factorization.
inline constexpr double kJitter = 1e-8;

struct Hyperparams {
  double lambda = 1.0;  // length-scale, squared level-index units
  double sigma = 1.0;   // feedback noise scale

  bool operator==(const Hyperparams&) const = default;
};

struct HyperBounds {
  double lambda_min = 0.1;
  double lambda_max = 10.0;
  double sigma_min = 0.05;
  double sigma_max = 10.0;

  bool contains(const Hyperparams& hp) const;
  void validate() const;
};

// Level a compared against level b; d = +1 when a was preferred.
struct Comparison {
  int a = 1;
  int b = 2;
  int d = 1;

  bool operator==(const Comparison&) const = default;
};

using ComparisonSet = std::vector<Comparison>;

// Gaussian approximation of the posterior over the latent utilities.
struct Posterior {
  Vector mode;
  Matrix covariance;
};

// ---- probit primitives -------------------------------------------------

// Standard normal CDF.
double normal_cdf(double z);

// log Phi(z), accurate for arguments far in the lower tail.
double log_normal_cdf(double z);

// phi(z) / Phi(z), accurate for arguments far in the lower tail.
double inverse_mills_ratio(double z);

// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

// ---- model --------------------------------------------------------------

// [K]_ij = exp(-(i-j)^2 / (2 lambda)) over level indices 1..n. No jitter.
Matrix kernel_matrix(int n_levels, double lambda);

// sum_k log Phi(d_k (f_a - f_b) / (sqrt(2) sigma)).
double log_likelihood(const Vector& f, std::span<const Comparison> data,
                      double sigma);

struct LikelihoodDerivatives {
  Vector gradient;  // d/df log p(D | f, sigma)
  Matrix W;         // -d^2/df^2 log p(D | f, sigma), symmetric PSD
};

LikelihoodDerivatives likelihood_grad_hessian(const Vector& f,
                                              std::span<const Comparison> data,
                                              double sigma);

struct LaplaceOptions {
  double tolerance = 1e-6;  // infinity norm of the log-posterior gradient
  int max_iterations = 100;
  int max_halvings = 20;
};

// ||-K^-1 f + grad log p(D | f)||_inf with the jittered kernel.
double stationarity_residual(const Matrix& K, std::span<const Comparison> data,
                             double sigma, const Vector& f);

// Posterior mode by damped Newton iteration
//   f_new = (K^-1 + W)^-1 [W f + grad log p(D | f)]
// started from f_init. Throws ConvergenceError after max_iterations.
Vector laplace_mode(const Matrix& K, std::span<const Comparison> data,
                    double sigma, const Vector& f_init,
                    const LaplaceOptions& options = {});

// (K^-1 + W)^-1 via factorization of I + W K. Throws NumericalError if the
// result is not positive definite.
Matrix posterior_covariance(const Matrix& K, const Matrix& W);

Posterior laplace_posterior(const Matrix& K, std::span<const Comparison> data,
                            double sigma, const Vector& f_init,
                            const LaplaceOptions& options = {});

// Laplace evidence
//   log p(D | f^) - 1/2 f^T K^-1 f^ - 1/2 log det(I + K W(f^)).
// If mode_out is non-null it receives f^.
double log_marginal_laplace(std::span<const Comparison> data, int n_levels,
                            const Hyperparams& hp, Vector* mode_out = nullptr);

struct HyperFitOptions {
  // Extra starting points: a coarse log-spaced grid of this many points per
  // axis is scored and the best `restarts` are refined along with init.
  int seed_grid = 5;
  int restarts = 2;
  double fd_step = 1e-4;  // central differences in log-parameter space
  int max_iterations = 100;
};

// Bounded maximisation of log_marginal_laplace over (log lambda, log sigma).
// The result is inside `bounds` and never scores below `init`.
Hyperparams fit_hyperparams(std::span<const Comparison> data, int n_levels,
                            const HyperBounds& bounds, const Hyperparams& init,
                            const HyperFitOptions& options = {});

// 1-based argmax; ties go to the lowest index.
int best_level(const Vector& f);

// Throws DomainError on indices outside [1, n_levels], a == b or d not +-1.
void validate_comparisons(std::span<const Comparison> data, int n_levels);

}  // namespace bandfit::pref
