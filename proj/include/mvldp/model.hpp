#ifndef MVLDP_MODEL_HPP
#define MVLDP_MODEL_HPP

// System instances: coefficient callbacks, the jump-measure description,
// the constants the dissipativity/Lipschitz checks are graded against,
// and the builtin analytically solvable models.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvldp/measure.hpp"
#include "mvldp/rng.hpp"

namespace mvldp {

// Lipschitz / growth / dissipativity constants (A1-A4).
struct AssumptionParams {
  double c1 = 1.0;  // joint Lipschitz bound
  double c2 = 1.0;  // linear growth (consequence of c1, kept for reports)
  double c3 = 1.0;  // fast-diffusion growth
  double c4 = 1.0;  // strict contraction rate of the fast drift
  double c5 = 1.0;  // fast mean-square dissipation rate
  double c6 = 1.0;  // fast dissipation offset
  double rho = 1.0; // exponential mark-integrability margin

  void validate() const;  // throws ModelError; c4, c5 must be > 0
};

// Finite-activity jump measure: total mass plus a normalized mark sampler.
struct LevyMeasureSpec {
  double total_rate = 0.0;  // nu(X), must be finite and >= 0
  int mark_dim = 1;
  // Draws one mark with law nu/total_rate into `out`.
  std::function<void(RngStream&, std::span<double> out)> mark_sampler;
  // Optional closed form of int |g(t,x,mu,z)|^2 nu(dz) for oracle models.
  std::function<double(double t, std::span<const double> x, const MeasureView& mu)>
      g_sq_moment;
};

struct ModelSpec {
  int dim_slow = 1;   // n
  int dim_fast = 1;   // equals n in the builtin models
  int dim_noise = 1;  // d

  using Drift = std::function<void(std::span<const double> x, const MeasureView& mu,
                                   std::span<const double> y, std::span<double> out)>;
  // Slow diffusion never reads y (enforced by this signature).
  using SlowDiffusion = std::function<void(std::span<const double> x, const MeasureView& mu,
                                           std::span<double> out)>;  // row-major n x d
  using FastDiffusion = std::function<void(std::span<const double> x, const MeasureView& mu,
                                           std::span<const double> y,
                                           std::span<double> out)>;  // row-major n x d
  using JumpCoeff = std::function<void(double t, std::span<const double> x,
                                       const MeasureView& mu, std::span<const double> z,
                                       std::span<double> out)>;

  Drift b1;
  Drift b2;
  SlowDiffusion sigma1;
  FastDiffusion sigma2;
  JumpCoeff g;
  LevyMeasureSpec levy;
  AssumptionParams constants;

  // Optional closed form of int g(t,x,mu,z) nu(dz) (mass included); the
  // integrators fall back to a seeded mark-quadrature stencil without it.
  std::function<void(double t, std::span<const double> x, const MeasureView& mu,
                     std::span<double> out)>
      mean_g;
  // Optional closed form of the averaged drift b1-bar(x, mu).
  std::function<void(std::span<const double> x, const MeasureView& mu, std::span<double> out)>
      averaged_drift_hook;
  // False lets averaged_drift skip the invariant-measure sampling.
  bool b1_depends_on_y = true;

  std::string name = "custom";

  void validate() const;  // throws ModelError on structural problems
};

struct AssumptionReport {
  double a1_max_ratio = 0.0;
  double a2_max = 0.0;
  double a3_contraction_max = 0.0;  // most positive quotient seen
  double a3_growth_excess = 0.0;    // max of lhs - rhs, <= 0 passes
  std::size_t pairs_evaluated = 0;
  std::size_t pairs_skipped = 0;  // degenerate (identical) probe pairs
  bool a1_pass = false;
  bool a2_pass = false;
  bool a3_contraction_pass = false;
  bool a3_growth_pass = false;
  bool pass() const { return a1_pass && a2_pass && a3_contraction_pass && a3_growth_pass; }
};

// Probes the coefficients at random state/measure pairs inside `radius`
// and grades the empirical constants against spec.constants. Throws
// ModelError naming the coefficient if one returns a non-finite value.
AssumptionReport check_assumptions(const ModelSpec& spec, std::size_t n_probes, double radius,
                                   std::uint64_t seed);

// Builtin slow-fast pair with an exactly known averaged dynamics:
//   b1 = -x + y, b2 = -(y - theta x), sigma2 = sigma_fast,
//   sigma1 = sigma_slow, g = jump_scale * z with unit marks at rate lambda.
// The frozen-fast invariant law is N(theta x, sigma_fast^2 / 2), so
// b1-bar(x) = (theta - 1) x.
ModelSpec build_linear_model(double theta, double sigma_fast, double sigma_slow,
                             double jump_scale, double lambda);

// Pure small-noise Gaussian benchmark: b1 = 0, sigma1 = sigma, no jumps;
// inert fast component. Rate of {X_T = a} from X_0 is (a-X_0)^2 / (2 sigma^2 T).
ModelSpec build_gaussian_benchmark(double sigma);

// Pure jump benchmark: b1 = 0, sigma1 = 0, g = jump_scale * z with unit
// marks at rate lambda; inert fast component.
ModelSpec build_poisson_benchmark(double lambda, double jump_scale);

// Builds a builtin model from a name string such as
// "linear1d(theta=2, sigma_fast=1.5, sigma_slow=0, jump_scale=0, lambda=0)".
ModelSpec model_from_name(const std::string& text);

}  // namespace mvldp

#endif
