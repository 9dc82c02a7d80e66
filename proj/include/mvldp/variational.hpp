#ifndef MVLDP_VARIATIONAL_HPP
#define MVLDP_VARIATIONAL_HPP

// Control costs, the deterministic skeleton equation, and rate-function
// evaluation by penalty-continuation optimization over discretized
// controls.

#include <cstdint>
#include <string>
#include <vector>

#include "mvldp/averaging.hpp"
#include "mvldp/control.hpp"
#include "mvldp/model.hpp"

namespace mvldp {

// ell(r) = r log r - r + 1, the per-unit-intensity tilting cost.
// ell(0) = 1 by continuity; negative r is a domain error.
double entropy_ell(double r);

// L1(psi) = 1/2 int_0^T |psi|^2 dt, exact for piecewise-constant psi.
double cost_l1(const PiecewiseConstant& psi);

// L2(phi) = lambda int_0^T ell(phi_t) dt for mark-independent phi.
double cost_l2(const PiecewiseConstant& phi, const LevyMeasureSpec& levy, double t_end);

double cost_total(const ControlPair& control, const LevyMeasureSpec& levy, double t_end);

// Post-hoc budget check: the class bound m is advisory, so exceeding it
// produces warnings rather than errors.
std::vector<std::string> budget_warnings(const ControlPair& control,
                                         const LevyMeasureSpec& levy, double t_end);

struct SkeletonPath {
  std::vector<double> times;
  std::vector<double> states;  // flat [times x n]
  int dim = 1;
  double residual_norm = 0.0;  // max step-doubling defect
  double drift_se_aggregate = 0.0;  // nonzero when the drift fell back to Monte Carlo

  std::span<const double> state_at(std::size_t j) const {
    return {states.data() + j * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> endpoint() const { return state_at(times.size() - 1); }
};

// 4th-order integration of
//   dXhat = b1bar(Xhat, L_Xbar) dt + sigma1(Xhat, L_Xbar) psi dt
//           + int g(t, Xhat, L_Xbar, z) (phi - 1) nu(dz) dt,
// with the law argument the running Dirac mass along `averaged`. Steps
// are aligned to the control breakpoints so the order is preserved.
SkeletonPath skeleton_solve(const ModelSpec& spec, const AveragedPath& averaged,
                            const ControlPair& control, double dt,
                            const DriftMode& mode = DriftMode::analytic());

struct OptimizerConfig {
  std::size_t max_iters = 300;
  double grad_tol = 1e-9;
  double fd_rel_step = 1e-5;
  std::size_t n_starts = 5;
  std::uint64_t seed = 1234;
  std::vector<double> penalties = {1e1, 1e2, 1e3, 1e4};
  double skeleton_dt = 0.0;  // 0 = t_end / 128
};

struct RateTraceEntry {
  std::size_t start_index = 0;
  double penalty = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  double cost = 0.0;
  double endpoint_gap = 0.0;
};

struct RateResult {
  double value = 0.0;          // L at the argmin, recomputed via cost_total
  ControlPair argmin;
  double endpoint_gap = 0.0;   // |Xhat_T - target|
  std::vector<RateTraceEntry> trace;
  std::vector<std::string> warnings;  // budget-exceeded post-hoc checks land here

  std::string to_json() const;
};

// Minimizes L(psi, phi) + penalty |Xhat_T - target|^2 with an increasing
// penalty ladder until the endpoint gap is within tol_hit; phi = exp(eta)
// keeps the tilt positive; gradients are central finite differences on
// the control coefficients; multi-start with deterministic tie-breaking.
// Throws NumericsError if no start reaches the target after the ladder.
RateResult rate_endpoint(const ModelSpec& spec, const AveragedPath& averaged,
                         std::span<const double> target, double tol_hit, std::size_t m1,
                         std::size_t m2, const OptimizerConfig& opt);

}  // namespace mvldp

#endif
