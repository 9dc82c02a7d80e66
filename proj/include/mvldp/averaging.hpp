#ifndef MVLDP_AVERAGING_HPP
#define MVLDP_AVERAGING_HPP

// Frozen fast process, invariant-measure estimation, averaged drift and
// ODE, and the strong-averaging convergence experiment with Khasminskii
// block diagnostics.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvldp/model.hpp"
#include "mvldp/sde.hpp"

namespace mvldp {

struct FrozenFastConfig {
  double burn_in = 5.0;      // relaxation heuristic: >= 5 / c4
  std::size_t n_samples = 10000;
  double thinning = 0.5;     // time between retained samples; default 1 / c4
  double dt_fast = 0.01;
  std::uint64_t seed = 0;

  static FrozenFastConfig defaults_for(const AssumptionParams& constants,
                                       std::size_t n_samples, std::uint64_t seed);
  std::vector<std::string> validate(const AssumptionParams& constants) const;
};

// Single long trajectory of the frozen fast equation
//   dY~ = b2(x, mu, Y~) dt + sigma2(x, mu, Y~) dW,
// sampled after burn-in with thinning. Throws NumericsError if the
// trajectory diverges (dissipativity violation).
EmpiricalMeasure invariant_measure_estimate(const ModelSpec& spec, std::span<const double> x,
                                            const EmpiricalMeasure& mu,
                                            const FrozenFastConfig& cfg);

struct AveragedDriftEstimate {
  std::vector<double> value;
  std::vector<double> std_error;  // batch-means standard error, zero if exact
  bool sampled = false;           // false when b1 is y-independent (short-circuit)
};

// Monte Carlo average of b1(x, mu, Y~) over invariant samples.
AveragedDriftEstimate averaged_drift(const ModelSpec& spec, std::span<const double> x,
                                     const EmpiricalMeasure& mu, const FrozenFastConfig& cfg);

struct DriftMode {
  enum class Kind { analytic, monte_carlo } kind = Kind::analytic;
  FrozenFastConfig frozen;                // used by monte_carlo
  double se_tol = 0.05;                   // per-evaluation noise gate (monte_carlo)
  static DriftMode analytic() { return DriftMode{}; }
  static DriftMode monte_carlo(FrozenFastConfig cfg, double se_tol = 0.05) {
    DriftMode m;
    m.kind = Kind::monte_carlo;
    m.frozen = cfg;
    m.se_tol = se_tol;
    return m;
  }
};

// Solution of the averaged ODE dXbar = b1bar(Xbar, delta_{Xbar}) dt on a
// uniform grid, with node drifts kept for dense cubic-Hermite evaluation.
struct AveragedPath {
  static constexpr bool law_is_dirac = true;  // L_{Xbar_t} = delta_{Xbar_t}

  std::vector<double> times;
  std::vector<double> states;  // flat [times x n]
  std::vector<double> drifts;  // flat [times x n], b1bar at the nodes
  int dim = 1;
  double drift_se_aggregate = 0.0;  // sqrt(sum (dt * se)^2), zero in analytic mode

  std::span<const double> state_at_node(std::size_t j) const {
    return {states.data() + j * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  void eval(double t, std::span<double> out) const;             // cubic Hermite
  void eval_derivative(double t, std::span<double> out) const;  // Hermite derivative
  double t_end() const { return times.empty() ? 0.0 : times.back(); }
};

// Classical 4th-order one-step integration. Analytic mode requires the
// model's averaged-drift hook; monte-carlo mode estimates b1bar from the
// frozen fast process and throws NumericsError when the drift standard
// error exceeds mode.se_tol (advising a larger n_samples).
AveragedPath averaged_ode_solve(const ModelSpec& spec, std::span<const double> x0,
                                double t_end, double dt, const DriftMode& mode);

struct AveragingExperimentRow {
  double epsilon = 0.0;
  double delta = 0.0;
  double block_delta = 0.0;  // Khasminskii Delta, default sqrt(delta)
  double error = 0.0;        // estimate of E sup_t |X - Xbar|^2
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_rep = 0;
  double aux_block_err = 0.0;  // E int |Y - Ycheck|^2 dt at block_delta
};

// Couples each epsilon-run against the single averaged path and reports
// the sup-norm squared error with bootstrap CIs over replicates.
std::vector<AveragingExperimentRow> averaging_error_experiment(
    const ModelSpec& spec, const SimConfig& cfg_base, const std::vector<double>& eps_list,
    const std::function<double(double)>& delta_rule, std::size_t n_rep,
    const DriftMode& mode = DriftMode::analytic());

void write_averaging_csv(const std::vector<AveragingExperimentRow>& rows,
                         const std::string& path);

}  // namespace mvldp

#endif
