#ifndef MVLDP_SDE_HPP
#define MVLDP_SDE_HPP

// Monte Carlo engine: jump-adapted Euler stepping of the coupled
// slow-fast particle system and of its controlled counterpart, with
// counter-based per-particle randomness. A step is a parallel map over
// particles against the measure frozen from the previous step, followed
// by a barrier; runs are bit-identical at any thread count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvldp/control.hpp"
#include "mvldp/model.hpp"

namespace mvldp {

struct SimConfig {
  double epsilon = 0.1;
  double delta = 0.01;
  double t_end = 1.0;
  double dt = 1e-3;
  std::size_t n_particles = 1;
  std::uint64_t seed = 0;
  std::vector<double> x0 = {0.0};
  std::vector<double> y0 = {0.0};
  std::size_t record_stride = 1;  // keep every k-th step in the PathRecord
  double block_delta = 0.0;       // > 0 turns on the auxiliary block process

  // Throws ConfigError unless 0 < dt <= delta/10 and 0 < delta <= epsilon.
  // Returns warnings (delta > epsilon^2 regime, etc.) instead of failing.
  std::vector<std::string> validate(const ModelSpec& spec) const;
};

struct ParticleEnsemble {
  double time = 0.0;
  std::size_t n_particles = 0;
  int dim = 0;
  std::vector<double> slow;  // flat [N x n]
  std::vector<double> fast;  // flat [N x n]

  EmpiricalMeasure slow_marginal() const {
    return EmpiricalMeasure::uniform(slow, dim);
  }
  std::span<const double> slow_point(std::size_t p) const {
    return {slow.data() + p * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::span<const double> fast_point(std::size_t p) const {
    return {fast.data() + p * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

struct PathRecord {
  std::vector<double> times;               // recorded grid, first = 0, last = T
  std::vector<ParticleEnsemble> ensembles; // snapshots at `times`
  std::vector<double> mean_jump_count_at;  // cumulative mean jumps per recorded time
  std::vector<double> sup_abs_slow;        // per-particle running sup |X_t|
  std::vector<std::size_t> jump_counts;    // per-particle accepted jumps
  std::vector<double> log_weights;         // per-particle log dP/dQ (controlled runs)
  double mean_y_sq_integral = 0.0;         // mean over particles of int |Y|^2 dt
  double block_aux_l2 = 0.0;               // mean over particles of int |Y - Ycheck|^2 dt
  double t_end = 0.0;

  const ParticleEnsemble& final_ensemble() const { return ensembles.back(); }
};

// Jump times as exponential gaps at rate rate_scale * levy.total_rate,
// with marks from the mark sampler; sorted by construction.
struct JumpEvent {
  double time;
  std::vector<double> mark;
};
std::vector<JumpEvent> sample_compound_poisson(const LevyMeasureSpec& levy, double rate_scale,
                                               double horizon, RngStream& time_stream,
                                               RngStream& mark_stream);

// Euler-Maruyama on the fixed dt grid with per-particle jump insertion.
// The compensated jump integral contributes -int g dnu per unit time to
// the slow drift between jumps and an epsilon * g kick at each jump.
PathRecord simulate_coupled(const ModelSpec& spec, const SimConfig& cfg);

// Controlled dynamics: slow gains sigma1 psi dt and jumps at intensity
// phi_t lambda / epsilon (thinning against sup phi); fast gains
// sigma2 psi / sqrt(epsilon delta) dt. The compensator stays (1/eps) nu.
// With psi == 0 and phi == 1 the paths coincide bit-for-bit with
// simulate_coupled at the same seed. Per-particle log dP/dQ weights are
// recorded for importance sampling.
PathRecord simulate_controlled(const ModelSpec& spec, const SimConfig& cfg,
                               const ControlPair& control);

struct IncrementStats {
  std::vector<double> deltas;
  std::vector<double> mean_sq;  // E |X_t - X_{t(Delta)}|^2 per Delta
  double loglog_slope = 0.0;    // least-squares slope of log mean_sq vs log Delta
};

// Block-increment diagnostics over the recorded grid; every Delta must be
// at least the recording stride and at most t_end.
IncrementStats path_increment_stats(const PathRecord& record,
                                    const std::vector<double>& deltas);

// Summary CSV: time, mean |X|, E|X|^2, cumulative mean jump count.
void write_path_summary_csv(const PathRecord& record, const std::string& path);

// Full trajectories: flat little-endian float64 file, snapshots row-major
// [time][particle][dim], plus a JSON sidecar describing the layout.
void write_path_binary(const PathRecord& record, const std::string& base_path);

}  // namespace mvldp

#endif
