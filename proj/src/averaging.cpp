#include "mvldp/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvldp/errors.hpp"
#include "mvldp/parallel.hpp"

namespace mvldp {

FrozenFastConfig FrozenFastConfig::defaults_for(const AssumptionParams& constants,
                                                std::size_t n_samples, std::uint64_t seed) {
  FrozenFastConfig cfg;
  cfg.burn_in = 5.0 / constants.c4;
  cfg.thinning = 1.0 / constants.c4;
  cfg.dt_fast = std::min(0.01, 0.05 / constants.c4);
  cfg.n_samples = n_samples;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::string> FrozenFastConfig::validate(const AssumptionParams& constants) const {
  if (!(burn_in >= 0.0) || !(thinning > 0.0) || !(dt_fast > 0.0) || n_samples < 1)
    throw ConfigError("FrozenFastConfig: burn_in >= 0, thinning > 0, dt_fast > 0, n_samples >= 1");
  std::vector<std::string> warnings;
  if (burn_in < 5.0 / constants.c4) {
    std::ostringstream msg;
    msg << "FrozenFastConfig: burn_in " << burn_in << " below the relaxation heuristic "
        << 5.0 / constants.c4 << " (= 5/c4)";
    warnings.push_back(msg.str());
  }
  return warnings;
}

namespace {

// Euler stepping of the frozen fast equation (unit time scale).
class FrozenFastWalker {
 public:
  FrozenFastWalker(const ModelSpec& spec, std::span<const double> x, const MeasureView& mu,
                   double dt, std::uint64_t seed)
      : spec_(spec), x_(x), mu_(mu), dt_(dt), sqrt_dt_(std::sqrt(dt)),
        rng_(seed, 0, rng_source::frozen_fast) {
    n_ = spec.dim_fast;
    d_ = spec.dim_noise;
    y_.assign(x.begin(), x.end());  // start the chain at the frozen slow point
    b_.resize(n_);
    s_.resize(static_cast<std::size_t>(n_) * d_);
    dw_.resize(d_);
  }

  void advance(double horizon) {
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt_ - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) step();
  }

  void step() {
    std::span<const double> ys(y_.data(), y_.size());
    spec_.b2(x_, mu_, ys, b_);
    spec_.sigma2(x_, mu_, ys, s_);
    for (int j = 0; j < d_; ++j) dw_[j] = sqrt_dt_ * rng_.next_normal();
    for (int i = 0; i < n_; ++i) {
      double sdw = 0.0;
      const double* row = s_.data() + static_cast<std::size_t>(i) * d_;
      for (int j = 0; j < d_; ++j) sdw += row[j] * dw_[j];
      y_[i] += b_[i] * dt_ + sdw;
      if (!std::isfinite(y_[i]))
        throw NumericsError(
            "invariant_measure_estimate: fast process diverged (dissipativity violation?)");
    }
  }

  std::span<const double> state() const { return {y_.data(), y_.size()}; }

 private:
  const ModelSpec& spec_;
  std::span<const double> x_;
  const MeasureView& mu_;
  double dt_, sqrt_dt_;
  RngStream rng_;
  int n_, d_;
  std::vector<double> y_, b_, s_, dw_;
};

}  // namespace

EmpiricalMeasure invariant_measure_estimate(const ModelSpec& spec, std::span<const double> x,
                                            const EmpiricalMeasure& mu,
                                            const FrozenFastConfig& cfg) {
  spec.validate();
  cfg.validate(spec.constants);
  const MeasureView view = mu.view();
  FrozenFastWalker walker(spec, x, view, cfg.dt_fast, cfg.seed);
  walker.advance(cfg.burn_in);

  const std::size_t thin_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.thinning / cfg.dt_fast)));
  std::vector<double> samples;
  samples.reserve(cfg.n_samples * static_cast<std::size_t>(spec.dim_fast));
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    for (std::size_t k = 0; k < thin_steps; ++k) walker.step();
    const auto y = walker.state();
    samples.insert(samples.end(), y.begin(), y.end());
  }
  return EmpiricalMeasure::uniform(std::move(samples), spec.dim_fast);
}

AveragedDriftEstimate averaged_drift(const ModelSpec& spec, std::span<const double> x,
                                     const EmpiricalMeasure& mu, const FrozenFastConfig& cfg) {
  const int n = spec.dim_slow;
  AveragedDriftEstimate est;
  est.value.assign(n, 0.0);
  est.std_error.assign(n, 0.0);
  const MeasureView view = mu.view();

  if (!spec.b1_depends_on_y) {
    std::vector<double> y(static_cast<std::size_t>(spec.dim_fast), 0.0);
    spec.b1(x, view, y, est.value);
    est.sampled = false;
    return est;
  }

  const EmpiricalMeasure inv = invariant_measure_estimate(spec, x, mu, cfg);
  const std::size_t m = inv.size();
  std::vector<double> b(static_cast<std::size_t>(n));
  // batch means over the (temporally ordered) chain give an
  // autocorrelation-robust standard error
  const std::size_t n_batches = std::min<std::size_t>(50, m);
  std::vector<double> batch_acc(n_batches * static_cast<std::size_t>(n), 0.0);
  std::vector<std::size_t> batch_count(n_batches, 0);
  for (std::size_t s = 0; s < m; ++s) {
    spec.b1(x, view, inv.point(s), b);
    const std::size_t bi = s * n_batches / m;
    for (int i = 0; i < n; ++i) {
      est.value[i] += b[i];
      batch_acc[bi * n + i] += b[i];
    }
    ++batch_count[bi];
  }
  for (int i = 0; i < n; ++i) est.value[i] /= static_cast<double>(m);
  if (n_batches >= 2) {
    for (int i = 0; i < n; ++i) {
      double var = 0.0;
      for (std::size_t bi = 0; bi < n_batches; ++bi) {
        const double bm = batch_acc[bi * n + i] / static_cast<double>(batch_count[bi]);
        const double d = bm - est.value[i];
        var += d * d;
      }
      var /= static_cast<double>(n_batches - 1);
      est.std_error[i] = std::sqrt(var / static_cast<double>(n_batches));
    }
  }
  est.sampled = true;
  return est;
}

namespace {

struct DriftEval {
  std::vector<double> value;
  double se_max = 0.0;
};

class DriftField {
 public:
  DriftField(const ModelSpec& spec, const DriftMode& mode) : spec_(spec), mode_(mode) {
    if (mode.kind == DriftMode::Kind::analytic && !spec.averaged_drift_hook)
      throw ModelError("averaged_ode_solve: analytic mode requires the averaged-drift hook");
  }

  DriftEval operator()(std::span<const double> x) {
    DriftEval out;
    out.value.assign(static_cast<std::size_t>(spec_.dim_slow), 0.0);
    const EmpiricalMeasure dirac = EmpiricalMeasure::dirac(x);
    if (mode_.kind == DriftMode::Kind::analytic) {
      spec_.averaged_drift_hook(x, dirac.view(), out.value);
      return out;
    }
    FrozenFastConfig cfg = mode_.frozen;
    cfg.seed = derive_seed(mode_.frozen.seed, ++eval_counter_);
    const AveragedDriftEstimate est = averaged_drift(spec_, x, dirac, cfg);
    out.value = est.value;
    for (double se : est.std_error) out.se_max = std::max(out.se_max, se);
    if (out.se_max > mode_.se_tol) {
      std::ostringstream msg;
      msg << "averaged drift too noisy: standard error " << out.se_max << " exceeds tolerance "
          << mode_.se_tol << "; increase FrozenFastConfig.n_samples";
      throw NumericsError(msg.str());
    }
    return out;
  }

 private:
  const ModelSpec& spec_;
  DriftMode mode_;
  std::uint64_t eval_counter_ = 0;
};

}  // namespace

void AveragedPath::eval(double t, std::span<double> out) const {
  const std::size_t m = times.size();
  if (m == 1 || t <= times.front()) {
    const auto x = state_at_node(0);
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  if (t >= times.back()) {
    const auto x = state_at_node(m - 1);
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
  const double h = times[j + 1] - times[j];
  const double s = (t - times[j]) / h;
  const double h00 = (2 * s - 3) * s * s + 1;
  const double h10 = ((s - 2) * s + 1) * s;
  const double h01 = (3 - 2 * s) * s * s;
  const double h11 = (s - 1) * s * s;
  const double* x0 = states.data() + j * static_cast<std::size_t>(dim);
  const double* x1 = states.data() + (j + 1) * static_cast<std::size_t>(dim);
  const double* f0 = drifts.data() + j * static_cast<std::size_t>(dim);
  const double* f1 = drifts.data() + (j + 1) * static_cast<std::size_t>(dim);
  for (int i = 0; i < dim; ++i)
    out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
}

void AveragedPath::eval_derivative(double t, std::span<double> out) const {
  const std::size_t m = times.size();
  std::size_t j;
  if (t <= times.front()) j = 0;
  else if (t >= times.back()) j = m - 2;
  else
    j = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) -
                                 times.begin()) - 1;
  const double h = times[j + 1] - times[j];
  const double s = std::clamp((t - times[j]) / h, 0.0, 1.0);
  const double g00 = (6 * s * s - 6 * s) / h;
  const double g10 = 3 * s * s - 4 * s + 1;
  const double g01 = (6 * s - 6 * s * s) / h;
  const double g11 = 3 * s * s - 2 * s;
  const double* x0 = states.data() + j * static_cast<std::size_t>(dim);
  const double* x1 = states.data() + (j + 1) * static_cast<std::size_t>(dim);
  const double* f0 = drifts.data() + j * static_cast<std::size_t>(dim);
  const double* f1 = drifts.data() + (j + 1) * static_cast<std::size_t>(dim);
  for (int i = 0; i < dim; ++i)
    out[i] = g00 * x0[i] + g10 * f0[i] + g01 * x1[i] + g11 * f1[i];
}

AveragedPath averaged_ode_solve(const ModelSpec& spec, std::span<const double> x0,
                                double t_end, double dt, const DriftMode& mode) {
  spec.validate();
  if (!(t_end > 0.0) || !(dt > 0.0))
    throw ConfigError("averaged_ode_solve: t_end and dt must be positive");
  DriftField field(spec, mode);
  const int n = spec.dim_slow;
  const std::size_t n_steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9)));

  AveragedPath path;
  path.dim = n;
  path.times.reserve(n_steps + 1);
  path.states.reserve((n_steps + 1) * static_cast<std::size_t>(n));
  path.drifts.reserve((n_steps + 1) * static_cast<std::size_t>(n));

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> xs(static_cast<std::size_t>(n));
  double se_sq = 0.0;

  DriftEval k1 = field(x);
  path.times.push_back(0.0);
  path.states.insert(path.states.end(), x.begin(), x.end());
  path.drifts.insert(path.drifts.end(), k1.value.begin(), k1.value.end());

  for (std::size_t step = 0; step < n_steps; ++step) {
    const double t0 = static_cast<double>(step) * dt;
    const double t1 = step + 1 == n_steps ? t_end : std::min(t0 + dt, t_end);
    const double h = t1 - t0;

    for (int i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k1.value[i];
    const DriftEval k2 = field(xs);
    for (int i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k2.value[i];
    const DriftEval k3 = field(xs);
    for (int i = 0; i < n; ++i) xs[i] = x[i] + h * k3.value[i];
    const DriftEval k4 = field(xs);
    for (int i = 0; i < n; ++i)
      x[i] += h / 6.0 * (k1.value[i] + 2.0 * k2.value[i] + 2.0 * k3.value[i] + k4.value[i]);
    for (double v : x)
      if (!std::isfinite(v)) throw NumericsError("averaged_ode_solve: state blew up");

    const double se_step =
        std::max(std::max(k1.se_max, k2.se_max), std::max(k3.se_max, k4.se_max));
    se_sq += (h * se_step) * (h * se_step);

    k1 = field(x);
    path.times.push_back(t1);
    path.states.insert(path.states.end(), x.begin(), x.end());
    path.drifts.insert(path.drifts.end(), k1.value.begin(), k1.value.end());
  }
  path.drift_se_aggregate = std::sqrt(se_sq);
  return path;
}

std::vector<AveragingExperimentRow> averaging_error_experiment(
    const ModelSpec& spec, const SimConfig& cfg_base, const std::vector<double>& eps_list,
    const std::function<double(double)>& delta_rule, std::size_t n_rep,
    const DriftMode& mode) {
  if (eps_list.empty()) throw ConfigError("averaging_error_experiment: empty eps_list");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw ConfigError("averaging_error_experiment: eps_list must be strictly decreasing");
  if (n_rep < 1) throw ConfigError("averaging_error_experiment: n_rep must be >= 1");

  const int n = spec.dim_slow;
  const double avg_dt = cfg_base.t_end / 1000.0;
  const AveragedPath xbar =
      averaged_ode_solve(spec, cfg_base.x0, cfg_base.t_end, avg_dt, mode);

  std::vector<AveragingExperimentRow> rows;
  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    const double delta = delta_rule(eps);
    if (!(delta > 0.0) || delta > eps * eps * (1.0 + 1e-12))
      throw ConfigError("averaging_error_experiment: delta_rule must give 0 < delta <= eps^2");
    const double block_delta = std::sqrt(delta);

    SimConfig cfg = cfg_base;
    cfg.epsilon = eps;
    cfg.delta = delta;
    cfg.dt = std::min(cfg_base.dt, delta / 10.0);
    cfg.block_delta = block_delta;
    const std::size_t n_steps =
        static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    cfg.record_stride = std::max<std::size_t>(1, n_steps / 4000);

    std::vector<double> rep_vals(n_rep, 0.0), rep_aux(n_rep, 0.0);
    std::vector<std::string> rep_errors(n_rep);
    par::for_each_index(static_cast<std::ptrdiff_t>(n_rep), [&](std::ptrdiff_t r) {
      try {
        SimConfig rcfg = cfg;
        rcfg.seed = derive_seed(cfg_base.seed, 1000 * (ei + 1) + static_cast<std::size_t>(r));
        const PathRecord rec = simulate_coupled(spec, rcfg);
        const std::size_t N = rec.ensembles.front().n_particles;
        std::vector<double> vmax(N, 0.0);
        std::vector<double> ref(static_cast<std::size_t>(n));
        for (std::size_t j = 0; j < rec.times.size(); ++j) {
          xbar.eval(rec.times[j], ref);
          const auto& slow = rec.ensembles[j].slow;
          for (std::size_t p = 0; p < N; ++p) {
            double d2 = 0.0;
            for (int i = 0; i < n; ++i) {
              const double d = slow[p * static_cast<std::size_t>(n) + i] - ref[i];
              d2 += d * d;
            }
            vmax[p] = std::max(vmax[p], d2);
          }
        }
        double acc = 0.0;
        for (double v : vmax) acc += v;
        rep_vals[static_cast<std::size_t>(r)] = acc / static_cast<double>(N);
        rep_aux[static_cast<std::size_t>(r)] = rec.block_aux_l2;
      } catch (const std::exception& e) {
        rep_errors[static_cast<std::size_t>(r)] = e.what();
      }
    });
    for (const auto& err : rep_errors)
      if (!err.empty()) throw NumericsError("averaging_error_experiment replicate: " + err);

    AveragingExperimentRow row;
    row.epsilon = eps;
    row.delta = delta;
    row.block_delta = block_delta;
    row.n_rep = n_rep;
    double mean = 0.0, aux = 0.0;
    for (std::size_t r = 0; r < n_rep; ++r) {
      mean += rep_vals[r];
      aux += rep_aux[r];
    }
    mean /= static_cast<double>(n_rep);
    aux /= static_cast<double>(n_rep);
    row.error = mean;
    row.aux_block_err = aux;

    // percentile bootstrap over replicate means
    const std::size_t B = 1000;
    std::vector<double> boot(B);
    RngStream boot_rng(derive_seed(cfg_base.seed, 777 + ei), 0, rng_source::bootstrap);
    for (std::size_t b = 0; b < B; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < n_rep; ++r)
        s += rep_vals[boot_rng.next_u64() % n_rep];
      boot[b] = s / static_cast<double>(n_rep);
    }
    std::sort(boot.begin(), boot.end());
    row.ci_lo = boot[static_cast<std::size_t>(0.025 * static_cast<double>(B - 1))];
    row.ci_hi = boot[static_cast<std::size_t>(0.975 * static_cast<double>(B - 1))];
    rows.push_back(row);
  }
  return rows;
}

void write_averaging_csv(const std::vector<AveragingExperimentRow>& rows,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epsilon,delta,Delta,error,ci_lo,ci_hi,n_rep\n";
  char buf[512];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", row.epsilon,
                  row.delta, row.block_delta, row.error, row.ci_lo, row.ci_hi, row.n_rep);
    out << buf;
  }
}

}  // namespace mvldp
