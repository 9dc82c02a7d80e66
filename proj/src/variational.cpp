#include "mvldp/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mvldp/errors.hpp"
#include "mvldp/parallel.hpp"

namespace mvldp {

double entropy_ell(double r) {
  if (r < 0.0) throw ConfigError("entropy_ell: r must be >= 0");
  if (r == 0.0) return 1.0;
  return r * std::log(r) - r + 1.0;
}

double cost_l1(const PiecewiseConstant& psi) {
  psi.validate("cost_l1 psi");
  double acc = 0.0;
  for (std::size_t i = 0; i < psi.intervals(); ++i) {
    const double dt = psi.edges[i + 1] - psi.edges[i];
    double sq = 0.0;
    for (int k = 0; k < psi.dim; ++k) {
      const double v = psi.values[i * static_cast<std::size_t>(psi.dim) + k];
      sq += v * v;
    }
    acc += 0.5 * sq * dt;
  }
  return acc;
}

double cost_l2(const PiecewiseConstant& phi, const LevyMeasureSpec& levy, double t_end) {
  phi.validate("cost_l2 phi");
  if (phi.dim != 1) throw ConfigError("cost_l2: phi must be scalar");
  if (levy.total_rate == 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.intervals(); ++i) {
    const double lo = phi.edges[i];
    const double hi = std::min(phi.edges[i + 1], t_end);
    if (hi <= lo) break;
    const double v = phi.values[i];
    if (!(v > 0.0)) throw ConfigError("cost_l2: phi must be strictly positive");
    acc += entropy_ell(v) * (hi - lo);
  }
  return levy.total_rate * acc;
}

double cost_total(const ControlPair& control, const LevyMeasureSpec& levy, double t_end) {
  return cost_l1(control.psi) + cost_l2(control.phi, levy, t_end);
}

std::vector<std::string> budget_warnings(const ControlPair& control,
                                         const LevyMeasureSpec& levy, double t_end) {
  std::vector<std::string> warnings;
  if (!std::isfinite(control.budget)) return warnings;
  const double l1 = cost_l1(control.psi);
  const double l2 = cost_l2(control.phi, levy, t_end);
  if (l1 > control.budget) {
    std::ostringstream msg;
    msg << "control budget exceeded: L1 = " << l1 << " > m = " << control.budget;
    warnings.push_back(msg.str());
  }
  if (l2 > control.budget) {
    std::ostringstream msg;
    msg << "control budget exceeded: L2 = " << l2 << " > m = " << control.budget;
    warnings.push_back(msg.str());
  }
  return warnings;
}

namespace {

// Right-hand side of the skeleton equation at fixed control values.
class SkeletonRhs {
 public:
  SkeletonRhs(const ModelSpec& spec, const AveragedPath& averaged, const DriftMode& mode)
      : spec_(spec), averaged_(averaged), mode_(mode) {
    n_ = spec.dim_slow;
    d_ = spec.dim_noise;
    xbar_.resize(n_);
    drift_.resize(n_);
    s1_.resize(static_cast<std::size_t>(n_) * d_);
    meang_.resize(n_);
    gtmp_.resize(n_);
    use_hook_ = static_cast<bool>(spec.averaged_drift_hook);
    if (spec.levy.total_rate > 0.0 && !spec.mean_g) {
      constexpr std::size_t n_stencil = 256;
      const std::size_t md = static_cast<std::size_t>(spec.levy.mark_dim);
      stencil_.resize(n_stencil * md);
      RngStream sr(mode.frozen.seed, 0, rng_source::stencil);
      for (std::size_t m = 0; m < n_stencil; ++m)
        spec.levy.mark_sampler(sr, std::span<double>(stencil_.data() + m * md, md));
    }
  }

  void operator()(double t, std::span<const double> x, std::span<const double> psi,
                  double phi, std::span<double> out) {
    averaged_.eval(t, xbar_);
    const EmpiricalMeasure law = EmpiricalMeasure::dirac(xbar_);
    const MeasureView mu = law.view();

    if (use_hook_) {
      spec_.averaged_drift_hook(x, mu, drift_);
    } else {
      // falls back to the Monte Carlo averaged drift, noise recorded
      FrozenFastConfig cfg = mode_.frozen;
      cfg.seed = derive_seed(mode_.frozen.seed, ++eval_counter_);
      const AveragedDriftEstimate est = averaged_drift(spec_, x, law, cfg);
      drift_ = est.value;
      for (double se : est.std_error) se_accum_ = std::max(se_accum_, se);
    }

    spec_.sigma1(x, mu, s1_);
    mean_g(t, x, mu);
    for (int i = 0; i < n_; ++i) {
      double s1psi = 0.0;
      const double* row = s1_.data() + static_cast<std::size_t>(i) * d_;
      for (int j = 0; j < d_; ++j) s1psi += row[j] * psi[j];
      out[i] = drift_[i] + s1psi + (phi - 1.0) * meang_[i];
    }
  }

  double se_accum() const { return se_accum_; }

 private:
  void mean_g(double t, std::span<const double> x, const MeasureView& mu) {
    if (spec_.levy.total_rate <= 0.0) {
      std::fill(meang_.begin(), meang_.end(), 0.0);
      return;
    }
    if (spec_.mean_g) {
      spec_.mean_g(t, x, mu, meang_);
      return;
    }
    const std::size_t md = static_cast<std::size_t>(spec_.levy.mark_dim);
    const std::size_t n_stencil = stencil_.size() / md;
    std::fill(meang_.begin(), meang_.end(), 0.0);
    for (std::size_t m = 0; m < n_stencil; ++m) {
      spec_.g(t, x, mu, std::span<const double>(stencil_.data() + m * md, md), gtmp_);
      for (int i = 0; i < n_; ++i) meang_[i] += gtmp_[i];
    }
    const double scale = spec_.levy.total_rate / static_cast<double>(n_stencil);
    for (int i = 0; i < n_; ++i) meang_[i] *= scale;
  }

  const ModelSpec& spec_;
  const AveragedPath& averaged_;
  DriftMode mode_;
  int n_, d_;
  bool use_hook_ = false;
  std::uint64_t eval_counter_ = 0;
  double se_accum_ = 0.0;
  std::vector<double> xbar_, drift_, s1_, meang_, gtmp_, stencil_;
};

void rk4_step(SkeletonRhs& rhs, double t, double h, std::span<const double> psi, double phi,
              std::vector<double>& x, std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4, std::vector<double>& xs) {
  const int n = static_cast<int>(x.size());
  rhs(t, x, psi, phi, k1);
  for (int i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k1[i];
  rhs(t + 0.5 * h, xs, psi, phi, k2);
  for (int i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k2[i];
  rhs(t + 0.5 * h, xs, psi, phi, k3);
  for (int i = 0; i < n; ++i) xs[i] = x[i] + h * k3[i];
  rhs(t + h, xs, psi, phi, k4);
  for (int i = 0; i < n; ++i)
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

SkeletonPath skeleton_solve(const ModelSpec& spec, const AveragedPath& averaged,
                            const ControlPair& control, double dt, const DriftMode& mode) {
  spec.validate();
  const double t_end = averaged.t_end();
  if (!(t_end > 0.0)) throw ConfigError("skeleton_solve: averaged path must cover (0, T]");
  if (!(dt > 0.0)) throw ConfigError("skeleton_solve: dt must be positive");
  control.validate(t_end);
  if (control.psi.dim != spec.dim_noise)
    throw ConfigError("skeleton_solve: psi dimension must match the Brownian dimension");

  SkeletonRhs rhs(spec, averaged, mode);
  const int n = spec.dim_slow;

  // merge control breakpoints into the time grid so the RHS stays smooth
  // inside every integration step
  std::vector<double> breaks = {0.0, t_end};
  for (double e : control.psi.edges)
    if (e > 0.0 && e < t_end) breaks.push_back(e);
  for (double e : control.phi.edges)
    if (e > 0.0 && e < t_end) breaks.push_back(e);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-15; }),
               breaks.end());

  SkeletonPath path;
  path.dim = n;
  std::vector<double> x(averaged.state_at_node(0).begin(), averaged.state_at_node(0).end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), xs(n), xh(n);
  path.times.push_back(0.0);
  path.states.insert(path.states.end(), x.begin(), x.end());

  double residual = 0.0;
  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    const double lo = breaks[seg];
    const double hi = breaks[seg + 1];
    const double mid = 0.5 * (lo + hi);
    const std::span<const double> psi = control.psi.value_at(mid);
    const double phi = control.phi.scalar_at(mid);
    const std::size_t n_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / dt - 1e-9)));
    const double h = (hi - lo) / static_cast<double>(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = lo + static_cast<double>(k) * h;
      // step-doubling defect tracked as the solver residual
      xh = x;
      rk4_step(rhs, t, 0.5 * h, psi, phi, xh, k1, k2, k3, k4, xs);
      rk4_step(rhs, t + 0.5 * h, 0.5 * h, psi, phi, xh, k1, k2, k3, k4, xs);
      rk4_step(rhs, t, h, psi, phi, x, k1, k2, k3, k4, xs);
      double defect = 0.0;
      for (int i = 0; i < n; ++i) defect = std::max(defect, std::abs(x[i] - xh[i]));
      residual = std::max(residual, defect);
      for (double v : x)
        if (!std::isfinite(v)) throw NumericsError("skeleton_solve: state blew up");
      path.times.push_back(t + h);
      path.states.insert(path.states.end(), x.begin(), x.end());
    }
  }
  path.residual_norm = residual;
  path.drift_se_aggregate = rhs.se_accum();
  return path;
}

namespace {

struct ControlParam {
  std::size_t m1, m2;
  int d;
  double t_end;

  std::size_t size() const { return m1 * static_cast<std::size_t>(d) + m2; }

  ControlPair unpack(std::span<const double> theta) const {
    ControlPair c;
    c.psi = PiecewiseConstant::uniform_grid(t_end, m1, d);
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(m1 * d),
              c.psi.values.begin());
    c.phi = PiecewiseConstant::uniform_grid(t_end, m2, 1);
    for (std::size_t i = 0; i < m2; ++i)
      c.phi.values[i] = std::exp(theta[m1 * static_cast<std::size_t>(d) + i]);
    return c;
  }
};

// Dense BFGS with Armijo backtracking; dimensions here are tiny.
template <typename F>
std::size_t bfgs_minimize(F&& f, std::vector<double>& theta, std::size_t max_iters,
                          double grad_tol, double fd_rel_step) {
  const std::size_t n = theta.size();
  auto gradient = [&](const std::vector<double>& p, std::vector<double>& g) {
    std::vector<double> q = p;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = fd_rel_step * std::max(1.0, std::abs(p[i]));
      q[i] = p[i] + h;
      const double fp = f(q);
      q[i] = p[i] - h;
      const double fm = f(q);
      q[i] = p[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
  };

  std::vector<double> H(n * n, 0.0);  // inverse Hessian approximation
  for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
  std::vector<double> g(n), g_new(n), dir(n), theta_new(n), s(n), y(n), Hy(n);

  double fx = f(theta);
  gradient(theta, g);
  std::size_t iter = 0;
  for (; iter < max_iters; ++iter) {
    double gnorm = 0.0;
    for (double v : g) gnorm = std::max(gnorm, std::abs(v));
    if (gnorm <= grad_tol * (1.0 + std::abs(fx))) break;

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * g[j];
      dir[i] = -acc;
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += dir[i] * g[i];
    if (slope >= 0.0) {  // reset to steepest descent if curvature went bad
      for (std::size_t i = 0; i < n; ++i) {
        std::fill(H.begin() + static_cast<std::ptrdiff_t>(i * n),
                  H.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), 0.0);
        H[i * n + i] = 1.0;
        dir[i] = -g[i];
      }
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope -= g[i] * g[i];
      if (slope == 0.0) break;
    }

    double step = 1.0;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t i = 0; i < n; ++i) theta_new[i] = theta[i] + step * dir[i];
      f_new = f(theta_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    gradient(theta_new, g_new);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = theta_new[i] - theta[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12) {  // BFGS update on the inverse Hessian
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * y[j];
        Hy[i] = acc;
      }
      double yHy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yHy += y[i] * Hy[i];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          H[i * n + j] += (1.0 + rho * yHy) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
    }
    theta = theta_new;
    g = g_new;
    const double improvement = fx - f_new;
    fx = f_new;
    if (improvement < 1e-15 * (1.0 + std::abs(fx))) {
      ++iter;
      break;
    }
  }
  return iter;
}

}  // namespace

std::string RateResult::to_json() const {
  nlohmann::json j;
  j["value"] = value;
  j["endpoint_gap"] = endpoint_gap;
  j["argmin"] = nlohmann::json::parse(argmin.to_json());
  j["warnings"] = warnings;
  nlohmann::json trace_json = nlohmann::json::array();
  for (const auto& e : trace)
    trace_json.push_back({{"start_index", e.start_index},
                          {"penalty", e.penalty},
                          {"iterations", e.iterations},
                          {"objective", e.objective},
                          {"cost", e.cost},
                          {"endpoint_gap", e.endpoint_gap}});
  j["trace"] = trace_json;
  return j.dump(2);
}

RateResult rate_endpoint(const ModelSpec& spec, const AveragedPath& averaged,
                         std::span<const double> target, double tol_hit, std::size_t m1,
                         std::size_t m2, const OptimizerConfig& opt) {
  spec.validate();
  if (m1 < 1 || m2 < 1) throw ConfigError("rate_endpoint: m1 and m2 must be >= 1");
  if (!(tol_hit > 0.0)) throw ConfigError("rate_endpoint: tol_hit must be positive");
  for (double v : target)
    if (!std::isfinite(v)) throw ConfigError("rate_endpoint: target must be finite");
  const double t_end = averaged.t_end();
  const double dt = opt.skeleton_dt > 0.0 ? opt.skeleton_dt : t_end / 128.0;

  const ControlParam param{m1, m2, spec.dim_noise, t_end};
  const int n = spec.dim_slow;

  auto endpoint_gap = [&](const ControlPair& c) {
    const SkeletonPath sk = skeleton_solve(spec, averaged, c, dt);
    const auto xT = sk.endpoint();
    double gap_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = xT[i] - target[i];
      gap_sq += d * d;
    }
    return std::sqrt(gap_sq);
  };

  struct StartOutcome {
    bool feasible = false;
    double cost = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    std::vector<double> theta;
    std::vector<RateTraceEntry> trace;
  };
  std::vector<StartOutcome> outcomes(opt.n_starts);

  par::for_each_index(static_cast<std::ptrdiff_t>(opt.n_starts), [&](std::ptrdiff_t si) {
    const std::size_t s = static_cast<std::size_t>(si);
    StartOutcome& out = outcomes[s];
    std::vector<double> theta(param.size(), 0.0);
    if (s > 0) {  // start 0 is the null control; the rest perturb it
      RngStream rng(opt.seed, s, rng_source::optimizer);
      for (double& v : theta) v = 0.5 * (2.0 * rng.next_u01() - 1.0);
    }

    double gap = std::numeric_limits<double>::infinity();
    for (double penalty : opt.penalties) {
      auto objective = [&](const std::vector<double>& th) {
        const ControlPair c = param.unpack(th);
        const double cost = cost_total(c, spec.levy, t_end);
        const double g = endpoint_gap(c);
        return cost + penalty * g * g;
      };
      const std::size_t iters =
          bfgs_minimize(objective, theta, opt.max_iters, opt.grad_tol, opt.fd_rel_step);
      const ControlPair c = param.unpack(theta);
      gap = endpoint_gap(c);
      RateTraceEntry entry;
      entry.start_index = s;
      entry.penalty = penalty;
      entry.iterations = iters;
      entry.cost = cost_total(c, spec.levy, t_end);
      entry.endpoint_gap = gap;
      entry.objective = entry.cost + penalty * gap * gap;
      out.trace.push_back(entry);
      if (gap <= tol_hit) break;
    }
    out.gap = gap;
    out.feasible = gap <= tol_hit;
    const ControlPair c = param.unpack(theta);
    out.cost = cost_total(c, spec.levy, t_end);
    out.theta = std::move(theta);
  });

  // best feasible start; ties by lower cost, then lower start index
  std::size_t best = opt.n_starts;
  for (std::size_t s = 0; s < opt.n_starts; ++s) {
    if (!outcomes[s].feasible) continue;
    if (best == opt.n_starts || outcomes[s].cost < outcomes[best].cost - 1e-15) best = s;
  }
  RateResult result;
  for (const auto& o : outcomes)
    result.trace.insert(result.trace.end(), o.trace.begin(), o.trace.end());
  if (best == opt.n_starts) {
    double min_gap = std::numeric_limits<double>::infinity();
    for (const auto& o : outcomes) min_gap = std::min(min_gap, o.gap);
    std::ostringstream msg;
    msg << "rate_endpoint: endpoint unreachable; best gap " << min_gap
        << " > tol_hit " << tol_hit << " after exhausting the penalty ladder";
    throw NumericsError(msg.str());
  }

  result.argmin = param.unpack(outcomes[best].theta);
  result.endpoint_gap = outcomes[best].gap;
  result.value = cost_total(result.argmin, spec.levy, t_end);
  const double l1 = cost_l1(result.argmin.psi);
  const double l2 = cost_l2(result.argmin.phi, spec.levy, t_end);
  result.argmin.budget = std::max(1.0, std::ceil(std::max(l1, l2)));
  return result;
}

}  // namespace mvldp
