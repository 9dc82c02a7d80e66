#include "mvldp/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mvldp/errors.hpp"
#include "mvldp/parallel.hpp"

namespace mvldp {

std::vector<std::string> SimConfig::validate(const ModelSpec& spec) const {
  spec.validate();
  std::vector<std::string> warnings;
  if (!(epsilon > 0.0) || !(delta > 0.0))
    throw ConfigError("SimConfig: epsilon and delta must be positive");
  if (delta > epsilon) throw ConfigError("SimConfig: requires delta <= epsilon");
  if (!(t_end > 0.0)) throw ConfigError("SimConfig: t_end must be positive");
  if (!(dt > 0.0)) throw ConfigError("SimConfig: dt must be positive");
  if (dt > delta / 10.0 * (1.0 + 1e-12))
    throw ConfigError("SimConfig: dt must satisfy dt <= delta/10 (fast-scale resolution)");
  if (n_particles < 1) throw ConfigError("SimConfig: n_particles must be >= 1");
  if (x0.size() != static_cast<std::size_t>(spec.dim_slow) ||
      y0.size() != static_cast<std::size_t>(spec.dim_fast))
    throw ConfigError("SimConfig: x0/y0 dimension does not match the model");
  if (block_delta < 0.0) throw ConfigError("SimConfig: block_delta must be >= 0");
  if (delta > epsilon * epsilon)
    warnings.push_back("SimConfig: delta > epsilon^2; the delta = o(epsilon) regime is weak");
  return warnings;
}

namespace {

void append_jumps(const LevyMeasureSpec& levy, double rate_scale, double horizon,
                  RngStream& time_stream, RngStream& mark_stream,
                  std::vector<double>& times, std::vector<double>& marks) {
  const double rate = levy.total_rate * rate_scale;
  if (!(rate > 0.0) || !(horizon > 0.0)) return;
  double t = 0.0;
  const std::size_t md = static_cast<std::size_t>(levy.mark_dim);
  for (;;) {
    t += time_stream.next_exponential(rate);
    if (t > horizon) break;
    times.push_back(t);
    marks.resize(marks.size() + md);
    levy.mark_sampler(mark_stream, std::span<double>(marks.data() + marks.size() - md, md));
  }
}

}  // namespace

std::vector<JumpEvent> sample_compound_poisson(const LevyMeasureSpec& levy, double rate_scale,
                                               double horizon, RngStream& time_stream,
                                               RngStream& mark_stream) {
  if (horizon < 0.0) throw ConfigError("sample_compound_poisson: horizon must be >= 0");
  std::vector<double> times, marks;
  append_jumps(levy, rate_scale, horizon, time_stream, mark_stream, times, marks);
  std::vector<JumpEvent> events(times.size());
  const std::size_t md = static_cast<std::size_t>(levy.mark_dim);
  for (std::size_t i = 0; i < times.size(); ++i) {
    events[i].time = times[i];
    events[i].mark.assign(marks.begin() + static_cast<std::ptrdiff_t>(i * md),
                          marks.begin() + static_cast<std::ptrdiff_t>((i + 1) * md));
  }
  return events;
}

namespace {

struct Workspace {
  std::vector<double> b1, b2, s1, s2, comp, dw, psi_zero, gtmp;
  void resize(int n, int d) {
    b1.resize(n);
    b2.resize(n);
    s1.resize(static_cast<std::size_t>(n) * d);
    s2.resize(static_cast<std::size_t>(n) * d);
    comp.resize(n);
    dw.resize(d);
    psi_zero.assign(d, 0.0);
    gtmp.resize(n);
  }
};

// Shared engine for the plain and the controlled system. The plain run is
// the same kernel with psi frozen at zero and no jump thinning, so the
// null-control law coincides pathwise with the plain one at a fixed seed.
class Engine {
 public:
  Engine(const ModelSpec& spec, const SimConfig& cfg, const ControlPair* control)
      : spec_(spec), cfg_(cfg), control_(control) {
    cfg.validate(spec);
    if (control_) {
      control_->validate(cfg.t_end);
      if (control_->psi.dim != spec.dim_noise)
        throw ConfigError("control psi dimension must match the Brownian dimension");
    }
    n_ = spec.dim_slow;
    d_ = spec.dim_noise;
    N_ = cfg.n_particles;
    eps_ = cfg.epsilon;
    delta_ = cfg.delta;
    sqrt_eps_ = std::sqrt(eps_);
    inv_sqrt_delta_ = 1.0 / std::sqrt(delta_);
    fast_ctl_scale_ = (control_ && control_->fast_control_enabled)
                          ? 1.0 / std::sqrt(eps_ * delta_)
                          : 0.0;
    lambda_ = spec.levy.total_rate;
    phi_max_ = control_ ? control_->phi.max_abs() : 1.0;

    slow_.resize(N_ * n_);
    fast_.resize(N_ * n_);
    slow_prev_.resize(N_ * n_);
    for (std::size_t p = 0; p < N_; ++p)
      for (int k = 0; k < n_; ++k) {
        slow_[p * n_ + k] = cfg.x0[k];
        fast_[p * n_ + k] = cfg.y0[k];
      }
    double x0_norm = 0.0;
    for (double v : cfg.x0) x0_norm += v * v;
    sup_abs_.assign(N_, std::sqrt(x0_norm));
    jump_count_.assign(N_, 0);
    y_sq_int_.assign(N_, 0.0);
    if (control_) log_weight_.assign(N_, 0.0);

    brownian_.resize(N_);
    for (std::size_t p = 0; p < N_; ++p)
      brownian_[p] = RngStream(cfg.seed, p, rng_source::brownian);
    if (control_) {
      thinning_.resize(N_);
      for (std::size_t p = 0; p < N_; ++p)
        thinning_[p] = RngStream(cfg.seed, p, rng_source::thinning);
    }

    build_jump_schedules();
    build_compensator_stencil();
    if (cfg.block_delta > 0.0) {
      aux_fast_ = fast_;
      block_x_.resize(N_ * n_);
      block_mu_points_.resize(N_ * n_);
      aux_l2_.assign(N_, 0.0);
      block_index_ = -1;
    }

    const double raw_steps = cfg.t_end / cfg.dt;
    n_steps_ = static_cast<std::size_t>(std::ceil(raw_steps - 1e-9));
    if (n_steps_ == 0) n_steps_ = 1;
  }

  PathRecord run() {
    PathRecord rec;
    rec.t_end = cfg_.t_end;
    record_snapshot(rec, 0.0);

    const int workers = std::max(1, par::worker_count());
    std::vector<Workspace> ws(static_cast<std::size_t>(workers));
    for (auto& w : ws) w.resize(n_, d_);

    for (std::size_t k = 0; k < n_steps_; ++k) {
      const double t0 = static_cast<double>(k) * cfg_.dt;
      const double t1 = k + 1 == n_steps_ ? cfg_.t_end
                                          : std::min(static_cast<double>(k + 1) * cfg_.dt,
                                                     cfg_.t_end);
      step(t0, t1, ws);
      const bool last = k + 1 == n_steps_;
      const bool due = cfg_.record_stride > 0 && (k + 1) % cfg_.record_stride == 0;
      if (last || due) record_snapshot(rec, t1);
    }

    rec.sup_abs_slow = sup_abs_;
    rec.jump_counts = jump_count_;
    rec.log_weights = log_weight_;
    double ysum = 0.0;
    for (double v : y_sq_int_) ysum += v;
    rec.mean_y_sq_integral = ysum / static_cast<double>(N_);
    if (!aux_l2_.empty()) {
      double asum = 0.0;
      for (double v : aux_l2_) asum += v;
      rec.block_aux_l2 = asum / static_cast<double>(N_);
    }
    return rec;
  }

 private:
  void build_jump_schedules() {
    jump_offsets_.assign(N_ + 1, 0);
    if (lambda_ <= 0.0) return;
    const double rate_scale = phi_max_ / eps_;
    for (std::size_t p = 0; p < N_; ++p) {
      RngStream ts(cfg_.seed, p, rng_source::jump_times);
      RngStream ms(cfg_.seed, p, rng_source::marks);
      append_jumps(spec_.levy, rate_scale, cfg_.t_end, ts, ms, jump_times_, jump_marks_);
      jump_offsets_[p + 1] = jump_times_.size();
    }
    jump_cursor_ = jump_offsets_;
    jump_cursor_.resize(N_);  // cursor p starts at the particle's own range
  }

  void build_compensator_stencil() {
    if (lambda_ <= 0.0 || spec_.mean_g) return;
    constexpr std::size_t n_stencil = 256;
    const std::size_t md = static_cast<std::size_t>(spec_.levy.mark_dim);
    stencil_marks_.resize(n_stencil * md);
    RngStream sr(cfg_.seed, 0, rng_source::stencil);
    for (std::size_t m = 0; m < n_stencil; ++m)
      spec_.levy.mark_sampler(sr, std::span<double>(stencil_marks_.data() + m * md, md));
  }

  void compensator(double t, std::span<const double> x, const MeasureView& mu,
                   Workspace& w) const {
    if (lambda_ <= 0.0) {
      std::fill(w.comp.begin(), w.comp.end(), 0.0);
      return;
    }
    if (spec_.mean_g) {
      spec_.mean_g(t, x, mu, w.comp);
      return;
    }
    const std::size_t md = static_cast<std::size_t>(spec_.levy.mark_dim);
    const std::size_t n_stencil = stencil_marks_.size() / md;
    std::fill(w.comp.begin(), w.comp.end(), 0.0);
    for (std::size_t m = 0; m < n_stencil; ++m) {
      spec_.g(t, x, mu,
              std::span<const double>(stencil_marks_.data() + m * md, md), w.gtmp);
      for (int i = 0; i < n_; ++i) w.comp[i] += w.gtmp[i];
    }
    const double scale = lambda_ / static_cast<double>(n_stencil);
    for (int i = 0; i < n_; ++i) w.comp[i] *= scale;
  }

  void refresh_block(double t0) {
    if (aux_fast_.empty()) return;
    const long long b = static_cast<long long>(std::floor(t0 / cfg_.block_delta + 1e-12));
    if (b == block_index_) return;
    block_index_ = b;
    block_x_ = slow_;
    block_mu_points_ = slow_;
    block_mu_m2_ = second_moment_of(block_mu_points_.data(), nullptr, N_, n_);
  }

  // Advances one particle over [s, s+h] with the frozen measure; one
  // Brownian increment drives both the slow and the fast update.
  void advance_continuous(std::size_t p, double s, double h, const MeasureView& mu,
                          const MeasureView* mu_block, Workspace& w) {
    if (!(h > 0.0)) return;
    double* x = slow_.data() + p * n_;
    double* y = fast_.data() + p * n_;
    std::span<const double> xs(x, static_cast<std::size_t>(n_));
    std::span<const double> ys(y, static_cast<std::size_t>(n_));

    spec_.b1(xs, mu, ys, w.b1);
    spec_.sigma1(xs, mu, w.s1);
    spec_.b2(xs, mu, ys, w.b2);
    spec_.sigma2(xs, mu, ys, w.s2);
    compensator(s, xs, mu, w);

    std::span<const double> psi = control_ ? control_->psi.value_at(s)
                                           : std::span<const double>(w.psi_zero);
    const double sqrt_h = std::sqrt(h);
    RngStream& bs = brownian_[p];
    for (int j = 0; j < d_; ++j) w.dw[j] = sqrt_h * bs.next_normal();

    for (int i = 0; i < n_; ++i) {
      double s1psi = 0.0, s1dw = 0.0, s2psi = 0.0, s2dw = 0.0;
      const double* s1row = w.s1.data() + static_cast<std::size_t>(i) * d_;
      const double* s2row = w.s2.data() + static_cast<std::size_t>(i) * d_;
      for (int j = 0; j < d_; ++j) {
        s1psi += s1row[j] * psi[j];
        s1dw += s1row[j] * w.dw[j];
        s2psi += s2row[j] * psi[j];
        s2dw += s2row[j] * w.dw[j];
      }
      x[i] += (w.b1[i] + s1psi - w.comp[i]) * h + sqrt_eps_ * s1dw;
      y[i] += (w.b2[i] / delta_ + fast_ctl_scale_ * s2psi) * h + inv_sqrt_delta_ * s2dw;
    }

    if (control_) {
      double psi_dw = 0.0, psi_sq = 0.0;
      for (int j = 0; j < d_; ++j) {
        psi_dw += psi[j] * w.dw[j];
        psi_sq += psi[j] * psi[j];
      }
      const double phi = control_->phi.scalar_at(s);
      log_weight_[p] += -psi_dw / sqrt_eps_ - 0.5 * psi_sq * h / eps_ +
                        lambda_ / eps_ * (phi - 1.0) * h;
    }

    if (!aux_fast_.empty()) {
      double* yc = aux_fast_.data() + p * n_;
      std::span<const double> xb(block_x_.data() + p * n_, static_cast<std::size_t>(n_));
      std::span<const double> ycs(yc, static_cast<std::size_t>(n_));
      spec_.b2(xb, *mu_block, ycs, w.b2);
      spec_.sigma2(xb, *mu_block, ycs, w.s2);
      for (int i = 0; i < n_; ++i) {
        double s2dw = 0.0;
        const double* s2row = w.s2.data() + static_cast<std::size_t>(i) * d_;
        for (int j = 0; j < d_; ++j) s2dw += s2row[j] * w.dw[j];
        yc[i] += w.b2[i] / delta_ * h + inv_sqrt_delta_ * s2dw;
      }
    }
  }

  void apply_jump(std::size_t p, double tau, std::span<const double> mark,
                  const MeasureView& mu, Workspace& w) {
    double* x = slow_.data() + p * n_;
    std::span<const double> xs(x, static_cast<std::size_t>(n_));
    if (control_) {
      const double phi = control_->phi.scalar_at(tau);
      const double u = thinning_[p].next_u01();
      if (!(u * phi_max_ < phi)) return;  // thinned away
      log_weight_[p] -= std::log(phi);
    }
    spec_.g(tau, xs, mu, mark, w.gtmp);
    for (int i = 0; i < n_; ++i) x[i] += eps_ * w.gtmp[i];
    ++jump_count_[p];
  }

  void step(double t0, double t1, std::vector<Workspace>& ws) {
    slow_prev_ = slow_;
    const double mu_m2 = second_moment_of(slow_prev_.data(), nullptr, N_, n_);
    const MeasureView mu(slow_prev_.data(), nullptr, N_, n_, mu_m2);
    refresh_block(t0);
    const MeasureView mu_block =
        aux_fast_.empty() ? MeasureView()
                          : MeasureView(block_mu_points_.data(), nullptr, N_, n_, block_mu_m2_);
    const double dt_step = t1 - t0;

    std::atomic<long long> first_bad{-1};
    par::for_each_index(static_cast<std::ptrdiff_t>(N_), [&](std::ptrdiff_t pi) {
      const std::size_t p = static_cast<std::size_t>(pi);
      Workspace& w = ws[static_cast<std::size_t>(par::thread_index())];

      {
        const double* y = fast_.data() + p * n_;
        double ysq = 0.0;
        for (int i = 0; i < n_; ++i) ysq += y[i] * y[i];
        y_sq_int_[p] += ysq * dt_step;
        if (!aux_fast_.empty()) {
          const double* yc = aux_fast_.data() + p * n_;
          double diff = 0.0;
          for (int i = 0; i < n_; ++i) {
            const double dv = y[i] - yc[i];
            diff += dv * dv;
          }
          aux_l2_[p] += diff * dt_step;
        }
      }

      double s = t0;
      if (!jump_times_.empty()) {
        std::size_t& cur = jump_cursor_[p];
        const std::size_t end = jump_offsets_[p + 1];
        const std::size_t md = static_cast<std::size_t>(spec_.levy.mark_dim);
        while (cur < end && jump_times_[cur] <= t1) {
          const double tau = jump_times_[cur];
          advance_continuous(p, s, tau - s, mu, &mu_block, w);
          apply_jump(p, tau,
                     std::span<const double>(jump_marks_.data() + cur * md, md), mu, w);
          s = tau;
          ++cur;
        }
      }
      advance_continuous(p, s, t1 - s, mu, &mu_block, w);

      const double* x = slow_.data() + p * n_;
      const double* y = fast_.data() + p * n_;
      double xsq = 0.0;
      bool ok = true;
      for (int i = 0; i < n_; ++i) {
        xsq += x[i] * x[i];
        ok = ok && std::isfinite(x[i]) && std::isfinite(y[i]);
      }
      if (!ok) {
        // keep the smallest particle index for a deterministic report
        const long long mine = static_cast<long long>(p);
        long long cur = first_bad.load();
        while ((cur < 0 || mine < cur) && !first_bad.compare_exchange_weak(cur, mine)) {
        }
      }
      sup_abs_[p] = std::max(sup_abs_[p], std::sqrt(xsq));
    });

    if (first_bad.load() >= 0) {
      std::ostringstream msg;
      msg << "simulate: non-finite state for particle " << first_bad.load() << " at time "
          << t1 << " (blow-up)";
      throw NumericsError(msg.str());
    }
  }

  void record_snapshot(PathRecord& rec, double t) {
    ParticleEnsemble snap;
    snap.time = t;
    snap.n_particles = N_;
    snap.dim = n_;
    snap.slow = slow_;
    snap.fast = fast_;
    rec.times.push_back(t);
    rec.ensembles.push_back(std::move(snap));
    double jc = 0.0;
    for (std::size_t c : jump_count_) jc += static_cast<double>(c);
    rec.mean_jump_count_at.push_back(jc / static_cast<double>(N_));
  }

  const ModelSpec& spec_;
  const SimConfig& cfg_;
  const ControlPair* control_;
  int n_ = 1, d_ = 1;
  std::size_t N_ = 1;
  double eps_ = 0, delta_ = 0, sqrt_eps_ = 0, inv_sqrt_delta_ = 0, fast_ctl_scale_ = 0;
  double lambda_ = 0, phi_max_ = 1;
  std::size_t n_steps_ = 0;

  std::vector<double> slow_, fast_, slow_prev_;
  std::vector<double> sup_abs_, y_sq_int_, log_weight_;
  std::vector<std::size_t> jump_count_;
  std::vector<RngStream> brownian_, thinning_;

  std::vector<double> jump_times_, jump_marks_;
  std::vector<std::size_t> jump_offsets_, jump_cursor_;
  std::vector<double> stencil_marks_;

  std::vector<double> aux_fast_, block_x_, block_mu_points_, aux_l2_;
  double block_mu_m2_ = 0.0;
  long long block_index_ = -1;
};

}  // namespace

PathRecord simulate_coupled(const ModelSpec& spec, const SimConfig& cfg) {
  Engine engine(spec, cfg, nullptr);
  return engine.run();
}

PathRecord simulate_controlled(const ModelSpec& spec, const SimConfig& cfg,
                               const ControlPair& control) {
  Engine engine(spec, cfg, &control);
  return engine.run();
}

IncrementStats path_increment_stats(const PathRecord& record,
                                    const std::vector<double>& deltas) {
  if (record.times.size() < 2)
    throw ConfigError("path_increment_stats: record needs at least two snapshots");
  const double rec_dt = record.times[1] - record.times[0];
  IncrementStats out;
  out.deltas = deltas;
  out.mean_sq.resize(deltas.size(), 0.0);

  const std::size_t N = record.ensembles.front().n_particles;
  const int n = record.ensembles.front().dim;
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double Delta = deltas[di];
    if (Delta > record.t_end) throw NumericsError("path_increment_stats: invalid window Delta > t_end");
    if (Delta < rec_dt * (1.0 - 1e-9))
      throw ConfigError("path_increment_stats: Delta below the recording stride");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < record.times.size(); ++j) {
      const double t = record.times[j];
      const double tb = std::floor(t / Delta + 1e-12) * Delta;
      // last recorded time <= tb (+ slack); robust to a non-uniform tail
      const auto it = std::upper_bound(record.times.begin(), record.times.end(),
                                       tb + rec_dt * 1e-9);
      if (it == record.times.begin()) continue;
      const std::size_t jb = static_cast<std::size_t>(it - record.times.begin()) - 1;
      const auto& cur = record.ensembles[j].slow;
      const auto& base = record.ensembles[jb].slow;
      double s = 0.0;
      for (std::size_t q = 0; q < N * static_cast<std::size_t>(n); ++q) {
        const double d = cur[q] - base[q];
        s += d * d;
      }
      acc += s / static_cast<double>(N);
      ++count;
    }
    out.mean_sq[di] = count > 0 ? acc / static_cast<double>(count) : 0.0;
  }

  // log-log least squares over the positive entries
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (out.mean_sq[i] <= 0.0) continue;
    const double lx = std::log(deltas[i]);
    const double ly = std::log(out.mean_sq[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    out.loglog_slope = denom != 0.0 ? (static_cast<double>(m) * sxy - sx * sy) / denom : 0.0;
  }
  return out;
}

void write_path_summary_csv(const PathRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "time,mean_abs_x,mean_sq_x,mean_jump_count\n";
  char buf[512];
  for (std::size_t j = 0; j < record.times.size(); ++j) {
    const auto& ens = record.ensembles[j];
    double mabs = 0.0, msq = 0.0;
    for (std::size_t p = 0; p < ens.n_particles; ++p) {
      double sq = 0.0;
      for (int i = 0; i < ens.dim; ++i) {
        const double v = ens.slow[p * static_cast<std::size_t>(ens.dim) + i];
        sq += v * v;
      }
      mabs += std::sqrt(sq);
      msq += sq;
    }
    mabs /= static_cast<double>(ens.n_particles);
    msq /= static_cast<double>(ens.n_particles);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", record.times[j], mabs, msq,
                  record.mean_jump_count_at[j]);
    out << buf;
  }
}

void write_path_binary(const PathRecord& record, const std::string& base_path) {
  const std::string bin_path = base_path + ".bin";
  const std::string json_path = base_path + ".json";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open for writing: " + bin_path);
  for (const auto& ens : record.ensembles)
    bin.write(reinterpret_cast<const char*>(ens.slow.data()),
              static_cast<std::streamsize>(ens.slow.size() * sizeof(double)));
  if (!bin) throw IoError("write failed: " + bin_path);

  nlohmann::json sidecar;
  sidecar["schema"] = "mvldp-paths/1";
  sidecar["n_particles"] = record.ensembles.front().n_particles;
  sidecar["dim"] = record.ensembles.front().dim;
  sidecar["grid_length"] = record.times.size();
  sidecar["times"] = record.times;
  sidecar["layout"] = "row-major [time][particle][dim], float64 little-endian, slow states";
  sidecar["data_file"] = bin_path;
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw IoError("cannot open for writing: " + json_path);
  js << sidecar.dump(2) << "\n";
}

}  // namespace mvldp
