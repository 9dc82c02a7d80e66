#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mvldp/errors.hpp"
#include "mvldp/parallel.hpp"
#include "mvldp/sde.hpp"

using namespace mvldp;

namespace {

SimConfig base_config() {
  SimConfig cfg;
  cfg.epsilon = 0.1;
  cfg.delta = 0.01;
  cfg.t_end = 1.0;
  cfg.dt = 1e-3;
  cfg.n_particles = 200;
  cfg.seed = 42;
  cfg.x0 = {1.0};
  cfg.y0 = {0.0};
  return cfg;
}

// custom model with constant slow drift and inert fast part
ModelSpec constant_drift_model(double c) {
  ModelSpec spec = build_gaussian_benchmark(1.0);
  spec.b1 = [c](std::span<const double>, const MeasureView&, std::span<const double>,
                std::span<double> out) { out[0] = c; };
  spec.sigma1 = [](std::span<const double>, const MeasureView&, std::span<double> out) {
    out[0] = 0.0;
  };
  return spec;
}

// pure jump model with constant (mark-independent) jump coefficient
ModelSpec constant_jump_model(double c, double lambda) {
  ModelSpec spec = build_poisson_benchmark(lambda, 1.0);
  spec.g = [c](double, std::span<const double>, const MeasureView&, std::span<const double>,
               std::span<double> out) { out[0] = c; };
  spec.mean_g = [c, lambda](double, std::span<const double>, const MeasureView&,
                            std::span<double> out) { out[0] = lambda * c; };
  return spec;
}

}  // namespace

TEST_CASE("config guards") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.0, 0.0, 0.0);
  SimConfig cfg = base_config();
  cfg.dt = cfg.delta / 5.0;  // violates dt <= delta/10
  CHECK_THROWS_AS(cfg.validate(spec), ConfigError);

  cfg = base_config();
  cfg.delta = cfg.epsilon * 2.0;  // delta > epsilon
  CHECK_THROWS_AS(cfg.validate(spec), ConfigError);

  cfg = base_config();
  cfg.delta = 0.05;  // valid but above epsilon^2: warn, not error
  cfg.dt = 1e-3;
  const auto warnings = cfg.validate(spec);
  CHECK(warnings.size() == 1);
}

TEST_CASE("compound poisson sampling") {
  LevyMeasureSpec levy;
  levy.total_rate = 0.0;
  RngStream ts(1, 0, rng_source::jump_times), ms(1, 0, rng_source::marks);
  CHECK(sample_compound_poisson(levy, 10.0, 1.0, ts, ms).empty());

  levy.total_rate = 1.0;
  levy.mark_dim = 1;
  levy.mark_sampler = [](RngStream&, std::span<double> out) { out[0] = 1.0; };
  CHECK(sample_compound_poisson(levy, 10.0, 0.0, ts, ms).empty());

  // rate_scale = 1/eps with eps = 0.1: expected count 10 per unit horizon
  double total = 0.0;
  const std::size_t K = 10000;
  for (std::size_t p = 0; p < K; ++p) {
    RngStream t2(7, p, rng_source::jump_times), m2(7, p, rng_source::marks);
    const auto events = sample_compound_poisson(levy, 10.0, 1.0, t2, m2);
    total += static_cast<double>(events.size());
    for (std::size_t i = 1; i < events.size(); ++i)
      CHECK(events[i].time >= events[i - 1].time);
  }
  const double mean = total / static_cast<double>(K);
  CHECK(mean > 9.4);
  CHECK(mean < 10.6);
}

TEST_CASE("noise-free slow path reduces to the ODE") {
  const ModelSpec spec = constant_drift_model(0.7);
  SimConfig cfg = base_config();
  cfg.n_particles = 3;
  const PathRecord rec = simulate_coupled(spec, cfg);

  SimConfig fine = cfg;
  fine.dt = cfg.dt / 10.0;
  const PathRecord ref = simulate_coupled(spec, fine);
  for (std::size_t p = 0; p < 3; ++p) {
    const double got = rec.final_ensemble().slow_point(p)[0];
    const double want = ref.final_ensemble().slow_point(p)[0];
    CHECK(std::abs(got - want) < 1e-10);
    CHECK(got == doctest::Approx(1.0 + 0.7).epsilon(1e-12));
  }
}

TEST_CASE("same seed gives bit-identical paths at any thread count") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.5, 0.5, 1.0);
  SimConfig cfg = base_config();
  cfg.t_end = 0.3;

  par::set_exec_mode(par::ExecMode::serial);
  const PathRecord serial = simulate_coupled(spec, cfg);
  par::set_exec_mode(par::ExecMode::openmp);
  for (int threads : {1, 2, 4}) {
    par::set_max_threads(threads);
    const PathRecord omp = simulate_coupled(spec, cfg);
    CHECK(omp.final_ensemble().slow == serial.final_ensemble().slow);
    CHECK(omp.final_ensemble().fast == serial.final_ensemble().fast);
    CHECK(omp.jump_counts == serial.jump_counts);
  }
  par::set_max_threads(0);
}

TEST_CASE("slow diffusion scales like sqrt(epsilon) at a shared seed") {
  const ModelSpec spec = build_gaussian_benchmark(1.0);
  SimConfig cfg = base_config();
  cfg.x0 = {0.0};
  cfg.delta = 0.002;  // keep the grid identical across the epsilon pair
  cfg.dt = 2e-4;
  cfg.n_particles = 500;

  SimConfig half = cfg;
  half.epsilon = cfg.epsilon / 2.0;

  const PathRecord a = simulate_coupled(spec, cfg);
  const PathRecord b = simulate_coupled(spec, half);
  double rms_a = 0.0, rms_b = 0.0;
  for (std::size_t p = 0; p < cfg.n_particles; ++p) {
    rms_a += a.final_ensemble().slow[p] * a.final_ensemble().slow[p];
    rms_b += b.final_ensemble().slow[p] * b.final_ensemble().slow[p];
  }
  CHECK(std::sqrt(rms_b / rms_a) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
}

TEST_CASE("second moments stay finite and stable across the epsilon ladder") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.5, 0.3, 1.0);
  for (double eps : {0.2, 0.1, 0.05}) {
    SimConfig cfg = base_config();
    cfg.epsilon = eps;
    cfg.delta = eps * eps;
    cfg.dt = cfg.delta / 10.0;
    cfg.n_particles = 500;
    cfg.record_stride = 0;
    const PathRecord a = simulate_coupled(spec, cfg);

    SimConfig refined = cfg;
    refined.n_particles = 1000;
    refined.dt = cfg.dt / 2.0;
    refined.seed = cfg.seed + 1;
    const PathRecord b = simulate_coupled(spec, refined);

    auto mean_sup_sq = [](const PathRecord& rec) {
      double acc = 0.0;
      for (double s : rec.sup_abs_slow) acc += s * s;
      return acc / static_cast<double>(rec.sup_abs_slow.size());
    };
    const double ma = mean_sup_sq(a), mb = mean_sup_sq(b);
    CHECK(std::isfinite(ma));
    CHECK(std::isfinite(a.mean_y_sq_integral));
    CHECK(ma / mb < 2.0);
    CHECK(mb / ma < 2.0);
    CHECK(a.mean_y_sq_integral / b.mean_y_sq_integral < 2.0);
    CHECK(b.mean_y_sq_integral / a.mean_y_sq_integral < 2.0);
  }
}

TEST_CASE("moment bound holds and is stable under refinement") {
  // linear1d(theta=2), eps = 0.05, delta = eps^2
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.5, 0.0, 0.0);
  SimConfig cfg = base_config();
  cfg.epsilon = 0.05;
  cfg.delta = 0.0025;
  cfg.dt = 2.5e-4;
  cfg.n_particles = 2000;
  cfg.record_stride = 0;

  const PathRecord rec = simulate_coupled(spec, cfg);
  double mean_sup_sq = 0.0;
  for (double s : rec.sup_abs_slow) mean_sup_sq += s * s;
  mean_sup_sq /= static_cast<double>(cfg.n_particles);
  CHECK(mean_sup_sq < 10.0 * (1.0 + 1.0));  // 10 (1 + |x0|^2)
  CHECK(std::isfinite(rec.mean_y_sq_integral));

  // oracle: double N, halve dt; estimates agree within a loose CI band
  SimConfig fine = cfg;
  fine.n_particles = 4000;
  fine.dt = cfg.dt / 2.0;
  fine.seed = 43;
  const PathRecord rec2 = simulate_coupled(spec, fine);
  double mean2 = 0.0;
  for (double s : rec2.sup_abs_slow) mean2 += s * s;
  mean2 /= static_cast<double>(fine.n_particles);
  CHECK(mean_sup_sq / mean2 > 0.5);
  CHECK(mean_sup_sq / mean2 < 2.0);
  CHECK(std::abs(mean_sup_sq - mean2) < 0.5);
}

TEST_CASE("null control reproduces the plain run bit-for-bit") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.5, 0.5, 1.0);
  SimConfig cfg = base_config();
  cfg.t_end = 0.5;
  const PathRecord plain = simulate_coupled(spec, cfg);
  const ControlPair null = ControlPair::null_control(cfg.t_end, spec.dim_noise);
  const PathRecord tilted = simulate_controlled(spec, cfg, null);
  CHECK(plain.final_ensemble().slow == tilted.final_ensemble().slow);
  CHECK(plain.final_ensemble().fast == tilted.final_ensemble().fast);
  CHECK(plain.jump_counts == tilted.jump_counts);
  for (double lw : tilted.log_weights) CHECK(lw == 0.0);
}

TEST_CASE("controlled jump intensity is phi lambda / epsilon") {
  const ModelSpec spec = build_poisson_benchmark(1.0, 1.0);
  SimConfig cfg = base_config();
  cfg.x0 = {0.0};
  cfg.n_particles = 10000;
  ControlPair control = ControlPair::null_control(cfg.t_end, 1);
  control.phi.values = {2.0};
  const PathRecord rec = simulate_controlled(spec, cfg, control);
  double mean = 0.0;
  for (std::size_t c : rec.jump_counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(cfg.n_particles);
  // thinned-Poisson mean phi*lambda/eps = 20, 3 sigma band over 1e4 particles
  const double band = 3.0 * std::sqrt(20.0) / 100.0;
  CHECK(mean > 20.0 - band);
  CHECK(mean < 20.0 + band);
}

TEST_CASE("phi must be strictly positive") {
  const ModelSpec spec = build_poisson_benchmark(1.0, 1.0);
  SimConfig cfg = base_config();
  ControlPair control = ControlPair::null_control(cfg.t_end, 1);
  control.phi.values = {0.0};
  CHECK_THROWS_AS(simulate_controlled(spec, cfg, control), NumericsError);
}

TEST_CASE("controlled drift dominates as the noise vanishes") {
  const ModelSpec spec = build_gaussian_benchmark(1.0);
  SimConfig cfg = base_config();
  cfg.x0 = {0.0};
  cfg.epsilon = 1e-4;
  cfg.delta = 1e-4;
  cfg.dt = 1e-5;
  cfg.t_end = 1.0;
  cfg.n_particles = 50;
  ControlPair control = ControlPair::null_control(cfg.t_end, 1);
  control.psi.values = {0.8};
  control.fast_control_enabled = false;  // ablation flag exercised here
  const PathRecord rec = simulate_controlled(spec, cfg, control);
  double mean = 0.0;
  for (std::size_t p = 0; p < cfg.n_particles; ++p) mean += rec.final_ensemble().slow[p];
  mean /= static_cast<double>(cfg.n_particles);
  CHECK(std::abs(mean - 0.8) < 0.008);  // within 1%
}

TEST_CASE("compensated jumps are mean zero") {
  const ModelSpec spec = constant_jump_model(0.5, 2.0);
  SimConfig cfg = base_config();
  cfg.x0 = {0.0};
  cfg.n_particles = 10000;
  const PathRecord rec = simulate_coupled(spec, cfg);
  double mean = 0.0;
  for (std::size_t p = 0; p < cfg.n_particles; ++p) mean += rec.final_ensemble().slow[p];
  mean /= static_cast<double>(cfg.n_particles);
  // per particle, var = eps * lambda * c^2 * T = 0.05
  const double band = 3.0 * std::sqrt(0.05) / 100.0;
  CHECK(std::abs(mean) < band);
}

TEST_CASE("mark quadrature stencil compensates when no mean hook exists") {
  ModelSpec spec = constant_jump_model(0.5, 2.0);
  spec.mean_g = nullptr;  // force the 256-mark stencil path
  SimConfig cfg = base_config();
  cfg.x0 = {0.0};
  cfg.n_particles = 4000;
  const PathRecord rec = simulate_coupled(spec, cfg);
  double mean = 0.0;
  for (std::size_t p = 0; p < cfg.n_particles; ++p) mean += rec.final_ensemble().slow[p];
  mean /= static_cast<double>(cfg.n_particles);
  CHECK(std::abs(mean) < 3.0 * std::sqrt(0.05) / std::sqrt(4000.0) + 1e-12);
}

TEST_CASE("blow-up raises a numerics error naming the particle") {
  ModelSpec spec = build_gaussian_benchmark(1.0);
  spec.b1 = [](std::span<const double> x, const MeasureView&, std::span<const double>,
               std::span<double> out) { out[0] = x[0] * x[0] * x[0]; };
  SimConfig cfg = base_config();
  cfg.x0 = {40.0};
  cfg.n_particles = 4;
  CHECK_THROWS_AS(simulate_coupled(spec, cfg), NumericsError);
}

TEST_CASE("path record invariants and increment stats") {
  const ModelSpec spec = constant_drift_model(0.0);
  SimConfig cfg = base_config();
  cfg.n_particles = 10;
  cfg.t_end = 0.5;
  const PathRecord rec = simulate_coupled(spec, cfg);
  CHECK(rec.times.front() == 0.0);
  CHECK(rec.times.back() == doctest::Approx(cfg.t_end));
  for (std::size_t j = 1; j < rec.times.size(); ++j) CHECK(rec.times[j] > rec.times[j - 1]);

  // constant path: zero increments at every window
  const IncrementStats stats = path_increment_stats(rec, {0.01, 0.05, 0.1});
  for (double v : stats.mean_sq) CHECK(v == 0.0);

  CHECK_THROWS_AS(path_increment_stats(rec, {1.0}), NumericsError);   // Delta > T
  CHECK_THROWS_AS(path_increment_stats(rec, {1e-5}), ConfigError);    // below stride
}

TEST_CASE("increment scaling is linear in the window size") {
  // theta = 1 keeps the averaged drift at zero so the martingale part
  // dominates E|X_t - X_{t(Delta)}|^2 across the whole window range
  const ModelSpec spec = build_linear_model(1.0, 1.0, 1.0, 0.5, 1.0);
  SimConfig cfg = base_config();
  cfg.n_particles = 2000;
  const PathRecord rec = simulate_coupled(spec, cfg);
  const IncrementStats stats = path_increment_stats(rec, {0.01, 0.02, 0.05, 0.1});
  CHECK(stats.loglog_slope > 0.8);
  CHECK(stats.loglog_slope < 1.2);
  // wider windows accumulate at least as much mean-square increment
  CHECK(stats.mean_sq[0] <= stats.mean_sq[3] * 1.05);
}

TEST_CASE("summary csv and binary trajectory round trip") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.3, 0.0, 0.0);
  SimConfig cfg = base_config();
  cfg.n_particles = 8;
  cfg.t_end = 0.2;
  cfg.record_stride = 20;
  const PathRecord rec = simulate_coupled(spec, cfg);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mvldp_sde_io_test";
  fs::create_directories(dir);
  write_path_summary_csv(rec, (dir / "summary.csv").string());
  write_path_binary(rec, (dir / "paths").string());

  std::ifstream bin(dir / "paths.bin", std::ios::binary);
  REQUIRE(bin.good());
  std::vector<double> data(rec.times.size() * 8);
  bin.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
  CHECK(bin.gcount() == static_cast<std::streamsize>(data.size() * sizeof(double)));
  // last snapshot in the file equals the final ensemble
  for (std::size_t p = 0; p < 8; ++p)
    CHECK(data[(rec.times.size() - 1) * 8 + p] == rec.final_ensemble().slow[p]);
  std::ifstream sidecar(dir / "paths.json");
  REQUIRE(sidecar.good());
  fs::remove_all(dir);
}
