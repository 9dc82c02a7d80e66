// Times the particle-stepping kernel with the serial reference path and
// with OpenMP at increasing particle counts, and checks the results
// agree bit-for-bit.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "mvldp/model.hpp"
#include "mvldp/parallel.hpp"
#include "mvldp/sde.hpp"

namespace {

double time_run(const mvldp::ModelSpec& spec, const mvldp::SimConfig& cfg,
                mvldp::par::ExecMode mode, std::vector<double>& final_slow) {
  mvldp::par::set_exec_mode(mode);
  const auto t0 = std::chrono::steady_clock::now();
  const mvldp::PathRecord rec = mvldp::simulate_coupled(spec, cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  final_slow = rec.final_ensemble().slow;
  return elapsed;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t steps_scale = 1;
  if (argc > 1) steps_scale = std::stoul(argv[1]);

  const mvldp::ModelSpec spec = mvldp::build_linear_model(2.0, 1.0, 0.5, 0.5, 1.0);
  std::printf("openmp enabled: %s, max threads: %d\n",
              mvldp::par::openmp_enabled() ? "yes" : "no", mvldp::par::max_threads());
  std::printf("%10s %12s %12s %9s %10s\n", "particles", "serial [s]", "openmp [s]", "speedup",
              "bitwise");

  for (const std::size_t n_particles : {1000ul, 4000ul, 16000ul}) {
    mvldp::SimConfig cfg;
    cfg.epsilon = 0.1;
    cfg.delta = 0.01;
    cfg.t_end = 0.5 * static_cast<double>(steps_scale);
    cfg.dt = 1e-3;
    cfg.n_particles = n_particles;
    cfg.seed = 20240817;
    cfg.x0 = {1.0};
    cfg.y0 = {0.0};
    cfg.record_stride = 0;

    std::vector<double> serial_out, omp_out;
    const double t_serial = time_run(spec, cfg, mvldp::par::ExecMode::serial, serial_out);
    const double t_omp = time_run(spec, cfg, mvldp::par::ExecMode::openmp, omp_out);
    const bool identical = serial_out == omp_out;
    std::printf("%10zu %12.4f %12.4f %8.2fx %10s\n", n_particles, t_serial, t_omp,
                t_serial / t_omp, identical ? "match" : "MISMATCH");
    if (!identical) return 1;
  }
  return 0;
}
