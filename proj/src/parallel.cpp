#include "mvldp/parallel.hpp"

namespace mvldp::par {

namespace {
ExecMode g_mode = ExecMode::openmp;
int g_max_threads = 0;  // 0 = hardware default
}  // namespace

ExecMode exec_mode() { return g_mode; }

void set_exec_mode(ExecMode mode) { g_mode = mode; }

void set_max_threads(int n) {
  g_max_threads = n > 0 ? n : 0;
#ifdef _OPENMP
  if (g_max_threads > 0) {
    omp_set_num_threads(g_max_threads);
  } else {
    omp_set_num_threads(omp_get_num_procs());
  }
#endif
}

int max_threads() {
#ifdef _OPENMP
  if (g_max_threads > 0) return g_max_threads;
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mvldp::par
