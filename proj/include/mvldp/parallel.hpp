#ifndef MVLDP_PARALLEL_HPP
#define MVLDP_PARALLEL_HPP

// Thin OpenMP wrapper. Every hot loop in the library goes through
// for_each_index, which has an OpenMP path and a serial reference path.
// Results must be bit-identical between the two; tests and the bench
// tool compare them.

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mvldp::par {

enum class ExecMode { openmp, serial };

ExecMode exec_mode();
void set_exec_mode(ExecMode mode);

// Caps OpenMP worker count; n <= 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

inline bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

// Index of the calling worker inside a for_each_index body (0 when serial).
inline int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

// Upper bound on workers the next for_each_index will use.
inline int worker_count() {
  if (exec_mode() == ExecMode::serial) return 1;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename Fn>
void for_each_index(std::ptrdiff_t n, Fn&& fn) {
  if (exec_mode() == ExecMode::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#else
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace mvldp::par

#endif
