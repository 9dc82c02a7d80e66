#ifndef MVLDP_CONTROL_HPP
#define MVLDP_CONTROL_HPP

// Discretized control pair (psi, phi): a piecewise-constant drift shift
// for the Brownian noise and a positive piecewise-constant intensity
// tilt for the jump measure. phi is mark-independent by design.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mvldp {

// Piecewise-constant function on [0,T] with vector values.
struct PiecewiseConstant {
  std::vector<double> edges;   // size m+1, edges.front() == 0, strictly increasing
  std::vector<double> values;  // flat, m x dim
  int dim = 1;

  static PiecewiseConstant constant(double t_end, std::span<const double> value);
  static PiecewiseConstant uniform_grid(double t_end, std::size_t m, int dim);

  std::size_t intervals() const { return edges.empty() ? 0 : edges.size() - 1; }
  double t_end() const { return edges.empty() ? 0.0 : edges.back(); }
  std::size_t interval_index(double t) const;
  std::span<const double> value_at(double t) const;
  double scalar_at(double t) const { return value_at(t)[0]; }
  double max_abs() const;

  void validate(const std::string& what) const;  // throws ConfigError
};

struct ControlPair {
  PiecewiseConstant psi;  // dim = d (Brownian dimension)
  PiecewiseConstant phi;  // dim = 1, strictly positive
  double budget = std::numeric_limits<double>::infinity();  // class bound m, checked post-hoc
  // The controlled fast equation carries a psi-term; this flag zeroes it
  // for ablation runs (the limit has no control in the fast component).
  bool fast_control_enabled = true;

  static ControlPair null_control(double t_end, int dim_noise);

  // Throws ConfigError/NumericsError if grids do not cover [0,T] or phi
  // is not strictly positive and bounded.
  void validate(double t_end) const;

  std::string to_json() const;
  static ControlPair from_json(const std::string& text);
};

}  // namespace mvldp

#endif
