#ifndef MVLDP_MEASURE_HPP
#define MVLDP_MEASURE_HPP

// Weighted sample clouds standing in for time-marginal laws, plus the
// two measure queries the coefficients and diagnostics need: the second
// moment and the exact 1-d Wasserstein-2 distance.

#include <cstddef>
#include <span>
#include <vector>

namespace mvldp {

// Non-owning view of a sample cloud with its second moment precomputed.
// This is what coefficient callbacks receive; during a simulation step it
// points at the previous step's slow states (frozen coupling).
class MeasureView {
 public:
  MeasureView() = default;
  // weights == nullptr means uniform 1/count.
  MeasureView(const double* points, const double* weights, std::size_t count, int dim,
              double second_moment)
      : points_(points),
        weights_(weights),
        count_(count),
        dim_(dim),
        second_moment_(second_moment) {}

  std::size_t size() const { return count_; }
  int dim() const { return dim_; }
  double second_moment() const { return second_moment_; }
  std::span<const double> point(std::size_t i) const {
    return {points_ + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const {
    return weights_ ? weights_[i] : 1.0 / static_cast<double>(count_);
  }

 private:
  const double* points_ = nullptr;
  const double* weights_ = nullptr;
  std::size_t count_ = 0;
  int dim_ = 0;
  double second_moment_ = 0.0;
};

// Computes sum_i w_i |x_i|^2 for a flat [count x dim] array.
double second_moment_of(const double* points, const double* weights, std::size_t count,
                        int dim);

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  // Throws ConfigError if weight count mismatches or weights do not sum
  // to 1 within 1e-12 (negative weights are rejected too).
  EmpiricalMeasure(std::vector<double> flat_points, int dim, std::vector<double> weights);

  static EmpiricalMeasure uniform(std::vector<double> flat_points, int dim);
  // Single atom at x with mass 1 (the Dirac proxy used in averaged mode).
  static EmpiricalMeasure dirac(std::span<const double> x);

  std::size_t size() const { return dim_ == 0 ? 0 : points_.size() / dim_; }
  int dim() const { return dim_; }
  bool uniform_weights() const { return weights_.empty(); }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const {
    return weights_.empty() ? 1.0 / static_cast<double>(size()) : weights_[i];
  }
  const std::vector<double>& flat() const { return points_; }

  MeasureView view() const {
    return MeasureView(points_.data(), weights_.empty() ? nullptr : weights_.data(), size(),
                       dim_, second_moment_);
  }
  double second_moment() const { return second_moment_; }

 private:
  std::vector<double> points_;   // flat, row-major [count x dim]
  std::vector<double> weights_;  // empty = uniform
  int dim_ = 0;
  double second_moment_ = 0.0;
};

double second_moment(const EmpiricalMeasure& mu);

// Exact W2 between 1-d measures by quantile coupling. Handles general
// weights; throws for dim != 1 (multi-d exact W2 is out of scope).
double wasserstein2_1d(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2);

}  // namespace mvldp

#endif
