#include "mvldp/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvldp/errors.hpp"

namespace mvldp {

double second_moment_of(const double* points, const double* weights, std::size_t count,
                        int dim) {
  const double w_uniform = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double v = points[i * static_cast<std::size_t>(dim) + k];
      sq += v * v;
    }
    acc += (weights ? weights[i] : w_uniform) * sq;
  }
  return acc;
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> flat_points, int dim,
                                   std::vector<double> weights)
    : points_(std::move(flat_points)), weights_(std::move(weights)), dim_(dim) {
  if (dim_ <= 0) throw ConfigError("EmpiricalMeasure: dim must be positive");
  if (points_.size() % static_cast<std::size_t>(dim_) != 0)
    throw ConfigError("EmpiricalMeasure: point array size not a multiple of dim");
  const std::size_t count = points_.size() / static_cast<std::size_t>(dim_);
  if (count == 0) throw ConfigError("EmpiricalMeasure: empty point set");
  if (!weights_.empty()) {
    if (weights_.size() != count)
      throw ConfigError("EmpiricalMeasure: weight count does not match point count");
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw ConfigError("EmpiricalMeasure: negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("EmpiricalMeasure: weights sum to " + std::to_string(sum) +
                        ", expected 1 within 1e-12");
  }
  second_moment_ = second_moment_of(points_.data(),
                                    weights_.empty() ? nullptr : weights_.data(), count, dim_);
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<double> flat_points, int dim) {
  return EmpiricalMeasure(std::move(flat_points), dim, {});
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> x) {
  return EmpiricalMeasure(std::vector<double>(x.begin(), x.end()),
                          static_cast<int>(x.size()), {});
}

double second_moment(const EmpiricalMeasure& mu) { return mu.second_moment(); }

namespace {

struct Atom {
  double x;
  double w;
};

std::vector<Atom> sorted_atoms(const EmpiricalMeasure& mu) {
  std::vector<Atom> atoms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) atoms[i] = {mu.point(i)[0], mu.weight(i)};
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  return atoms;
}

}  // namespace

double wasserstein2_1d(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2) {
  if (mu1.dim() != 1 || mu2.dim() != 1)
    throw ConfigError("wasserstein2_1d: unsupported dimension (only 1-d measures)");
  std::vector<Atom> a = sorted_atoms(mu1);
  std::vector<Atom> b = sorted_atoms(mu2);
  // Walk the two quantile functions in lockstep; each merged segment of
  // mass dw transports atom i onto atom j. dw equals one of the two
  // remainders exactly, so the exhausted side hits 0.0 bitwise.
  std::size_t i = 0, j = 0;
  double ra = a[0].w, rb = b[0].w;
  double cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double dw = std::min(ra, rb);
    const double d = a[i].x - b[j].x;
    cost += dw * d * d;
    ra -= dw;
    rb -= dw;
    if (ra == 0.0) {
      ++i;
      if (i < a.size()) ra = a[i].w;
    }
    if (rb == 0.0) {
      ++j;
      if (j < b.size()) rb = b[j].w;
    }
  }
  return std::sqrt(std::max(0.0, cost));
}

}  // namespace mvldp
