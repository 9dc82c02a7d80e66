#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvldp/errors.hpp"
#include "mvldp/measure.hpp"
#include "mvldp/rng.hpp"

using namespace mvldp;

namespace {

// Independent oracle: exact W2 between uniform same-count 1-d measures by
// exhaustive search over assignments.
double w2_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[perm[i]];
      cost += d * d;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.size()));
}

std::vector<double> random_atoms(RngStream& rng, std::size_t count, double scale) {
  std::vector<double> out(count);
  for (double& v : out) v = scale * (2.0 * rng.next_u01() - 1.0);
  return out;
}

}  // namespace

TEST_CASE("second_moment basics") {
  CHECK(second_moment(EmpiricalMeasure::uniform({0.0, 0.0, 0.0}, 1)) == 0.0);
  CHECK(second_moment(EmpiricalMeasure::uniform({1.0, -1.0}, 1)) == doctest::Approx(1.0));
  CHECK(second_moment(EmpiricalMeasure::uniform({3.0}, 1)) == doctest::Approx(9.0));
}

TEST_CASE("weights must sum to one") {
  CHECK_THROWS_AS(EmpiricalMeasure({1.0, 2.0}, 1, {0.5, 0.6}), ConfigError);
  CHECK_THROWS_AS(EmpiricalMeasure({1.0, 2.0}, 1, {1.1, -0.1}), ConfigError);
  CHECK_NOTHROW(EmpiricalMeasure({1.0, 2.0}, 1, {0.25, 0.75}));
}

TEST_CASE("wasserstein2_1d simple values") {
  const auto m00 = EmpiricalMeasure::uniform({0.0, 0.0}, 1);
  const auto m11 = EmpiricalMeasure::uniform({1.0, 1.0}, 1);
  CHECK(wasserstein2_1d(m00, m11) == doctest::Approx(1.0));

  // brute force over both couplings of two atoms gives 1 for {0,2} vs {1,3}
  const auto a = EmpiricalMeasure::uniform({0.0, 2.0}, 1);
  const auto b = EmpiricalMeasure::uniform({1.0, 3.0}, 1);
  CHECK(w2_brute_force({0.0, 2.0}, {1.0, 3.0}) == doctest::Approx(1.0));
  CHECK(wasserstein2_1d(a, b) == doctest::Approx(1.0));

  CHECK(wasserstein2_1d(a, a) == 0.0);
}

TEST_CASE("wasserstein2_1d rejects other dimensions") {
  const auto m2 = EmpiricalMeasure::uniform({0.0, 0.0, 1.0, 1.0}, 2);
  CHECK_THROWS_AS(wasserstein2_1d(m2, m2), ConfigError);
}

TEST_CASE("wasserstein2_1d matches brute force on random small instances") {
  RngStream rng(20240501, 0, 0);
  for (int it = 0; it < 200; ++it) {
    const std::size_t count = 1 + rng.next_u64() % 5;
    const auto xs = random_atoms(rng, count, 5.0);
    const auto ys = random_atoms(rng, count, 5.0);
    const double exact = w2_brute_force(xs, ys);
    const double got =
        wasserstein2_1d(EmpiricalMeasure::uniform(xs, 1), EmpiricalMeasure::uniform(ys, 1));
    CHECK(std::abs(got - exact) < 1e-12);
  }
}

TEST_CASE("triangle inequality against brute-force values") {
  RngStream rng(77, 0, 0);
  for (int it = 0; it < 200; ++it) {
    const std::size_t count = 2 + rng.next_u64() % 4;
    const auto xs = random_atoms(rng, count, 3.0);
    const auto ys = random_atoms(rng, count, 3.0);
    const auto zs = random_atoms(rng, count, 3.0);
    const double ab = w2_brute_force(xs, ys);
    const double bc = w2_brute_force(ys, zs);
    const double ac = w2_brute_force(xs, zs);
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("second moment equals squared distance to the origin Dirac") {
  RngStream rng(99, 0, 0);
  const double zero = 0.0;
  const auto dirac0 = EmpiricalMeasure::dirac(std::span<const double>(&zero, 1));
  for (int it = 0; it < 50; ++it) {
    const std::size_t count = 1 + rng.next_u64() % 6;
    const auto xs = random_atoms(rng, count, 4.0);
    const auto mu = EmpiricalMeasure::uniform(xs, 1);
    const double w2 = wasserstein2_1d(mu, dirac0);
    CHECK(w2 * w2 == doctest::Approx(second_moment(mu)).epsilon(1e-10));
  }
}

TEST_CASE("quantile coupling handles general weights") {
  // total mass split unevenly; transporting everything to a point costs
  // the square root of the second moment
  const EmpiricalMeasure mu({1.0, -2.0, 0.5}, 1, {0.5, 0.25, 0.25});
  const double zero = 0.0;
  const auto dirac0 = EmpiricalMeasure::dirac(std::span<const double>(&zero, 1));
  const double expect = std::sqrt(0.5 * 1.0 + 0.25 * 4.0 + 0.25 * 0.25);
  CHECK(wasserstein2_1d(mu, dirac0) == doctest::Approx(expect).epsilon(1e-12));
}
