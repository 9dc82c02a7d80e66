#include <doctest.h>

#include <cmath>

#include "mvldp/errors.hpp"
#include "mvldp/model.hpp"

using namespace mvldp;

TEST_CASE("linear model construction and averaged-drift hook") {
  const ModelSpec spec = build_linear_model(2.0, std::sqrt(2.0), 0.0, 0.0, 0.0);
  // OU stationary mean is theta*x, so b1bar(x) = -x + theta*x = (theta-1)x
  std::vector<double> out(1);
  const double x = 1.0;
  const auto mu = EmpiricalMeasure::dirac(std::span<const double>(&x, 1));
  spec.averaged_drift_hook(std::span<const double>(&x, 1), mu.view(), out);
  CHECK(out[0] == doctest::Approx(1.0));

  // theta = 1: drift cancels at stationarity for every x
  const ModelSpec flat = build_linear_model(1.0, 1.0, 0.0, 0.0, 0.0);
  for (double xv : {-3.0, 0.0, 2.5}) {
    flat.averaged_drift_hook(std::span<const double>(&xv, 1), mu.view(), out);
    CHECK(out[0] == 0.0);
  }
}

TEST_CASE("nonpositive sigma_fast is rejected") {
  CHECK_THROWS_AS(build_linear_model(2.0, 0.0, 0.0, 0.0, 0.0), ModelError);
  CHECK_THROWS_AS(build_linear_model(2.0, -1.0, 0.0, 0.0, 0.0), ModelError);
}

TEST_CASE("check_assumptions passes the linear model with documented constants") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.5, 0.5, 1.0);
  CHECK(spec.constants.c1 == doctest::Approx(16.0));  // 4 max(1,theta)^2
  CHECK(spec.constants.c4 == doctest::Approx(2.0));
  const AssumptionReport rep = check_assumptions(spec, 10000, 10.0, 7);
  CHECK(rep.a1_pass);
  CHECK(rep.a2_pass);
  CHECK(rep.a3_contraction_pass);
  CHECK(rep.a3_growth_pass);
  CHECK(rep.pass());
  // linear b2 with constant sigma2: the contraction quotient is exactly -2
  CHECK(rep.a3_contraction_max == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("anti-dissipative fast drift fails A3") {
  ModelSpec spec = build_linear_model(1.0, 1.0, 0.0, 0.0, 0.0);
  spec.b2 = [](std::span<const double>, const MeasureView&, std::span<const double> y,
               std::span<double> out) { out[0] = +y[0]; };
  const AssumptionReport rep = check_assumptions(spec, 2000, 5.0, 11);
  CHECK_FALSE(rep.a3_contraction_pass);
  CHECK(rep.a3_contraction_max > 0.0);
}

TEST_CASE("identical probe pairs are skipped, not divided by zero") {
  const ModelSpec spec = build_linear_model(2.0, 1.0, 0.0, 0.0, 0.0);
  const AssumptionReport rep = check_assumptions(spec, 100, 0.0, 3);
  CHECK(rep.pairs_evaluated == 0);
  CHECK(rep.pairs_skipped == 100);
  CHECK(rep.a1_max_ratio == 0.0);
  CHECK(rep.pass());  // vacuous on pairs; pointwise checks still run
}

TEST_CASE("non-finite coefficient output names the coefficient") {
  ModelSpec spec = build_linear_model(1.0, 1.0, 0.0, 0.0, 0.0);
  spec.b1 = [](std::span<const double>, const MeasureView&, std::span<const double>,
               std::span<double> out) { out[0] = std::nan(""); };
  try {
    check_assumptions(spec, 100, 1.0, 5);
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("b1") != std::string::npos);
  }
}

TEST_CASE("builtin benchmarks pass their own assumption checks") {
  CHECK(check_assumptions(build_gaussian_benchmark(1.0), 4000, 8.0, 1).pass());
  CHECK(check_assumptions(build_poisson_benchmark(1.0, 1.0), 4000, 8.0, 2).pass());
}

TEST_CASE("model_from_name round trips builtin names") {
  const ModelSpec a = model_from_name("linear1d(theta=2, sigma_fast=1.5, lambda=0.5)");
  CHECK(a.levy.total_rate == doctest::Approx(0.5));
  CHECK(a.constants.c3 == doctest::Approx(2.25));

  const ModelSpec b = model_from_name("gaussian1d(sigma=1)");
  CHECK(b.levy.total_rate == 0.0);
  CHECK_FALSE(b.b1_depends_on_y);

  CHECK_THROWS_AS(model_from_name("linear1d(theeta=2)"), ConfigError);
  CHECK_THROWS_AS(model_from_name("cubic1d()"), ConfigError);
  CHECK_THROWS_AS(model_from_name("linear1d(theta=abc)"), ConfigError);
}
