#include "mvldp/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mvldp/errors.hpp"

namespace mvldp {

void AssumptionParams::validate() const {
  if (!(c4 > 0.0) || !(c5 > 0.0))
    throw ModelError("AssumptionParams: c4 and c5 must be strictly positive");
  for (double c : {c1, c2, c3, c6, rho})
    if (!(c > 0.0) || !std::isfinite(c))
      throw ModelError("AssumptionParams: constants must be positive and finite");
}

void ModelSpec::validate() const {
  if (dim_slow <= 0 || dim_fast <= 0 || dim_noise <= 0)
    throw ModelError("ModelSpec: dimensions must be positive");
  if (!b1 || !b2 || !sigma1 || !sigma2)
    throw ModelError("ModelSpec: b1, b2, sigma1 and sigma2 are required");
  if (!(levy.total_rate >= 0.0) || !std::isfinite(levy.total_rate))
    throw ModelError("ModelSpec: levy total_rate must be finite and non-negative");
  if (levy.total_rate > 0.0 && (!g || !levy.mark_sampler))
    throw ModelError("ModelSpec: positive jump rate requires g and a mark sampler");
  constants.validate();
}

namespace {

void check_finite(std::span<const double> v, const char* coeff) {
  for (double x : v)
    if (!std::isfinite(x))
      throw ModelError(std::string("check_assumptions: coefficient ") + coeff +
                       " returned a non-finite value at a probe point");
}

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Probe {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> atom;  // single-atom measure location
  EmpiricalMeasure mu;
  double t = 0.0;
};

Probe draw_probe(RngStream& rng, int n, double radius, double t_max) {
  Probe p;
  p.x.resize(n);
  p.y.resize(n);
  p.atom.resize(n);
  for (int k = 0; k < n; ++k) {
    p.x[k] = radius * (2.0 * rng.next_u01() - 1.0);
    p.y[k] = radius * (2.0 * rng.next_u01() - 1.0);
    p.atom[k] = radius * (2.0 * rng.next_u01() - 1.0);
  }
  p.mu = EmpiricalMeasure::dirac(p.atom);
  p.t = t_max * rng.next_u01();
  return p;
}

}  // namespace

AssumptionReport check_assumptions(const ModelSpec& spec, std::size_t n_probes, double radius,
                                   std::uint64_t seed) {
  spec.validate();
  if (n_probes < 1) throw ConfigError("check_assumptions: n_probes must be >= 1");
  const int n = spec.dim_slow;
  const int d = spec.dim_noise;
  const std::size_t nd = static_cast<std::size_t>(n) * static_cast<std::size_t>(d);

  RngStream rng(seed, 0, rng_source::probes);
  AssumptionReport rep;
  rep.a3_contraction_max = -std::numeric_limits<double>::infinity();
  rep.a3_growth_excess = -std::numeric_limits<double>::infinity();

  // Fixed mark stencil for the integral term of A1.
  const std::size_t n_marks = spec.levy.total_rate > 0.0 ? 128 : 0;
  std::vector<double> marks(n_marks * static_cast<std::size_t>(spec.levy.mark_dim));
  {
    RngStream mark_rng(seed, 0, rng_source::stencil);
    for (std::size_t m = 0; m < n_marks; ++m)
      spec.levy.mark_sampler(
          mark_rng,
          std::span<double>(marks.data() + m * spec.levy.mark_dim, spec.levy.mark_dim));
  }

  std::vector<double> buf1(static_cast<std::size_t>(n)), buf2(static_cast<std::size_t>(n));
  std::vector<double> mat1(nd), mat2(nd);
  std::vector<double> g1(static_cast<std::size_t>(n)), g2(static_cast<std::size_t>(n));

  for (std::size_t it = 0; it < n_probes; ++it) {
    const Probe p = draw_probe(rng, n, radius, 1.0);
    const Probe q = draw_probe(rng, n, radius, 1.0);
    const MeasureView mu1 = p.mu.view();
    const MeasureView mu2 = q.mu.view();

    // A2 and the A3 growth inequality only need single points.
    spec.sigma2(p.x, mu1, p.y, mat1);
    check_finite(mat1, "sigma2");
    const double denom2 = 1.0 + sq_norm(p.x) + mu1.second_moment();
    rep.a2_max = std::max(rep.a2_max, sq_norm(mat1) / denom2);

    spec.b2(p.x, mu1, p.y, buf1);
    check_finite(buf1, "b2");
    double dot_yb2 = 0.0;
    for (int k = 0; k < n; ++k) dot_yb2 += p.y[k] * buf1[k];
    const double growth_lhs = dot_yb2 + sq_norm(mat1);
    const double growth_rhs = -spec.constants.c5 * sq_norm(p.y) + spec.constants.c6 * denom2;
    rep.a3_growth_excess = std::max(rep.a3_growth_excess, growth_lhs - growth_rhs);

    // Pairwise quotients; a degenerate pair contributes nothing.
    const double dx2 = sq_dist(p.x, q.x);
    const double dy2 = sq_dist(p.y, q.y);
    double w2 = 0.0;
    if (n == 1) {
      w2 = wasserstein2_1d(p.mu, q.mu);
    } else {
      // single-atom measures: W2(delta_a, delta_b) = |a - b| in any dim
      w2 = std::sqrt(sq_dist(p.atom, q.atom));
    }
    const double denom1 = dx2 + dy2 + w2 * w2;
    if (denom1 < 1e-24 && dy2 < 1e-24) {
      ++rep.pairs_skipped;
      continue;
    }

    if (denom1 >= 1e-24) {
      double num = 0.0;
      spec.b1(p.x, mu1, p.y, buf1);
      check_finite(buf1, "b1");
      spec.b1(q.x, mu2, q.y, buf2);
      check_finite(buf2, "b1");
      num += sq_dist(buf1, buf2);
      spec.b2(p.x, mu1, p.y, buf1);
      spec.b2(q.x, mu2, q.y, buf2);
      check_finite(buf2, "b2");
      num += sq_dist(buf1, buf2);
      spec.sigma1(p.x, mu1, mat1);
      check_finite(mat1, "sigma1");
      spec.sigma1(q.x, mu2, mat2);
      check_finite(mat2, "sigma1");
      num += sq_dist(mat1, mat2);
      spec.sigma2(p.x, mu1, p.y, mat1);
      spec.sigma2(q.x, mu2, q.y, mat2);
      check_finite(mat2, "sigma2");
      num += sq_dist(mat1, mat2);
      if (n_marks > 0) {
        double gsum = 0.0;
        for (std::size_t m = 0; m < n_marks; ++m) {
          std::span<const double> z(marks.data() + m * spec.levy.mark_dim,
                                    static_cast<std::size_t>(spec.levy.mark_dim));
          spec.g(p.t, p.x, mu1, z, g1);
          check_finite(g1, "g");
          spec.g(p.t, q.x, mu2, z, g2);
          check_finite(g2, "g");
          gsum += sq_dist(g1, g2);
        }
        num += spec.levy.total_rate * gsum / static_cast<double>(n_marks);
      }
      rep.a1_max_ratio = std::max(rep.a1_max_ratio, num / denom1);
    }

    // A3 contraction: same (x, mu), different y.
    if (dy2 >= 1e-24) {
      spec.b2(p.x, mu1, p.y, buf1);
      spec.b2(p.x, mu1, q.y, buf2);
      double bracket = 0.0;
      for (int k = 0; k < n; ++k) bracket += 2.0 * (p.y[k] - q.y[k]) * (buf1[k] - buf2[k]);
      spec.sigma2(p.x, mu1, p.y, mat1);
      spec.sigma2(p.x, mu1, q.y, mat2);
      bracket += sq_dist(mat1, mat2);
      rep.a3_contraction_max = std::max(rep.a3_contraction_max, bracket / dy2);
    }
    ++rep.pairs_evaluated;
  }

  const double slack = 1e-9;
  rep.a1_pass = rep.pairs_evaluated == 0 ||
                rep.a1_max_ratio <= spec.constants.c1 * (1.0 + slack) + slack;
  rep.a2_pass = rep.a2_max <= spec.constants.c3 * (1.0 + slack) + slack;
  rep.a3_contraction_pass =
      rep.pairs_evaluated == 0 || rep.a3_contraction_max <= -spec.constants.c4 + slack;
  rep.a3_growth_pass = rep.a3_growth_excess <= slack;
  return rep;
}

namespace {

void unit_mark_sampler(RngStream&, std::span<double> out) {
  for (double& v : out) v = 1.0;
}

ModelSpec inert_fast_base() {
  ModelSpec spec;
  spec.dim_slow = spec.dim_fast = spec.dim_noise = 1;
  spec.b2 = [](std::span<const double>, const MeasureView&, std::span<const double> y,
               std::span<double> out) { out[0] = -y[0]; };
  spec.sigma2 = [](std::span<const double>, const MeasureView&, std::span<const double>,
                   std::span<double> out) { out[0] = 1.0; };
  spec.constants.c1 = 2.0;
  spec.constants.c2 = 2.0;
  spec.constants.c3 = 1.0;
  spec.constants.c4 = 2.0;
  spec.constants.c5 = 1.0;
  spec.constants.c6 = 1.0;
  spec.constants.rho = 1.0;
  return spec;
}

}  // namespace

ModelSpec build_linear_model(double theta, double sigma_fast, double sigma_slow,
                             double jump_scale, double lambda) {
  if (!(sigma_fast > 0.0))
    throw ModelError("build_linear_model: sigma_fast must be strictly positive");
  if (sigma_slow < 0.0 || jump_scale < 0.0 || lambda < 0.0)
    throw ModelError("build_linear_model: sigma_slow, jump_scale and lambda must be >= 0");

  ModelSpec spec;
  spec.dim_slow = spec.dim_fast = spec.dim_noise = 1;
  spec.b1 = [](std::span<const double> x, const MeasureView&, std::span<const double> y,
               std::span<double> out) { out[0] = -x[0] + y[0]; };
  spec.b2 = [theta](std::span<const double> x, const MeasureView&, std::span<const double> y,
                    std::span<double> out) { out[0] = -(y[0] - theta * x[0]); };
  spec.sigma1 = [sigma_slow](std::span<const double>, const MeasureView&,
                             std::span<double> out) { out[0] = sigma_slow; };
  spec.sigma2 = [sigma_fast](std::span<const double>, const MeasureView&,
                             std::span<const double>, std::span<double> out) {
    out[0] = sigma_fast;
  };
  spec.g = [jump_scale](double, std::span<const double>, const MeasureView&,
                        std::span<const double> z, std::span<double> out) {
    out[0] = jump_scale * z[0];
  };
  spec.levy.total_rate = lambda;
  spec.levy.mark_dim = 1;
  spec.levy.mark_sampler = unit_mark_sampler;
  spec.levy.g_sq_moment = [lambda, jump_scale](double, std::span<const double>,
                                               const MeasureView&) {
    return lambda * jump_scale * jump_scale;
  };
  spec.mean_g = [lambda, jump_scale](double, std::span<const double>, const MeasureView&,
                                     std::span<double> out) { out[0] = lambda * jump_scale; };
  spec.averaged_drift_hook = [theta](std::span<const double> x, const MeasureView&,
                                     std::span<double> out) { out[0] = (theta - 1.0) * x[0]; };
  spec.b1_depends_on_y = true;

  const double th = std::max(1.0, std::abs(theta));
  spec.constants.c1 = 4.0 * th * th;
  spec.constants.c2 = spec.constants.c1 + sigma_slow * sigma_slow +
                      sigma_fast * sigma_fast + lambda * jump_scale * jump_scale + 1.0;
  spec.constants.c3 = sigma_fast * sigma_fast;
  spec.constants.c4 = 2.0;
  spec.constants.c5 = 0.5;
  spec.constants.c6 = std::max(theta * theta / 2.0, sigma_fast * sigma_fast) + 1e-9;
  spec.constants.rho = 1.0;

  std::ostringstream name;
  name << "linear1d(theta=" << theta << ", sigma_fast=" << sigma_fast
       << ", sigma_slow=" << sigma_slow << ", jump_scale=" << jump_scale
       << ", lambda=" << lambda << ")";
  spec.name = name.str();
  spec.validate();
  return spec;
}

ModelSpec build_gaussian_benchmark(double sigma) {
  ModelSpec spec = inert_fast_base();
  spec.b1 = [](std::span<const double>, const MeasureView&, std::span<const double>,
               std::span<double> out) { out[0] = 0.0; };
  spec.sigma1 = [sigma](std::span<const double>, const MeasureView&, std::span<double> out) {
    out[0] = sigma;
  };
  spec.levy.total_rate = 0.0;
  spec.mean_g = [](double, std::span<const double>, const MeasureView&, std::span<double> out) {
    out[0] = 0.0;
  };
  spec.averaged_drift_hook = [](std::span<const double>, const MeasureView&,
                                std::span<double> out) { out[0] = 0.0; };
  spec.b1_depends_on_y = false;
  std::ostringstream name;
  name << "gaussian1d(sigma=" << sigma << ")";
  spec.name = name.str();
  spec.validate();
  return spec;
}

ModelSpec build_poisson_benchmark(double lambda, double jump_scale) {
  if (!(lambda >= 0.0)) throw ModelError("build_poisson_benchmark: lambda must be >= 0");
  ModelSpec spec = inert_fast_base();
  spec.b1 = [](std::span<const double>, const MeasureView&, std::span<const double>,
               std::span<double> out) { out[0] = 0.0; };
  spec.sigma1 = [](std::span<const double>, const MeasureView&, std::span<double> out) {
    out[0] = 0.0;
  };
  spec.g = [jump_scale](double, std::span<const double>, const MeasureView&,
                        std::span<const double> z, std::span<double> out) {
    out[0] = jump_scale * z[0];
  };
  spec.levy.total_rate = lambda;
  spec.levy.mark_dim = 1;
  spec.levy.mark_sampler = unit_mark_sampler;
  spec.levy.g_sq_moment = [lambda, jump_scale](double, std::span<const double>,
                                               const MeasureView&) {
    return lambda * jump_scale * jump_scale;
  };
  spec.mean_g = [lambda, jump_scale](double, std::span<const double>, const MeasureView&,
                                     std::span<double> out) { out[0] = lambda * jump_scale; };
  spec.averaged_drift_hook = [](std::span<const double>, const MeasureView&,
                                std::span<double> out) { out[0] = 0.0; };
  spec.b1_depends_on_y = false;
  std::ostringstream name;
  name << "poisson1d(lambda=" << lambda << ", jump_scale=" << jump_scale << ")";
  spec.name = name.str();
  spec.validate();
  return spec;
}

namespace {

std::map<std::string, double> parse_kv_args(const std::string& args, const std::string& where) {
  std::map<std::string, double> out;
  std::string token;
  std::istringstream in(args);
  while (std::getline(in, token, ',')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key=value, got '" + token + "'");
    std::string key = token.substr(0, eq);
    std::string val = token.substr(eq + 1);
    auto strip = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    strip(key);
    strip(val);
    try {
      std::size_t used = 0;
      const double v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
      out[key] = v;
    } catch (const std::exception&) {
      throw ConfigError(where + ": value for '" + key + "' is not a number: '" + val + "'");
    }
  }
  return out;
}

double take(std::map<std::string, double>& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const double v = it->second;
  kv.erase(it);
  return v;
}

}  // namespace

ModelSpec model_from_name(const std::string& text) {
  const auto open = text.find('(');
  std::string base = open == std::string::npos ? text : text.substr(0, open);
  std::string args;
  if (open != std::string::npos) {
    const auto close = text.rfind(')');
    if (close == std::string::npos || close < open)
      throw ConfigError("model_from_name: unbalanced parentheses in '" + text + "'");
    args = text.substr(open + 1, close - open - 1);
  }
  auto strip = [](std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  };
  strip(base);

  auto kv = parse_kv_args(args, "model '" + base + "'");
  auto reject_leftovers = [&](const char* known) {
    if (!kv.empty())
      throw ConfigError("model '" + base + "': unknown parameter '" + kv.begin()->first +
                        "' (known: " + known + ")");
  };

  if (base == "linear1d") {
    const double theta = take(kv, "theta", 1.0);
    const double sigma_fast = take(kv, "sigma_fast", 1.0);
    const double sigma_slow = take(kv, "sigma_slow", 0.0);
    const double jump_scale = take(kv, "jump_scale", 0.0);
    const double lambda = take(kv, "lambda", 0.0);
    reject_leftovers("theta, sigma_fast, sigma_slow, jump_scale, lambda");
    return build_linear_model(theta, sigma_fast, sigma_slow, jump_scale, lambda);
  }
  if (base == "gaussian1d") {
    const double sigma = take(kv, "sigma", 1.0);
    reject_leftovers("sigma");
    return build_gaussian_benchmark(sigma);
  }
  if (base == "poisson1d") {
    const double lambda = take(kv, "lambda", 1.0);
    const double jump_scale = take(kv, "jump_scale", 1.0);
    reject_leftovers("lambda, jump_scale");
    return build_poisson_benchmark(lambda, jump_scale);
  }
  throw ConfigError("model_from_name: unknown builtin model '" + base +
                    "' (known: linear1d, gaussian1d, poisson1d)");
}

}  // namespace mvldp
