#include "mvldp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mvldp/averaging.hpp"
#include "mvldp/errors.hpp"
#include "mvldp/variational.hpp"
#include "mvldp/version.hpp"

namespace mvldp {

bool TailEvent::contains(std::span<const double> x) const {
  if (kind == Kind::endpoint_geq) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= level_or_center[i])) return false;
    return true;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - level_or_center[i];
    d2 += d * d;
  }
  if (std::isinf(radius)) return true;
  return d2 <= radius * radius;
}

WilsonInterval wilson_interval(std::size_t hits, std::size_t n) {
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  WilsonInterval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (hits == 0) ci.lo = 0.0;
  if (hits == n) ci.hi = 1.0;
  return ci;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SimConfig config_for_eps(const SimConfig& tmpl, double eps, std::size_t n_samples,
                         std::uint64_t seed) {
  SimConfig cfg = tmpl;
  cfg.epsilon = eps;
  cfg.delta = eps * eps;  // fixed delta-rule for all LDP tables
  cfg.dt = std::min(tmpl.dt, cfg.delta / 10.0);
  cfg.n_particles = n_samples;
  cfg.seed = seed;
  cfg.record_stride = 0;  // endpoints only
  cfg.block_delta = 0.0;
  return cfg;
}

double rate_reference(const ModelSpec& spec, const SimConfig& cfg, const TailEvent& event,
                      const LdpOptions& opts) {
  if (!opts.compute_i_ref || !std::isnan(opts.i_ref)) return opts.i_ref;
  if (!spec.averaged_drift_hook) return std::numeric_limits<double>::quiet_NaN();
  try {
    const AveragedPath averaged =
        averaged_ode_solve(spec, cfg.x0, cfg.t_end, cfg.t_end / 1000.0, DriftMode::analytic());
    OptimizerConfig opt;
    const RateResult rr = rate_endpoint(spec, averaged, event.level_or_center,
                                        opts.rate_tol_hit, opts.rate_m1, opts.rate_m2, opt);
    return rr.value;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

LdpTable ldp_tail_estimate(const ModelSpec& spec, const SimConfig& cfg_template,
                           const TailEvent& event, const std::vector<double>& eps_list,
                           std::size_t n_samples, const LdpOptions& opts) {
  if (eps_list.empty()) throw ConfigError("ldp_tail_estimate: empty eps_list");
  if (n_samples < 1000) throw ConfigError("ldp_tail_estimate: n_samples must be >= 1000");
  if (event.level_or_center.size() != static_cast<std::size_t>(spec.dim_slow))
    throw ConfigError("ldp_tail_estimate: event dimension does not match the model");

  const double i_ref = rate_reference(spec, cfg_template, event, opts);

  LdpTable table;
  table.model_name = spec.name;

  // pilot at the largest epsilon: a sure miss there means every row will
  // underflow, worth saying up front
  std::string pilot_warning;
  {
    const double eps0 = *std::max_element(eps_list.begin(), eps_list.end());
    const std::size_t n_pilot = std::min<std::size_t>(1000, n_samples);
    const SimConfig pcfg =
        config_for_eps(cfg_template, eps0, n_pilot, derive_seed(cfg_template.seed, 0x9110));
    const PathRecord rec = simulate_coupled(spec, pcfg);
    const auto& fin = rec.final_ensemble();
    std::size_t hits = 0;
    for (std::size_t p = 0; p < fin.n_particles; ++p)
      if (event.contains(fin.slow_point(p))) ++hits;
    if (hits == 0)
      pilot_warning = "pilot run at the largest epsilon saw zero hits; expect underflow";
  }

  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    const std::uint64_t seed = derive_seed(cfg_template.seed, 100 + ei);
    const SimConfig cfg = config_for_eps(cfg_template, eps, n_samples, seed);
    const PathRecord rec = simulate_coupled(spec, cfg);
    const auto& fin = rec.final_ensemble();
    std::size_t hits = 0;
    for (std::size_t p = 0; p < fin.n_particles; ++p)
      if (event.contains(fin.slow_point(p))) ++hits;

    LdpRow row;
    row.eps = eps;
    row.delta = cfg.delta;
    row.n_samples = n_samples;
    row.seed = seed;
    row.method = "plain";
    row.i_ref = i_ref;
    row.p_hat = static_cast<double>(hits) / static_cast<double>(n_samples);
    const WilsonInterval ci = wilson_interval(hits, n_samples);
    row.ci_lo = ci.lo;
    row.ci_hi = ci.hi;
    if (hits == 0) {
      row.underflow = true;
      row.neg_eps_log_p = std::numeric_limits<double>::infinity();
      row.warnings.push_back("underflow: zero hits; advise importance sampling");
    } else {
      row.neg_eps_log_p = -eps * std::log(row.p_hat);
    }
    if (!pilot_warning.empty()) row.warnings.push_back(pilot_warning);
    table.rows.push_back(std::move(row));
  }
  return table;
}

LdpRow is_tail_estimate(const ModelSpec& spec, const SimConfig& cfg_template,
                        const TailEvent& event, double eps, const ControlPair& control,
                        std::size_t n_samples, double i_ref) {
  if (event.level_or_center.size() != static_cast<std::size_t>(spec.dim_slow))
    throw ConfigError("is_tail_estimate: event dimension does not match the model");
  const SimConfig cfg = config_for_eps(cfg_template, eps, n_samples, cfg_template.seed);
  const PathRecord rec = simulate_controlled(spec, cfg, control);
  const auto& fin = rec.final_ensemble();

  // ordered accumulation over the particle index keeps the estimator
  // bit-reproducible
  std::vector<double> weights(n_samples, 0.0);
  double mean = 0.0;
  for (std::size_t p = 0; p < n_samples; ++p) {
    if (event.contains(fin.slow_point(p)))
      weights[p] = std::exp(rec.log_weights[p]);
    mean += weights[p];
  }
  mean /= static_cast<double>(n_samples);

  double var = 0.0;
  for (double w : weights) {
    const double d = w - mean;
    var += d * d;
  }
  var /= std::max<std::size_t>(1, n_samples - 1);

  LdpRow row;
  row.eps = eps;
  row.delta = cfg.delta;
  row.n_samples = n_samples;
  row.seed = cfg.seed;
  row.method = "importance";
  row.i_ref = i_ref;
  row.p_hat = mean;
  if (mean <= 0.0) {
    row.underflow = true;
    row.neg_eps_log_p = std::numeric_limits<double>::infinity();
    row.warnings.push_back("underflow: zero weighted hits");
  } else {
    row.neg_eps_log_p = -eps * std::log(mean);
  }

  // percentile bootstrap (10^3 resamples) over contiguous batch means
  const std::size_t n_batches = std::min<std::size_t>(1000, n_samples);
  std::vector<double> batch_mean(n_batches, 0.0);
  std::vector<std::size_t> batch_size(n_batches, 0);
  for (std::size_t p = 0; p < n_samples; ++p) {
    const std::size_t b = p * n_batches / n_samples;
    batch_mean[b] += weights[p];
    ++batch_size[b];
  }
  for (std::size_t b = 0; b < n_batches; ++b)
    batch_mean[b] /= static_cast<double>(batch_size[b]);
  constexpr std::size_t B = 1000;
  std::vector<double> boot(B);
  RngStream boot_rng(derive_seed(cfg.seed, 0xB007), 0, rng_source::bootstrap);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_batches; ++k) s += batch_mean[boot_rng.next_u64() % n_batches];
    boot[b] = s / static_cast<double>(n_batches);
  }
  std::sort(boot.begin(), boot.end());
  row.ci_lo = std::max(0.0, boot[static_cast<std::size_t>(0.025 * static_cast<double>(B - 1))]);
  row.ci_hi = boot[static_cast<std::size_t>(0.975 * static_cast<double>(B - 1))];

  const double plain_var = row.p_hat * (1.0 - row.p_hat);
  if (plain_var > 0.0 && var / plain_var > 1e3)
    row.warnings.push_back("degenerate tilt: weight variance ratio above 1e3 vs plain MC");
  return row;
}

std::string LdpTable::to_csv() const {
  std::ostringstream out;
  out << "eps,delta,p_hat,ci_lo,ci_hi,neg_eps_log_p,i_ref,n_samples,method\n";
  for (const auto& r : rows) {
    out << format_double(r.eps) << ',' << format_double(r.delta) << ','
        << format_double(r.p_hat) << ',' << format_double(r.ci_lo) << ','
        << format_double(r.ci_hi) << ',' << format_double(r.neg_eps_log_p) << ','
        << format_double(r.i_ref) << ',' << r.n_samples << ',' << r.method << '\n';
  }
  return out.str();
}

ReportManifest emit_report(const std::vector<ReportTable>& tables, const std::string& out_dir,
                           double wall_clock_s) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("emit_report: cannot create output directory " + out_dir);

  nlohmann::json manifest;
  manifest["schema"] = "mvldp-report/1";
  manifest["software_version"] = MVLDP_VERSION;
  manifest["wall_clock_s"] = wall_clock_s;
  manifest["created_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  manifest["artifacts"] = nlohmann::json::array();

  for (const auto& table : tables) {
    const fs::path csv_path = fs::path(out_dir) / (table.name + "." + table.extension);
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("emit_report: cannot open " + csv_path.string());
    out << table.csv_text;
    if (!out) throw IoError("emit_report: write failed for " + csv_path.string());
    nlohmann::json entry;
    entry["name"] = table.name;
    entry["path"] = csv_path.string();
    entry["bytes"] = table.csv_text.size();
    entry["meta"] = nlohmann::json::parse(table.meta_json);
    manifest["artifacts"].push_back(entry);
  }

  ReportManifest result;
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  result.path = manifest_path.string();
  result.json = manifest.dump(2);
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("emit_report: cannot open " + manifest_path.string());
  out << result.json << "\n";
  if (!out) throw IoError("emit_report: write failed for " + manifest_path.string());
  return result;
}

}  // namespace mvldp
