#ifndef MVLDP_EXPERIMENTS_HPP
#define MVLDP_EXPERIMENTS_HPP

// End-to-end LDP verification: rare-event probabilities under the plain
// dynamics, importance sampling under the controlled dynamics with
// Girsanov/Poisson-tilting weights, and persisted report tables.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mvldp/control.hpp"
#include "mvldp/model.hpp"
#include "mvldp/sde.hpp"

namespace mvldp {

struct TailEvent {
  enum class Kind { endpoint_geq, endpoint_in_ball } kind = Kind::endpoint_geq;
  std::vector<double> level_or_center = {1.0};
  double radius = 0.0;  // endpoint_in_ball only; +inf makes the event sure

  bool contains(std::span<const double> x) const;
};

struct LdpRow {
  double eps = 0.0;
  double delta = 0.0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double neg_eps_log_p = 0.0;  // +inf on underflow
  double i_ref = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_samples = 0;
  std::string method = "plain";  // "plain" | "importance"
  bool underflow = false;        // zero observed hits
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct LdpTable {
  std::vector<LdpRow> rows;
  std::string model_name;

  std::string to_csv() const;  // exact columns:
  // eps,delta,p_hat,ci_lo,ci_hi,neg_eps_log_p,i_ref,n_samples,method
};

struct LdpOptions {
  // NaN + compute = true derives I from rate_endpoint at the event level.
  double i_ref = std::numeric_limits<double>::quiet_NaN();
  bool compute_i_ref = true;
  double rate_tol_hit = 1e-3;
  std::size_t rate_m1 = 4;
  std::size_t rate_m2 = 4;
};

// Plain Monte Carlo frequencies with Wilson CIs for each epsilon in
// eps_list (delta = eps^2). Zero-hit rows are flagged "underflow", not
// errors; the attached advice is to switch to importance sampling.
LdpTable ldp_tail_estimate(const ModelSpec& spec, const SimConfig& cfg_template,
                           const TailEvent& event, const std::vector<double>& eps_list,
                           std::size_t n_samples, const LdpOptions& opts = {});

// Importance-sampled row at one epsilon: simulates the controlled system
// and reweights by the likelihood ratio
//   exp(-(1/sqrt(eps)) int psi.dW - (1/2eps) int |psi|^2 dt)
//   * prod (1/phi at jumps) * exp((lambda/eps) int (phi - 1) dt).
// A weight-variance ratio above 10^3 vs plain MC attaches a
// degenerate-tilt warning to the row.
LdpRow is_tail_estimate(const ModelSpec& spec, const SimConfig& cfg_template,
                        const TailEvent& event, double eps, const ControlPair& control,
                        std::size_t n_samples,
                        double i_ref = std::numeric_limits<double>::quiet_NaN());

// One persisted artifact: preformatted text (CSV unless the extension
// says otherwise) plus a JSON metadata blob that lands in the manifest
// (configs, seeds).
struct ReportTable {
  std::string name;  // artifact stem, "<name>.<extension>"
  std::string csv_text;
  std::string meta_json = "{}";
  std::string extension = "csv";
};

struct ReportManifest {
  std::string path;  // manifest file location
  std::string json;
};

// Writes every table as CSV plus one versioned JSON manifest
// ("mvldp-report/1"). Re-emitting the same tables reproduces the CSVs
// byte-identically; only the manifest timestamps move.
ReportManifest emit_report(const std::vector<ReportTable>& tables, const std::string& out_dir,
                           double wall_clock_s = 0.0);

// 95% Wilson interval for a binomial frequency.
struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};
WilsonInterval wilson_interval(std::size_t hits, std::size_t n);

}  // namespace mvldp

#endif
