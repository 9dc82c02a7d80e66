#ifndef MVLDP_CONFIG_HPP
#define MVLDP_CONFIG_HPP

// Sectioned key-value run configuration. The grammar is line-based:
//   [section]
//   key = value        # trailing comments allowed
// Parsing collects every problem (unknown keys with a nearest-key hint,
// missing sections, bad values) instead of stopping at the first one.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvldp/averaging.hpp"
#include "mvldp/model.hpp"
#include "mvldp/sde.hpp"

namespace mvldp {

struct ConfigIssue {
  int line = 0;  // 0 = file-level issue
  std::string message;
};

struct LdpSection {
  std::vector<double> eps_list;
  std::size_t n_samples = 10000;
  std::string event_kind = "geq";  // "geq" | "ball"
  std::vector<double> level = {1.0};
  double radius = 0.0;
  bool importance = false;
};

struct ControlSection {
  std::size_t m1 = 4;
  std::size_t m2 = 4;
  std::vector<double> target = {1.0};
  double tol_hit = 1e-3;
  std::vector<double> psi;  // values over a uniform m1-grid (skeleton runs)
  std::vector<double> phi;  // values over a uniform m2-grid (skeleton runs)
  bool fast_control = true;
  std::uint64_t opt_seed = 1234;
  std::size_t n_starts = 5;
};

struct AveragingSection {
  std::size_t n_samples = 10000;
  double burn_in = -1.0;   // < 0 = heuristic default 5/c4
  double thinning = -1.0;  // < 0 = heuristic default 1/c4
  double dt_fast = -1.0;
  std::string drift_mode = "analytic";  // "analytic" | "monte_carlo"
  double se_tol = 0.05;
  double ode_dt = 1e-3;
};

struct ExperimentSection {
  std::vector<double> eps_list;
  std::size_t n_rep = 4;
  std::string delta_rule = "eps2";  // "eps2" | "eps3"
};

struct CheckSection {
  std::size_t n_probes = 10000;
  double radius = 10.0;
};

struct RunConfig {
  std::string subcommand;
  std::string model_name;
  ModelSpec model;
  SimConfig sim;
  bool save_paths = false;
  std::optional<ControlSection> control;
  AveragingSection averaging;
  std::optional<ExperimentSection> experiment;
  std::optional<LdpSection> ldp;
  CheckSection check;
};

// Parses and validates against the requirements of `subcommand`
// (simulate|average|skeleton|rate|ldp|check). Throws ConfigError whose
// details() list every issue found.
RunConfig parse_config(const std::string& text, const std::string& subcommand);

// Formats "line N: message" (or just the message for file-level issues).
std::string format_issue(const ConfigIssue& issue);

}  // namespace mvldp

#endif
