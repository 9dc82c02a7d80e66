#include "mvldp/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvldp/errors.hpp"

namespace mvldp {

namespace {

struct RawEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

using Section = std::map<std::string, RawEntry>;
using Document = std::map<std::string, Section>;

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_key(const std::string& key, const std::vector<std::string>& known) {
  std::string best;
  std::size_t best_d = key.size() + 8;
  for (const auto& k : known) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Document tokenize(const std::string& text, std::vector<ConfigIssue>& issues) {
  Document doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({line_no, "malformed section header '" + line + "'"});
        continue;
      }
      section = strip(line.substr(1, line.size() - 2));
      doc[section];  // an empty section is still a section
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, "expected 'key = value', got '" + line + "'"});
      continue;
    }
    if (section.empty()) {
      issues.push_back({line_no, "key outside any [section]"});
      continue;
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (doc[section].count(key))
      issues.push_back({line_no, "duplicate key '" + key + "' in [" + section + "]"});
    doc[section][key] = RawEntry{value, line_no, false};
  }
  return doc;
}

class Reader {
 public:
  Reader(Document& doc, std::vector<ConfigIssue>& issues) : doc_(doc), issues_(issues) {}

  bool has_section(const std::string& name) const { return doc_.count(name) > 0; }

  RawEntry* find(const std::string& section, const std::string& key) {
    auto sit = doc_.find(section);
    if (sit == doc_.end()) return nullptr;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    kit->second.used = true;
    return &kit->second;
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    RawEntry* e = find(section, key);
    if (!e) return fallback;
    return parse_number(*e, key);
  }

  std::uint64_t unsigned_(const std::string& section, const std::string& key,
                          std::uint64_t fallback) {
    RawEntry* e = find(section, key);
    if (!e) return fallback;
    try {
      // stoull silently wraps negatives, so reject them up front
      if (e->value.find('-') != std::string::npos) throw std::invalid_argument(e->value);
      std::size_t used = 0;
      const unsigned long long v = std::stoull(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument(e->value);
      return v;
    } catch (const std::exception&) {
      issues_.push_back({e->line, "value of '" + key + "' is not a non-negative integer: '" +
                                      e->value + "'"});
      return fallback;
    }
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    RawEntry* e = find(section, key);
    if (!e) return fallback;
    std::string v = e->value;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    issues_.push_back({e->line, "value of '" + key + "' is not a boolean: '" + e->value + "'"});
    return fallback;
  }

  std::string string_(const std::string& section, const std::string& key,
                      const std::string& fallback) {
    RawEntry* e = find(section, key);
    return e ? e->value : fallback;
  }

  std::vector<double> list(const std::string& section, const std::string& key,
                           std::vector<double> fallback) {
    RawEntry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    std::istringstream in(e->value);
    std::string token;
    while (std::getline(in, token, ',')) {
      token = strip(token);
      if (token.empty()) continue;
      try {
        std::size_t used = 0;
        out.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        issues_.push_back({e->line, "list value of '" + key + "' has a non-number: '" +
                                        token + "'"});
        return fallback;
      }
    }
    if (out.empty()) {
      issues_.push_back({e->line, "list value of '" + key + "' is empty"});
      return fallback;
    }
    return out;
  }

  void check_unknown_keys(const std::string& section, const std::vector<std::string>& known) {
    auto sit = doc_.find(section);
    if (sit == doc_.end()) return;
    for (auto& [key, entry] : sit->second) {
      if (entry.used) continue;
      const std::string hint = nearest_key(key, known);
      std::string msg = "unknown key '" + key + "' in [" + section + "]";
      if (!hint.empty()) msg += "; nearest valid key is '" + hint + "'";
      issues_.push_back({entry.line, msg});
    }
  }

  void require_section(const std::string& name) {
    if (!has_section(name))
      issues_.push_back({0, "missing required section [" + name + "]"});
  }

 private:
  double parse_number(RawEntry& e, const std::string& key) {
    try {
      std::size_t used = 0;
      const double v = std::stod(e.value, &used);
      if (used != e.value.size()) throw std::invalid_argument(e.value);
      return v;
    } catch (const std::exception&) {
      issues_.push_back({e.line, "value of '" + key + "' is not a number: '" + e.value + "'"});
      return 0.0;
    }
  }

  Document& doc_;
  std::vector<ConfigIssue>& issues_;
};

const std::vector<std::string> kModelKeys = {"name",       "theta",      "sigma_fast",
                                             "sigma_slow", "jump_scale", "lambda",
                                             "sigma"};
const std::vector<std::string> kLevyKeys = {"total_rate"};
const std::vector<std::string> kConstantsKeys = {"c1", "c2", "c3", "c4", "c5", "c6", "rho"};
const std::vector<std::string> kSimKeys = {"epsilon", "delta",       "t_end",
                                           "dt",      "n_particles", "seed",
                                           "x0",      "y0",          "record_stride",
                                           "save_paths", "block_delta"};
const std::vector<std::string> kControlKeys = {"m1",  "m2",  "target",       "tol_hit",
                                               "psi", "phi", "fast_control", "opt_seed",
                                               "n_starts"};
const std::vector<std::string> kAveragingKeys = {"n_samples", "burn_in", "thinning",
                                                 "dt_fast",   "drift_mode", "se_tol",
                                                 "ode_dt"};
const std::vector<std::string> kExperimentKeys = {"eps_list", "n_rep", "delta_rule"};
const std::vector<std::string> kLdpKeys = {"eps_list", "n_samples", "event",
                                           "level",    "radius",    "importance"};
const std::vector<std::string> kCheckKeys = {"n_probes", "radius"};

std::string build_model_name(Reader& reader, std::vector<ConfigIssue>& issues) {
  const std::string name = reader.string_("model", "name", "");
  if (name.empty()) {
    issues.push_back({0, "[model] requires a 'name' (builtin: linear1d, gaussian1d, poisson1d)"});
    return "";
  }
  if (name.find('(') != std::string::npos) return name;  // fully spelled out
  std::ostringstream args;
  bool first = true;
  for (const char* key : {"theta", "sigma_fast", "sigma_slow", "jump_scale", "lambda", "sigma"}) {
    RawEntry* e = reader.find("model", key);
    if (!e) continue;
    if (!first) args << ", ";
    args << key << "=" << e->value;
    first = false;
  }
  return name + "(" + args.str() + ")";
}

}  // namespace

std::string format_issue(const ConfigIssue& issue) {
  if (issue.line <= 0) return issue.message;
  std::ostringstream out;
  out << "line " << issue.line << ": " << issue.message;
  return out.str();
}

RunConfig parse_config(const std::string& text, const std::string& subcommand) {
  static const std::vector<std::string> kSubcommands = {"simulate", "average", "skeleton",
                                                        "rate",     "ldp",     "check"};
  if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end())
    throw ConfigError("unknown subcommand '" + subcommand + "'");

  std::vector<ConfigIssue> issues;
  Document doc = tokenize(text, issues);
  Reader reader(doc, issues);

  RunConfig cfg;
  cfg.subcommand = subcommand;

  reader.require_section("model");
  if (subcommand == "simulate" || subcommand == "average" || subcommand == "skeleton" ||
      subcommand == "rate" || subcommand == "ldp")
    reader.require_section("sim");
  if (subcommand == "skeleton" || subcommand == "rate") reader.require_section("control");
  if (subcommand == "ldp") reader.require_section("ldp");

  if (reader.has_section("model")) {
    cfg.model_name = build_model_name(reader, issues);
    if (!cfg.model_name.empty()) {
      try {
        cfg.model = model_from_name(cfg.model_name);
      } catch (const Error& e) {
        issues.push_back({0, e.what()});
      }
    }
  }

  // optional overrides of the builtin jump rate and assumption constants
  if (reader.has_section("levy")) {
    cfg.model.levy.total_rate =
        reader.number("levy", "total_rate", cfg.model.levy.total_rate);
    if (cfg.model.levy.total_rate < 0.0)
      issues.push_back({0, "[levy] total_rate must be >= 0"});
  }
  if (reader.has_section("constants")) {
    AssumptionParams& c = cfg.model.constants;
    c.c1 = reader.number("constants", "c1", c.c1);
    c.c2 = reader.number("constants", "c2", c.c2);
    c.c3 = reader.number("constants", "c3", c.c3);
    c.c4 = reader.number("constants", "c4", c.c4);
    c.c5 = reader.number("constants", "c5", c.c5);
    c.c6 = reader.number("constants", "c6", c.c6);
    c.rho = reader.number("constants", "rho", c.rho);
    try {
      c.validate();
    } catch (const Error& e) {
      issues.push_back({0, e.what()});
    }
  }

  if (reader.has_section("sim")) {
    cfg.sim.epsilon = reader.number("sim", "epsilon", cfg.sim.epsilon);
    cfg.sim.delta = reader.number("sim", "delta", cfg.sim.epsilon * cfg.sim.epsilon);
    cfg.sim.t_end = reader.number("sim", "t_end", cfg.sim.t_end);
    cfg.sim.dt = reader.number("sim", "dt", cfg.sim.delta / 10.0);
    cfg.sim.n_particles =
        static_cast<std::size_t>(reader.unsigned_("sim", "n_particles", cfg.sim.n_particles));
    cfg.sim.seed = reader.unsigned_("sim", "seed", cfg.sim.seed);
    cfg.sim.x0 = reader.list("sim", "x0", cfg.sim.x0);
    cfg.sim.y0 = reader.list("sim", "y0", cfg.sim.y0);
    cfg.sim.record_stride = static_cast<std::size_t>(
        reader.unsigned_("sim", "record_stride", cfg.sim.record_stride));
    cfg.sim.block_delta = reader.number("sim", "block_delta", cfg.sim.block_delta);
    cfg.save_paths = reader.boolean("sim", "save_paths", false);
  }

  if (reader.has_section("control")) {
    ControlSection ctl;
    ctl.m1 = static_cast<std::size_t>(reader.unsigned_("control", "m1", ctl.m1));
    ctl.m2 = static_cast<std::size_t>(reader.unsigned_("control", "m2", ctl.m2));
    ctl.target = reader.list("control", "target", ctl.target);
    ctl.tol_hit = reader.number("control", "tol_hit", ctl.tol_hit);
    ctl.psi = reader.list("control", "psi", {});
    ctl.phi = reader.list("control", "phi", {});
    ctl.fast_control = reader.boolean("control", "fast_control", true);
    ctl.opt_seed = reader.unsigned_("control", "opt_seed", ctl.opt_seed);
    ctl.n_starts = static_cast<std::size_t>(reader.unsigned_("control", "n_starts", ctl.n_starts));
    cfg.control = ctl;
  }

  if (reader.has_section("averaging")) {
    cfg.averaging.n_samples = static_cast<std::size_t>(
        reader.unsigned_("averaging", "n_samples", cfg.averaging.n_samples));
    cfg.averaging.burn_in = reader.number("averaging", "burn_in", cfg.averaging.burn_in);
    cfg.averaging.thinning = reader.number("averaging", "thinning", cfg.averaging.thinning);
    cfg.averaging.dt_fast = reader.number("averaging", "dt_fast", cfg.averaging.dt_fast);
    cfg.averaging.drift_mode =
        reader.string_("averaging", "drift_mode", cfg.averaging.drift_mode);
    cfg.averaging.se_tol = reader.number("averaging", "se_tol", cfg.averaging.se_tol);
    cfg.averaging.ode_dt = reader.number("averaging", "ode_dt", cfg.averaging.ode_dt);
    if (cfg.averaging.drift_mode != "analytic" && cfg.averaging.drift_mode != "monte_carlo")
      issues.push_back({0, "[averaging] drift_mode must be 'analytic' or 'monte_carlo'"});
  }

  if (reader.has_section("experiment")) {
    ExperimentSection exp;
    exp.eps_list = reader.list("experiment", "eps_list", {});
    exp.n_rep = static_cast<std::size_t>(reader.unsigned_("experiment", "n_rep", exp.n_rep));
    exp.delta_rule = reader.string_("experiment", "delta_rule", exp.delta_rule);
    if (exp.delta_rule != "eps2" && exp.delta_rule != "eps3")
      issues.push_back({0, "[experiment] delta_rule must be 'eps2' or 'eps3'"});
    if (exp.eps_list.empty())
      issues.push_back({0, "[experiment] requires a non-empty eps_list"});
    cfg.experiment = exp;
  }

  if (reader.has_section("ldp")) {
    LdpSection ldp;
    ldp.eps_list = reader.list("ldp", "eps_list", {});
    ldp.n_samples = static_cast<std::size_t>(reader.unsigned_("ldp", "n_samples", ldp.n_samples));
    ldp.event_kind = reader.string_("ldp", "event", ldp.event_kind);
    ldp.level = reader.list("ldp", "level", ldp.level);
    ldp.radius = reader.number("ldp", "radius", ldp.radius);
    ldp.importance = reader.boolean("ldp", "importance", ldp.importance);
    if (ldp.event_kind != "geq" && ldp.event_kind != "ball")
      issues.push_back({0, "[ldp] event must be 'geq' or 'ball'"});
    if (ldp.eps_list.empty() && subcommand == "ldp")
      issues.push_back({0, "[ldp] requires a non-empty eps_list"});
    cfg.ldp = ldp;
  }

  if (reader.has_section("check")) {
    cfg.check.n_probes =
        static_cast<std::size_t>(reader.unsigned_("check", "n_probes", cfg.check.n_probes));
    cfg.check.radius = reader.number("check", "radius", cfg.check.radius);
  }

  reader.check_unknown_keys("model", kModelKeys);
  reader.check_unknown_keys("levy", kLevyKeys);
  reader.check_unknown_keys("constants", kConstantsKeys);
  reader.check_unknown_keys("sim", kSimKeys);
  reader.check_unknown_keys("control", kControlKeys);
  reader.check_unknown_keys("averaging", kAveragingKeys);
  reader.check_unknown_keys("experiment", kExperimentKeys);
  reader.check_unknown_keys("ldp", kLdpKeys);
  reader.check_unknown_keys("check", kCheckKeys);
  for (const auto& [name, section] : doc) {
    static const std::vector<std::string> kSections = {"model", "levy",       "constants",
                                                       "sim",   "control",    "averaging",
                                                       "ldp",   "experiment", "check"};
    if (std::find(kSections.begin(), kSections.end(), name) == kSections.end())
      issues.push_back({0, "unknown section [" + name + "]"});
  }

  if (!issues.empty()) {
    std::vector<std::string> details;
    details.reserve(issues.size());
    for (const auto& issue : issues) details.push_back(format_issue(issue));
    std::ostringstream msg;
    msg << "configuration has " << issues.size() << " problem(s)";
    throw ConfigError(msg.str(), std::move(details));
  }
  return cfg;
}

}  // namespace mvldp
