#include "mvldp/control.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mvldp/errors.hpp"

namespace mvldp {

PiecewiseConstant PiecewiseConstant::constant(double t_end, std::span<const double> value) {
  PiecewiseConstant pc;
  pc.edges = {0.0, t_end};
  pc.values.assign(value.begin(), value.end());
  pc.dim = static_cast<int>(value.size());
  return pc;
}

PiecewiseConstant PiecewiseConstant::uniform_grid(double t_end, std::size_t m, int dim) {
  PiecewiseConstant pc;
  pc.dim = dim;
  pc.edges.resize(m + 1);
  for (std::size_t i = 0; i <= m; ++i)
    pc.edges[i] = t_end * static_cast<double>(i) / static_cast<double>(m);
  pc.values.assign(m * static_cast<std::size_t>(dim), 0.0);
  return pc;
}

std::size_t PiecewiseConstant::interval_index(double t) const {
  // Right-continuous lookup; t past the last edge clamps to the last interval.
  const auto it = std::upper_bound(edges.begin(), edges.end(), t);
  std::size_t idx = static_cast<std::size_t>(it - edges.begin());
  if (idx == 0) return 0;
  idx -= 1;
  return std::min(idx, intervals() - 1);
}

std::span<const double> PiecewiseConstant::value_at(double t) const {
  const std::size_t i = interval_index(t);
  return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
}

double PiecewiseConstant::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void PiecewiseConstant::validate(const std::string& what) const {
  if (edges.size() < 2) throw ConfigError(what + ": needs at least one interval");
  if (edges.front() != 0.0) throw ConfigError(what + ": grid must start at 0");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw ConfigError(what + ": grid edges must be strictly increasing");
  if (values.size() != intervals() * static_cast<std::size_t>(dim))
    throw ConfigError(what + ": value count does not match intervals x dim");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError(what + ": non-finite value");
}

ControlPair ControlPair::null_control(double t_end, int dim_noise) {
  ControlPair c;
  std::vector<double> zeros(static_cast<std::size_t>(dim_noise), 0.0);
  c.psi = PiecewiseConstant::constant(t_end, zeros);
  const double one = 1.0;
  c.phi = PiecewiseConstant::constant(t_end, std::span<const double>(&one, 1));
  return c;
}

void ControlPair::validate(double t_end) const {
  psi.validate("control psi");
  phi.validate("control phi");
  if (phi.dim != 1) throw ConfigError("control phi: must be scalar");
  if (psi.t_end() < t_end - 1e-12 || phi.t_end() < t_end - 1e-12)
    throw ConfigError("control grids must cover [0, t_end]");
  for (double v : phi.values)
    if (!(v > 0.0)) throw NumericsError("control phi must be strictly positive everywhere");
}

std::string ControlPair::to_json() const {
  nlohmann::json j;
  j["psi"] = {{"edges", psi.edges}, {"values", psi.values}, {"dim", psi.dim}};
  j["phi"] = {{"edges", phi.edges}, {"values", phi.values}, {"dim", phi.dim}};
  if (std::isfinite(budget)) j["budget"] = budget;
  j["fast_control_enabled"] = fast_control_enabled;
  return j.dump(2);
}

ControlPair ControlPair::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ControlPair c;
  c.psi.edges = j.at("psi").at("edges").get<std::vector<double>>();
  c.psi.values = j.at("psi").at("values").get<std::vector<double>>();
  c.psi.dim = j.at("psi").at("dim").get<int>();
  c.phi.edges = j.at("phi").at("edges").get<std::vector<double>>();
  c.phi.values = j.at("phi").at("values").get<std::vector<double>>();
  c.phi.dim = j.at("phi").at("dim").get<int>();
  if (j.contains("budget")) c.budget = j["budget"].get<double>();
  if (j.contains("fast_control_enabled"))
    c.fast_control_enabled = j["fast_control_enabled"].get<bool>();
  return c;
}

}  // namespace mvldp
