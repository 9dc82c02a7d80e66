#include "mvldp/cli.hpp"

#include <chrono>
#include <filesystem>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvldp/config.hpp"
#include "mvldp/errors.hpp"
#include "mvldp/experiments.hpp"
#include "mvldp/parallel.hpp"
#include "mvldp/variational.hpp"
#include "mvldp/version.hpp"

namespace mvldp::cli {

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool quiet = false;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json config_meta(const RunConfig& cfg) {
  nlohmann::json meta;
  meta["model"] = cfg.model_name;
  meta["subcommand"] = cfg.subcommand;
  meta["seed"] = cfg.sim.seed;
  meta["epsilon"] = cfg.sim.epsilon;
  meta["delta"] = cfg.sim.delta;
  meta["t_end"] = cfg.sim.t_end;
  meta["dt"] = cfg.sim.dt;
  meta["n_particles"] = cfg.sim.n_particles;
  meta["x0"] = cfg.sim.x0;
  meta["y0"] = cfg.sim.y0;
  meta["threads"] = par::max_threads();
  return meta;
}

FrozenFastConfig frozen_cfg_from(const RunConfig& cfg) {
  FrozenFastConfig ff =
      FrozenFastConfig::defaults_for(cfg.model.constants, cfg.averaging.n_samples,
                                     derive_seed(cfg.sim.seed, 0xFF));
  if (cfg.averaging.burn_in >= 0.0) ff.burn_in = cfg.averaging.burn_in;
  if (cfg.averaging.thinning > 0.0) ff.thinning = cfg.averaging.thinning;
  if (cfg.averaging.dt_fast > 0.0) ff.dt_fast = cfg.averaging.dt_fast;
  return ff;
}

DriftMode drift_mode_from(const RunConfig& cfg) {
  if (cfg.averaging.drift_mode == "monte_carlo")
    return DriftMode::monte_carlo(frozen_cfg_from(cfg), cfg.averaging.se_tol);
  return DriftMode::analytic();
}

ControlPair control_from(const RunConfig& cfg, int dim_noise) {
  const ControlSection& ctl = *cfg.control;
  ControlPair control = ControlPair::null_control(cfg.sim.t_end, dim_noise);
  if (!ctl.psi.empty()) {
    const std::size_t m = ctl.psi.size() / static_cast<std::size_t>(dim_noise);
    control.psi = PiecewiseConstant::uniform_grid(cfg.sim.t_end, m, dim_noise);
    control.psi.values = ctl.psi;
  }
  if (!ctl.phi.empty()) {
    control.phi = PiecewiseConstant::uniform_grid(cfg.sim.t_end, ctl.phi.size(), 1);
    control.phi.values = ctl.phi;
  }
  control.fast_control_enabled = ctl.fast_control;
  control.validate(cfg.sim.t_end);
  return control;
}

void print_warnings(const std::vector<std::string>& warnings, const GlobalOpts& opts,
                    std::ostream& err) {
  if (opts.quiet) return;
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

int run_simulate(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
                 std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  print_warnings(cfg.sim.validate(cfg.model), opts, err);
  const PathRecord rec = simulate_coupled(cfg.model, cfg.sim);

  std::ostringstream csv;
  csv << "time,mean_abs_x,mean_sq_x,mean_jump_count\n";
  for (std::size_t j = 0; j < rec.times.size(); ++j) {
    const auto& ens = rec.ensembles[j];
    double mabs = 0.0, msq = 0.0;
    for (std::size_t p = 0; p < ens.n_particles; ++p) {
      double sq = 0.0;
      for (int i = 0; i < ens.dim; ++i) {
        const double v = ens.slow[p * static_cast<std::size_t>(ens.dim) + i];
        sq += v * v;
      }
      mabs += std::sqrt(sq);
      msq += sq;
    }
    const double n = static_cast<double>(ens.n_particles);
    csv << format_g(rec.times[j]) << ',' << format_g(mabs / n) << ',' << format_g(msq / n)
        << ',' << format_g(rec.mean_jump_count_at[j]) << '\n';
  }

  ReportTable table{"path_summary", csv.str(), config_meta(cfg).dump(), "csv"};
  if (cfg.save_paths) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + opts.out_dir);
    write_path_binary(rec, opts.out_dir + "/trajectories");
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportManifest manifest = emit_report({table}, opts.out_dir, wall);
  if (!opts.quiet) out << "wrote " << manifest.path << "\n";
  return exit_ok;
}

int run_check(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
              std::ostream&) {
  const AssumptionReport rep = check_assumptions(cfg.model, cfg.check.n_probes,
                                                 cfg.check.radius, cfg.sim.seed);
  out << "model: " << cfg.model_name << "\n";
  out << "A1 max Lipschitz ratio: " << rep.a1_max_ratio << " (c1 = " << cfg.model.constants.c1
      << ") " << (rep.a1_pass ? "pass" : "FAIL") << "\n";
  out << "A2 max growth ratio:    " << rep.a2_max << " (c3 = " << cfg.model.constants.c3
      << ") " << (rep.a2_pass ? "pass" : "FAIL") << "\n";
  out << "A3 contraction max:     " << rep.a3_contraction_max
      << " (-c4 = " << -cfg.model.constants.c4 << ") "
      << (rep.a3_contraction_pass ? "pass" : "FAIL") << "\n";
  out << "A3 growth excess:       " << rep.a3_growth_excess << " "
      << (rep.a3_growth_pass ? "pass" : "FAIL") << "\n";
  out << "pairs evaluated: " << rep.pairs_evaluated << ", skipped: " << rep.pairs_skipped
      << "\n";
  (void)opts;
  return rep.pass() ? exit_ok : exit_model;
}

int run_average(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
                std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const DriftMode mode = drift_mode_from(cfg);
  const AveragedPath path =
      averaged_ode_solve(cfg.model, cfg.sim.x0, cfg.sim.t_end, cfg.averaging.ode_dt, mode);

  std::ostringstream csv;
  csv << "time";
  for (int i = 0; i < path.dim; ++i) csv << ",x" << i;
  csv << "\n";
  for (std::size_t j = 0; j < path.times.size(); ++j) {
    csv << format_g(path.times[j]);
    const auto x = path.state_at_node(j);
    for (int i = 0; i < path.dim; ++i) csv << ',' << format_g(x[i]);
    csv << "\n";
  }
  std::vector<ReportTable> tables;
  tables.push_back({"averaged_path", csv.str(), config_meta(cfg).dump(), "csv"});

  if (cfg.experiment) {
    print_warnings(cfg.sim.validate(cfg.model), opts, err);
    const auto& exp = *cfg.experiment;
    const auto rule = exp.delta_rule == "eps3"
                          ? std::function<double(double)>([](double e) { return e * e * e; })
                          : std::function<double(double)>([](double e) { return e * e; });
    const auto rows =
        averaging_error_experiment(cfg.model, cfg.sim, exp.eps_list, rule, exp.n_rep, mode);
    std::ostringstream ecsv;
    ecsv << "epsilon,delta,Delta,error,ci_lo,ci_hi,n_rep\n";
    for (const auto& r : rows)
      ecsv << format_g(r.epsilon) << ',' << format_g(r.delta) << ',' << format_g(r.block_delta)
           << ',' << format_g(r.error) << ',' << format_g(r.ci_lo) << ',' << format_g(r.ci_hi)
           << ',' << r.n_rep << '\n';
    nlohmann::json meta = config_meta(cfg);
    meta["n_rep"] = exp.n_rep;
    meta["delta_rule"] = exp.delta_rule;
    nlohmann::json aux = nlohmann::json::array();
    for (const auto& r : rows) aux.push_back(r.aux_block_err);
    meta["aux_block_err"] = aux;
    tables.push_back({"averaging_error", ecsv.str(), meta.dump(), "csv"});
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportManifest manifest = emit_report(tables, opts.out_dir, wall);
  if (!opts.quiet) out << "wrote " << manifest.path << "\n";
  return exit_ok;
}

int run_skeleton(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
                 std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const DriftMode mode = drift_mode_from(cfg);
  const AveragedPath averaged =
      averaged_ode_solve(cfg.model, cfg.sim.x0, cfg.sim.t_end, cfg.averaging.ode_dt, mode);
  const ControlPair control = control_from(cfg, cfg.model.dim_noise);
  print_warnings(budget_warnings(control, cfg.model.levy, cfg.sim.t_end), opts, err);
  const SkeletonPath sk =
      skeleton_solve(cfg.model, averaged, control, cfg.sim.t_end / 256.0, mode);

  std::ostringstream csv;
  csv << "time";
  for (int i = 0; i < sk.dim; ++i) csv << ",x" << i;
  csv << "\n";
  for (std::size_t j = 0; j < sk.times.size(); ++j) {
    csv << format_g(sk.times[j]);
    const auto x = sk.state_at(j);
    for (int i = 0; i < sk.dim; ++i) csv << ',' << format_g(x[i]);
    csv << "\n";
  }
  nlohmann::json meta = config_meta(cfg);
  meta["residual_norm"] = sk.residual_norm;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportManifest manifest =
      emit_report({{"skeleton_path", csv.str(), meta.dump(), "csv"}}, opts.out_dir, wall);
  if (!opts.quiet) out << "wrote " << manifest.path << "\n";
  return exit_ok;
}

int run_rate(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
             std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const DriftMode mode = drift_mode_from(cfg);
  const AveragedPath averaged =
      averaged_ode_solve(cfg.model, cfg.sim.x0, cfg.sim.t_end, cfg.averaging.ode_dt, mode);
  const ControlSection& ctl = *cfg.control;
  OptimizerConfig opt;
  opt.seed = ctl.opt_seed;
  opt.n_starts = ctl.n_starts;
  const RateResult result = rate_endpoint(cfg.model, averaged, ctl.target, ctl.tol_hit,
                                          ctl.m1, ctl.m2, opt);
  print_warnings(result.warnings, opts, err);

  nlohmann::json meta = config_meta(cfg);
  meta["m1"] = ctl.m1;
  meta["m2"] = ctl.m2;
  meta["target"] = ctl.target;
  meta["tol_hit"] = ctl.tol_hit;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportManifest manifest = emit_report(
      {{"rate_result", result.to_json() + "\n", meta.dump(), "json"}}, opts.out_dir, wall);
  if (!opts.quiet) {
    out << "rate value: " << result.value << " (endpoint gap " << result.endpoint_gap
        << ")\n";
    out << "wrote " << manifest.path << "\n";
  }
  return exit_ok;
}

int run_ldp(const RunConfig& cfg, const GlobalOpts& opts, std::ostream& out,
            std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const LdpSection& ldp = *cfg.ldp;
  TailEvent event;
  event.kind = ldp.event_kind == "ball" ? TailEvent::Kind::endpoint_in_ball
                                        : TailEvent::Kind::endpoint_geq;
  event.level_or_center = ldp.level;
  event.radius = ldp.radius;

  LdpOptions lopts;
  if (cfg.control) {
    lopts.rate_m1 = cfg.control->m1;
    lopts.rate_m2 = cfg.control->m2;
    lopts.rate_tol_hit = cfg.control->tol_hit;
  }
  LdpTable table = ldp_tail_estimate(cfg.model, cfg.sim, event, ldp.eps_list, ldp.n_samples,
                                     lopts);
  for (const auto& row : table.rows) print_warnings(row.warnings, opts, err);

  if (ldp.importance) {
    const AveragedPath averaged = averaged_ode_solve(cfg.model, cfg.sim.x0, cfg.sim.t_end,
                                                     cfg.sim.t_end / 1000.0,
                                                     drift_mode_from(cfg));
    OptimizerConfig opt;
    if (cfg.control) {
      opt.seed = cfg.control->opt_seed;
      opt.n_starts = cfg.control->n_starts;
    }
    const std::size_t m1 = cfg.control ? cfg.control->m1 : 4;
    const std::size_t m2 = cfg.control ? cfg.control->m2 : 4;
    const double tol = cfg.control ? cfg.control->tol_hit : 1e-3;
    const RateResult rate =
        rate_endpoint(cfg.model, averaged, event.level_or_center, tol, m1, m2, opt);
    for (std::size_t ei = 0; ei < ldp.eps_list.size(); ++ei) {
      SimConfig tmpl = cfg.sim;
      tmpl.seed = derive_seed(cfg.sim.seed, 500 + ei);
      LdpRow row = is_tail_estimate(cfg.model, tmpl, event, ldp.eps_list[ei], rate.argmin,
                                    ldp.n_samples, rate.value);
      print_warnings(row.warnings, opts, err);
      table.rows.push_back(std::move(row));
    }
  }

  nlohmann::json meta = config_meta(cfg);
  meta["event"] = ldp.event_kind;
  meta["level"] = ldp.level;
  meta["n_samples"] = ldp.n_samples;
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& row : table.rows) seeds.push_back(row.seed);
  meta["row_seeds"] = seeds;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportManifest manifest =
      emit_report({{"ldp", table.to_csv(), meta.dump(), "csv"}}, opts.out_dir, wall);
  if (!opts.quiet) out << "wrote " << manifest.path << "\n";
  return exit_ok;
}

}  // namespace

int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-time-scale McKean-Vlasov simulation and large-deviations toolkit"};
  app.set_version_flag("--version", MVLDP_VERSION);

  GlobalOpts opts;
  app.add_option("--out", opts.out_dir, "Output directory for reports")
      ->capture_default_str();
  app.add_option("--threads", opts.threads,
                 "Worker thread cap (MVLDP_THREADS as fallback; 0 = all cores)");
  app.add_flag("--quiet", opts.quiet, "Suppress warnings and progress lines");

  const char* subcommands[] = {"simulate", "average", "skeleton", "rate", "ldp", "check"};
  const char* descriptions[] = {
      "Simulate the coupled slow-fast particle system and write path summaries",
      "Solve the averaged ODE; with [experiment], run the averaging-error study",
      "Integrate the controlled skeleton equation for a given control pair",
      "Evaluate the rate function at an endpoint target by control optimization",
      "Estimate rare-event probabilities and compare -eps log P against the rate",
      "Probe the model coefficients against the assumption constants"};
  std::map<std::string, CLI::App*> subs;
  for (std::size_t i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(subcommands[i], descriptions[i]);
    sub->fallthrough();  // global flags may come after the subcommand
    sub->add_option("--config", opts.config_path, "Run configuration file")->required();
    sub->add_option("--seed", opts.seed, "Seed override")->each([&](const std::string&) {
      opts.seed_given = true;
    });
    subs[subcommands[i]] = sub;
  }
  app.require_subcommand(0, 1);

  std::vector<const char*> argv;
  argv.push_back("mvldp");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help / --version
      std::ostringstream ss;
      const int code = app.exit(e, ss, ss);
      out << ss.str();
      return code;
    }
    err << "error: " << e.what() << "\n";
    return exit_config;
  }

  std::string subcommand;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) subcommand = name;
  if (subcommand.empty()) {
    out << app.help();
    return exit_ok;
  }

  if (opts.threads <= 0) {
    if (const char* env = std::getenv("MVLDP_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) opts.threads = v;
    }
  }
  par::set_max_threads(opts.threads);

  try {
    RunConfig cfg = parse_config(slurp(opts.config_path), subcommand);
    if (opts.seed_given) cfg.sim.seed = opts.seed;
    if (subcommand == "simulate") return run_simulate(cfg, opts, out, err);
    if (subcommand == "check") return run_check(cfg, opts, out, err);
    if (subcommand == "average") return run_average(cfg, opts, out, err);
    if (subcommand == "skeleton") return run_skeleton(cfg, opts, out, err);
    if (subcommand == "rate") return run_rate(cfg, opts, out, err);
    if (subcommand == "ldp") return run_ldp(cfg, opts, out, err);
    return exit_failure;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    for (const auto& d : e.details()) err << "  - " << d << "\n";
    return exit_config;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return exit_model;
  } catch (const NumericsError& e) {
    err << "numerics error: " << e.what() << "\n";
    return exit_numerics;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace mvldp::cli
