// Command-line front end: deterministic cell/strip/model pipeline plus the
// Monte Carlo simulators and the statistical comparison harness.
//
//   ifhom cell     --config run.cfg        cell densities, correctors, D+-
//   ifhom model    --config run.cfg        full effective model (model.json)
//   ifhom simulate --which eps|limit       path ensembles + basic check rows
//   ifhom verify   [--negative-control x]  full comparison report + exit code

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ifhom/config.hpp"
#include "ifhom/eps_sim.hpp"
#include "ifhom/limit_sim.hpp"
#include "ifhom/model.hpp"
#include "ifhom/rng.hpp"
#include "ifhom/torus_cell.hpp"
#include "ifhom/verify.hpp"

namespace {

using namespace ifhom;

std::string hash_hex(const RunConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)config_hash(cfg));
  return buf;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

void write_json_file(const std::filesystem::path& dir, const std::string& name,
                     const std::string& body) {
  auto os = open_out(dir, name);
  os << body << '\n';
}

/// Inject the config hash into a rendered JSON document.
std::string stamp_json(const std::string& body, const std::string& hash) {
  nlohmann::json doc = nlohmann::json::parse(body);
  doc["config_hash"] = hash;
  return doc.dump(2);
}

void write_cell_csv(std::ostream& os, const std::string& hash, const CellSolution& cell) {
  const TorusGrid grid(cell.mu.spec);
  const int d = grid.dim();
  os << "# config_hash=" << hash << "\n";
  for (int a = 0; a < d; ++a) os << "x" << a + 1 << ",";
  os << "mu";
  for (int a = 0; a < d; ++a) os << ",g" << a + 1;
  os << "\n";
  char buf[32];
  double x[kMaxDim];
  for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
    grid.coords(idx, x);
    for (int a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, "%.10g,", x[a]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", cell.mu.values[idx]);
    os << buf;
    for (int a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, ",%.17g", cell.corrector.g[a][idx]);
      os << buf;
    }
    os << "\n";
  }
}

nlohmann::json tensor_json(const Eigen::MatrixXd& D) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < D.cols(); ++j) row.push_back(D(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_cell(const RunConfig& cfg, const std::filesystem::path& out) {
  const InterfaceDrift field = make_field(cfg.field);
  const GridSpec spec = make_grid(cfg, field);
  const std::string hash = hash_hex(cfg);

  const CellSolution plus = solve_cell(field.tail_plus(), spec);
  const CellSolution minus = solve_cell(field.tail_minus(), spec);
  {
    auto os = open_out(out, "cells_plus.csv");
    write_cell_csv(os, hash, plus);
  }
  {
    auto os = open_out(out, "cells_minus.csv");
    write_cell_csv(os, hash, minus);
  }

  nlohmann::json doc;
  doc["config_hash"] = hash;
  doc["field"] = field.name();
  doc["grid_resolution"] = spec.resolution[0];
  auto side_json = [](const CellSolution& cell) {
    nlohmann::json side;
    side["D"] = tensor_json(cell.D);
    side["density_residual_l2"] = cell.mu.residual_l2;
    side["density_min"] = cell.mu.min_value;
    side["centering_max"] = cell.centering.cwiseAbs().maxCoeff();
    return side;
  };
  doc["plus"] = side_json(plus);
  doc["minus"] = side_json(minus);
  write_json_file(out, "cells_summary.json", doc.dump(2));

  std::printf("cell: field=%s grid=%d\n", field.name().c_str(), spec.resolution[0]);
  std::printf("  D+ diag:");
  for (int a = 0; a < field.dim(); ++a) std::printf(" %.8f", plus.D(a, a));
  std::printf("\n  D- diag:");
  for (int a = 0; a < field.dim(); ++a) std::printf(" %.8f", minus.D(a, a));
  std::printf("\n  wrote cells_plus.csv cells_minus.csv cells_summary.json\n");
  return 0;
}

int cmd_model(const RunConfig& cfg, const std::filesystem::path& out) {
  const InterfaceDrift field = make_field(cfg.field);
  const GridSpec spec = make_grid(cfg, field);
  const std::string hash = hash_hex(cfg);

  const ModelBuild build = build_model(field, spec, parse_blend(cfg.blend), field.name());
  write_json_file(out, "model.json", stamp_json(render_model_json(build), hash));
  {
    auto os = open_out(out, "cells_masses.csv");
    os << "# config_hash=" << hash << "\n";
    write_cell_masses_csv(build.measure, os);
  }

  const EffectiveModel& m = build.model;
  std::printf("model: field=%s grid=%d strip=%d\n", field.name().c_str(), spec.resolution[0],
              spec.strip_halfwidth);
  std::printf("  q+ = %.8f  q- = %.8f\n", m.q_plus, m.q_minus);
  std::printf("  p+ = %.8f  p- = %.8f  skew = %.8f\n", m.p_plus, m.p_minus, m.skew);
  std::printf("  alpha =");
  for (int j = 0; j < m.dim - 1; ++j) std::printf(" %.8f", m.alpha[j]);
  std::printf("\n  K =");
  for (int j = 0; j < m.dim; ++j) std::printf(" %.8f", m.K[j]);
  std::printf("\n  wrote model.json cells_masses.csv\n");
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out,
                 const std::string& which, double eps_flag, std::uint64_t csv_paths) {
  const InterfaceDrift field = make_field(cfg.field);
  const GridSpec spec = make_grid(cfg, field);
  const std::string hash = hash_hex(cfg);
  const ModelBuild build = build_model(field, spec, parse_blend(cfg.blend), field.name());

  ComparisonReport report;
  std::array<double, kMaxDim> x0{};

  if (which == "eps") {
    const double eps = eps_flag > 0 ? eps_flag : cfg.eps_list.front();
    SimParams sp;
    sp.T = cfg.sim_T;
    sp.dt = cfg.sim_dt;
    sp.n = cfg.sim_n;
    sp.seed = cfg.seed;
    sp.threads = cfg.threads;
    PathEnsemble ens = simulate_eps(field, eps, x0.data(), sp);
    if (csv_paths < ens.n) ens.n = csv_paths;  // thin the CSV, not the estimates
    {
      auto os = open_out(out, "paths_eps.csv");
      os << "# config_hash=" << hash << "\n";
      write_paths_csv(ens, os);
    }

    ExitParams ep;
    ep.delta = cfg.delta;
    ep.n = cfg.sim_n;
    ep.seed = cfg.seed;
    ep.threads = cfg.threads;
    const double min_d11 = std::min(build.model.D_plus(0, 0), build.model.D_minus(0, 0));
    ep.horizon = 50.0 * cfg.delta * cfg.delta / min_d11;
    const ExitSideEstimate exit = exit_side_probability(field, eps, x0.data(), ep);
    CheckRow row;
    row.name = "exit_side[+]";
    row.predicted = build.model.p_plus;
    row.estimated = exit.p_plus.value;
    row.se = exit.p_plus.se;
    row.tolerance = "|est - pred| <= 3 se";
    row.pass = std::abs(row.estimated - row.predicted) <= 3 * row.se;
    char pbuf[128];
    std::snprintf(pbuf, sizeof pbuf, "eps=%g delta=%g n=%llu cap=%.4g", eps, cfg.delta,
                  (unsigned long long)cfg.sim_n, exit.cap_fraction);
    row.params = pbuf;
    row.seed = cfg.seed;
    report.add(std::move(row));
  } else {  // limit
    const SkewBackend backend = parse_backend(cfg.backend);
    const double dt = cfg.sim_dt > 0 ? cfg.sim_dt : 2.5e-4;
    LimitEnsemble ens = simulate_limit(build.model, x0.data(), cfg.sim_T, dt, cfg.sim_n,
                                       cfg.seed, backend, cfg.threads);
    {
      LimitEnsemble head = ens;
      if (csv_paths < head.n) head.n = csv_paths;
      auto os = open_out(out, "paths_limit.csv");
      os << "# config_hash=" << hash << "\n";
      write_limit_csv(head, os);
    }

    // Internal consistency: the glued test function's martingale residual.
    Eigen::VectorXd c = Eigen::VectorXd::Zero(build.model.dim);
    for (int j = 1; j < build.model.dim; ++j) c[j] = 0.7 / j;
    const GluedTestFunction f = make_glued_function(build.model, 1.0, c, 0.5);
    const Estimate mart = martingale_residual(ens, f, cfg.lambda);
    CheckRow row;
    row.name = "limit_martingale[f]";
    row.predicted = 0;
    row.estimated = mart.value;
    row.se = mart.se;
    row.tolerance = "|est| <= 3 se";
    row.pass = std::abs(mart.value) <= 3 * mart.se;
    char pbuf[96];
    std::snprintf(pbuf, sizeof pbuf, "lambda=%g n=%llu backend=%s", cfg.lambda,
                  (unsigned long long)cfg.sim_n, backend_name(backend));
    row.params = pbuf;
    row.seed = cfg.seed;
    report.add(std::move(row));

    // When the model is exactly Brownian (D = I, K = 0, p = 1/2) the time-T
    // covariance has the closed form T*I; gate it at 3 SE per entry.
    const EffectiveModel& m = build.model;
    const bool brownian = (m.D_plus - Eigen::MatrixXd::Identity(m.dim, m.dim)).norm() < 1e-12 &&
                          (m.D_minus - Eigen::MatrixXd::Identity(m.dim, m.dim)).norm() < 1e-12 &&
                          m.K.cwiseAbs().maxCoeff() < 1e-12 &&
                          std::abs(m.p_plus - 0.5) < 1e-12;
    if (brownian) {
      for (int a = 0; a < m.dim; ++a)
        for (int b = a; b < m.dim; ++b) {
          std::vector<double> prod(ens.n);
          for (std::uint64_t p = 0; p < ens.n; ++p) {
            const double* xt = ens.state(p, ens.stored - 1);
            prod[p] = xt[a] * xt[b];
          }
          const Estimate cov = mean_estimate(prod, "covariance_entry");
          CheckRow crow;
          char nbuf[48];
          std::snprintf(nbuf, sizeof nbuf, "limit_covariance[x%d,x%d]", a + 1, b + 1);
          crow.name = nbuf;
          crow.predicted = a == b ? cfg.sim_T : 0.0;
          crow.estimated = cov.value;
          crow.se = cov.se;
          crow.tolerance = "|est - pred| <= 3 se";
          crow.pass = std::abs(crow.estimated - crow.predicted) <= 3 * cov.se;
          crow.params = pbuf;
          crow.seed = cfg.seed;
          report.add(std::move(crow));
        }
    }
  }

  write_json_file(out, "report.json", render_report_json(report, "simulate " + which,
                                                         config_hash(cfg)));
  {
    auto os = open_out(out, "checks.csv");
    os << "# config_hash=" << hash << "\n";
    write_checks_csv(report, os);
  }
  for (const CheckRow& row : report.rows)
    std::printf("%-28s pred=%-12.6g est=%-12.6g se=%-10.4g %s\n", row.name.c_str(),
                row.predicted, row.estimated, row.se, row.pass ? "pass" : "FAIL");
  return report.verdict ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out,
               const std::string& control) {
  const InterfaceDrift field = make_field(cfg.field);
  const GridSpec spec = make_grid(cfg, field);
  const std::string hash = hash_hex(cfg);

  PipelineParams pp;
  pp.eps_list = cfg.eps_list;
  pp.T = cfg.sim_T;
  pp.n_marginal = cfg.sim_n;
  pp.n_exit = cfg.sim_n;
  pp.n_occupation = std::max<std::uint64_t>(cfg.sim_n / 10, 200);
  pp.delta = 0;  // auto: max(0.4, 10 * largest eps)
  pp.lambda = cfg.lambda;
  pp.backend = parse_backend(cfg.backend);
  pp.blend = parse_blend(cfg.blend);
  pp.seed = cfg.seed;
  pp.threads = cfg.threads;
  if (control == "alpha2x")
    pp.control = NegativeControl::alpha2x;
  else if (control == "swap-p")
    pp.control = NegativeControl::swap_p;

  const PipelineResult result = full_pipeline(field, spec, pp);

  write_json_file(out, "model.json", stamp_json(render_model_json(result.build), hash));
  write_json_file(out, "report.json",
                  render_report_json(result.report, "verify " + field.name(),
                                     config_hash(cfg)));
  {
    auto os = open_out(out, "checks.csv");
    os << "# config_hash=" << hash << "\n";
    write_checks_csv(result.report, os);
  }

  for (const CheckRow& row : result.report.rows)
    std::printf("%-34s pred=%-12.6g est=%-12.6g se=%-10.4g %s\n", row.name.c_str(),
                row.predicted, row.estimated, row.se, row.pass ? "pass" : "FAIL");
  std::printf("verdict: %s (%.1f s)\n", result.report.verdict ? "pass" : "FAIL",
              result.elapsed_seconds);
  return result.report.verdict ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interface homogenization: effective model and Monte Carlo verification"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int threads_flag = -1;
  std::string out_flag;
  bool dump = false;
  app.add_option("--config", config_path, "run configuration file (key = value lines)");
  auto* seed_opt = app.add_option("--seed", seed_flag, "override run.seed");
  auto* threads_opt = app.add_option("--threads", threads_flag, "override run.threads");
  auto* out_opt = app.add_option("--out", out_flag, "override run.out (output directory)");
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");

  CLI::App* cell = app.add_subcommand("cell", "solve the periodic cell problems");
  CLI::App* model = app.add_subcommand("model", "compute the full effective model");
  CLI::App* simulate = app.add_subcommand("simulate", "run one simulator and basic checks");
  CLI::App* verify = app.add_subcommand("verify", "full statistical comparison harness");
  for (CLI::App* sub : {cell, model, simulate, verify}) sub->fallthrough();

  std::string which;
  double eps_flag = 0;
  std::uint64_t csv_paths = 100;
  simulate->add_option("--which", which, "simulator to run")
      ->required()
      ->check(CLI::IsMember({"eps", "limit"}));
  simulate->add_option("--eps", eps_flag, "scale parameter (default: first of sim.eps)");
  simulate->add_option("--csv-paths", csv_paths, "paths written to the CSV export");

  std::string control = "none";
  verify->add_option("--negative-control", control, "perturb the predicted model")
      ->check(CLI::IsMember({"alpha2x", "swap-p"}));

  CLI11_PARSE(app, argc, argv);

  try {
    ifhom::RunConfig cfg;
    if (!config_path.empty()) cfg = ifhom::load_config_file(config_path);
    if (seed_opt->count()) cfg.seed = seed_flag;
    if (threads_opt->count()) cfg.threads = threads_flag;
    if (out_opt->count()) cfg.out_dir = out_flag;

    if (dump) {
      std::fputs(ifhom::dump_config(cfg).c_str(), stdout);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::fputs("error: a subcommand is required (cell, model, simulate, verify)\n", stderr);
      return 2;
    }

    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);

    if (app.got_subcommand(cell)) return cmd_cell(cfg, out);
    if (app.got_subcommand(model)) return cmd_model(cfg, out);
    if (app.got_subcommand(simulate))
      return cmd_simulate(cfg, out, which, eps_flag, csv_paths);
    return cmd_verify(cfg, out, control);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
