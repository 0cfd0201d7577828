// ccd: analyze | grad-check | optimize | pareto over JSON run configs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "ccd/config.hpp"

namespace fs = std::filesystem;
using ccd::json;
using ccd::VectorXd;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;  // overrides config output_dir when set
  int threads = 1;
  unsigned seed = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Run metadata lives here, never inside data files, so data stays byte-identical.
void write_manifest(const fs::path& dir, const std::string& command, const CliArgs& args) {
  json m;
  m["command"] = command;
  m["config_path"] = args.config_path;
  m["threads"] = args.threads;
  m["seed"] = args.seed;
  m["date"] = __DATE__;
  write_json(dir / "run_manifest.json", m);
}

std::string trajectory_csv(const ccd::Trajectory& traj, const Eigen::MatrixXd& W) {
  const int n_x = static_cast<int>(traj.dx[0].size());
  const int n_u = static_cast<int>(W.rows());
  std::string s = "step,t";
  for (int i = 0; i < n_x; ++i) s += ",dx_" + std::to_string(i);
  for (int i = 0; i < n_u; ++i) s += ",du_" + std::to_string(i);
  s += "\n";
  for (int k = 0; k <= traj.n_t; ++k) {
    s += std::to_string(k) + "," + ccd::fmt_double(k * traj.dt);
    VectorXd du = W * traj.dx[k];
    for (int i = 0; i < n_x; ++i) s += "," + ccd::fmt_double(traj.dx[k][i]);
    for (int i = 0; i < n_u; ++i) s += "," + ccd::fmt_double(du[i]);
    s += "\n";
  }
  return s;
}

json analysis_summary(const ccd::PlantModel& plant, const VectorXd& d, const ccd::AnalysisResult& r,
                      const ccd::CostWeights& w) {
  json s;
  s["cost"] = r.cost;
  s["design"] = ccd::detail::vector_to_json(d);
  s["equilibrium"] = {{"x_tgt", ccd::detail::vector_to_json(r.eq.x_tgt)},
                      {"u_tgt", ccd::detail::vector_to_json(r.eq.u_tgt)},
                      {"theta", ccd::detail::vector_to_json(r.eq.theta)},
                      {"residual_norm", r.eq.residual_norm},
                      {"iterations", r.eq.iterations}};
  s["are_residual"] = ccd::are_residual(r.ric.P, r.ric.J_tgt, r.ric.G_tgt, w).norm();
  s["gain"] = ccd::detail::matrix_to_json(r.ric.W);
  Eigen::VectorXcd ev = r.ric.closed_loop().eigenvalues();
  json eigs = json::array();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    eigs.push_back({{"re", ev[i].real()}, {"im", ev[i].imag()}});
  s["closed_loop_eigenvalues"] = eigs;
  (void)plant;
  return s;
}

json error_json(const std::string& kind, const std::string& what) {
  return json{{"error", {{"kind", kind}, {"what", what}}}};
}

// Classifies a runtime failure and writes error.json; returns the exit code.
int fail_analysis(const fs::path& dir, const std::exception& e) {
  std::string kind = "analysis";
  if (dynamic_cast<const ccd::ConfigError*>(&e)) kind = "config";
  write_json(dir / "error.json", error_json(kind, e.what()));
  std::cerr << "error: " << e.what() << "\n";
  return kind == "config" ? 2 : 3;
}

int cmd_analyze(const ccd::RunConfig& cfg, const fs::path& dir, const CliArgs& args) {
  write_manifest(dir, "analyze", args);
  try {
    ccd::AnalysisResult r = ccd::run_analysis(*cfg.plant, cfg.design, cfg.settings);
    write_text(dir / "trajectory.csv", trajectory_csv(r.traj, r.ric.W));
    write_json(dir / "summary.json",
               analysis_summary(*cfg.plant, cfg.design, r, cfg.settings.weights));
    std::cout << "cost = " << ccd::fmt_double(r.cost) << "\n";
    return 0;
  } catch (const std::runtime_error& e) {
    return fail_analysis(dir, e);
  }
}

int cmd_grad_check(const ccd::RunConfig& cfg, const fs::path& dir, const CliArgs& args) {
  write_manifest(dir, "grad-check", args);
  try {
    std::vector<VectorXd> points{cfg.design};
    std::mt19937 rng(args.seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int p = 0; p < cfg.grad_check.random_points; ++p) {
      VectorXd d = cfg.design;
      for (Eigen::Index i = 0; i < d.size(); ++i)
        d[i] += cfg.grad_check.random_scale * (1.0 + std::abs(d[i])) * dist(rng);
      points.push_back(d);
    }

    json out;
    out["threshold"] = cfg.grad_check.threshold;
    out["points"] = json::array();
    double worst = 0.0;
    for (size_t p = 0; p < points.size(); ++p) {
      ccd::GradCheckResult r = ccd::grad_check(*cfg.plant, points[p], cfg.settings,
                                               cfg.grad_check.fd_step, args.threads);
      worst = std::max(worst, r.max_rel_err);
      std::printf("point %zu  cost = %.10g\n", p, r.cost);
      std::printf("%-8s %24s %24s %14s\n", "design", "adjoint", "finite-diff", "rel. error");
      for (Eigen::Index i = 0; i < r.adjoint.size(); ++i)
        std::printf("d_%-6td %24.16g %24.16g %14.6e\n", i, r.adjoint[i], r.fd[i], r.rel_err[i]);
      json pt;
      pt["design"] = ccd::detail::vector_to_json(points[p]);
      pt["cost"] = r.cost;
      pt["adjoint"] = ccd::detail::vector_to_json(r.adjoint);
      pt["fd"] = ccd::detail::vector_to_json(r.fd);
      pt["rel_err"] = ccd::detail::vector_to_json(r.rel_err);
      pt["max_rel_err"] = r.max_rel_err;
      out["points"].push_back(pt);
    }
    out["max_rel_err"] = worst;
    bool pass = worst < cfg.grad_check.threshold;
    out["pass"] = pass;
    write_json(dir / "grad_check.json", out);
    std::printf("max relative error %.6e %s threshold %.6e -> %s\n", worst,
                pass ? "<" : ">=", cfg.grad_check.threshold, pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
  } catch (const std::runtime_error& e) {
    return fail_analysis(dir, e);
  }
}

void append_history(const fs::path& path, const ccd::OptHistory& hist) {
  std::ofstream out(path);
  for (const auto& rec : hist.records) {
    json j;
    j["outer"] = rec.outer;
    j["inner"] = rec.inner;
    j["d"] = ccd::detail::vector_to_json(rec.d);
    j["f"] = rec.f;
    j["constraints"] = rec.constraints;
    j["grad_norm"] = rec.grad_norm;
    j["kkt"] = rec.kkt;
    j["step_alpha"] = rec.step_alpha;
    out << j.dump() << "\n";
  }
}

// Builds the constraint list declared in the config. Computes the hover-power
// floor by a standalone power-only minimization when it is not given.
std::vector<std::shared_ptr<ccd::Constraint>> build_constraints(ccd::RunConfig& cfg, double eps) {
  std::vector<std::shared_ptr<ccd::Constraint>> cons;
  for (const auto& lc : cfg.optimizer.linear) cons.push_back(std::make_shared<ccd::LinearConstraint>(lc));
  if (cfg.optimizer.hover_eps) {
    if (!cfg.optimizer.hover_p_min) {
      ccd::HoverPowerObjective pw(*cfg.quadrotor, cfg.settings);
      ccd::OptHistory h = ccd::minimize(pw, {}, cfg.design, cfg.optimizer.options);
      cfg.optimizer.hover_p_min = h.f_opt;
    }
    cons.push_back(std::make_shared<ccd::HoverPowerConstraint>(*cfg.quadrotor, cfg.settings, eps,
                                                               *cfg.optimizer.hover_p_min));
  }
  return cons;
}

int cmd_optimize(ccd::RunConfig& cfg, const fs::path& dir, const CliArgs& args) {
  write_manifest(dir, "optimize", args);
  try {
    ccd::AnalysisResult baseline = ccd::run_analysis(*cfg.plant, cfg.design, cfg.settings);
    write_text(dir / "trajectory_baseline.csv", trajectory_csv(baseline.traj, baseline.ric.W));

    ccd::PipelineObjective obj(*cfg.plant, cfg.settings);
    auto cons = build_constraints(cfg, cfg.optimizer.hover_eps.value_or(0.0));
    ccd::OptHistory hist;
    try {
      hist = ccd::minimize(obj, cons, cfg.design, cfg.optimizer.options);
    } catch (const ccd::OptimizationAborted& e) {
      write_json(dir / "error.json", error_json("optimization", e.what()));
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
    append_history(dir / "history.jsonl", hist);

    ccd::AnalysisResult opt = ccd::run_analysis(*cfg.plant, hist.d_opt, cfg.settings);
    write_text(dir / "trajectory_optimized.csv", trajectory_csv(opt.traj, opt.ric.W));

    json s;
    s["d_opt"] = ccd::detail::vector_to_json(hist.d_opt);
    s["f_opt"] = hist.f_opt;
    s["f_baseline"] = baseline.cost;
    s["cost_reduction"] = 1.0 - hist.f_opt / baseline.cost;
    s["converged"] = hist.converged;
    s["termination"] = hist.termination;
    s["iterations"] = hist.records.size();
    if (cfg.optimizer.hover_eps) {
      VectorXd tmp;
      ccd::HoverPowerObjective pw(*cfg.quadrotor, cfg.settings);
      double p = pw.eval(hist.d_opt, tmp);
      double bound = (1.0 + *cfg.optimizer.hover_eps) * *cfg.optimizer.hover_p_min;
      s["hover_power"] = p;
      s["hover_power_bound"] = bound;
      s["hover_power_active"] = (bound - p) < 1e-6 * std::abs(bound);
    }
    write_json(dir / "optimize_summary.json", s);
    std::cout << "f_opt = " << ccd::fmt_double(hist.f_opt) << " at d = [";
    for (Eigen::Index i = 0; i < hist.d_opt.size(); ++i)
      std::cout << (i ? ", " : "") << ccd::fmt_double(hist.d_opt[i]);
    std::cout << "]\n";
    return 0;
  } catch (const std::runtime_error& e) {
    return fail_analysis(dir, e);
  }
}

int cmd_pareto(ccd::RunConfig& cfg, const fs::path& dir, const CliArgs& args) {
  write_manifest(dir, "pareto", args);
  if (cfg.pareto_eps.empty()) {
    write_json(dir / "error.json", error_json("config", "pareto requires a non-empty eps_list"));
    std::cerr << "error: pareto requires a non-empty eps_list\n";
    return 2;
  }
  if (cfg.plant_type != "quadrotor") {
    write_json(dir / "error.json", error_json("config", "pareto requires the quadrotor plant"));
    std::cerr << "error: pareto requires the quadrotor plant\n";
    return 2;
  }
  try {
    if (!cfg.optimizer.hover_p_min) {
      ccd::HoverPowerObjective pw(*cfg.quadrotor, cfg.settings);
      ccd::OptHistory h = ccd::minimize(pw, {}, cfg.design, cfg.optimizer.options);
      cfg.optimizer.hover_p_min = h.f_opt;
    }
    auto points = ccd::pareto_sweep(*cfg.quadrotor, cfg.settings, cfg.design,
                                    cfg.optimizer.options, cfg.pareto_eps,
                                    *cfg.optimizer.hover_p_min);
    std::string csv = "eps,f_lqr,p_hover";
    for (Eigen::Index i = 0; i < cfg.design.size(); ++i) csv += ",d_" + std::to_string(i);
    csv += ",status\n";
    int ok_count = 0;
    for (const auto& pt : points) {
      csv += ccd::fmt_double(pt.eps);
      if (pt.ok) {
        ++ok_count;
        csv += "," + ccd::fmt_double(pt.f_lqr) + "," + ccd::fmt_double(pt.p_hover);
        for (Eigen::Index i = 0; i < pt.d_opt.size(); ++i) csv += "," + ccd::fmt_double(pt.d_opt[i]);
        csv += ",ok\n";
      } else {
        for (Eigen::Index i = 0; i < 2 + cfg.design.size(); ++i) csv += ",";
        csv += "failed\n";
        std::cerr << "eps = " << pt.eps << " failed: " << pt.error << "\n";
      }
    }
    write_text(dir / "pareto.csv", csv);
    std::cout << ok_count << "/" << points.size() << " Pareto points solved, p_min = "
              << ccd::fmt_double(*cfg.optimizer.hover_p_min) << "\n";
    return ok_count > 0 ? 0 : 3;
  } catch (const std::runtime_error& e) {
    return fail_analysis(dir, e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control co-design analysis, gradient verification, and optimization"};
  app.require_subcommand(1);

  CliArgs args;
  app.add_option("--config", args.config_path, "JSON run configuration")->required();
  app.add_option("--out", args.out_dir, "output directory (overrides config output_dir)");
  app.add_option("--threads", args.threads, "worker threads for FD checks");
  app.add_option("--seed", args.seed, "seed for randomized grad-check points");

  auto* analyze = app.add_subcommand("analyze", "equilibrium, LQR gain, closed-loop cost");
  auto* gradchk = app.add_subcommand("grad-check", "adjoint vs. finite-difference gradient");
  auto* optimize = app.add_subcommand("optimize", "constrained design optimization");
  auto* pareto = app.add_subcommand("pareto", "epsilon-constraint Pareto sweep");

  CLI11_PARSE(app, argc, argv);

  ccd::RunConfig cfg;
  try {
    cfg = ccd::load_config_file(args.config_path);
  } catch (const ccd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  fs::path dir = args.out_dir.empty() ? cfg.output_dir : args.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "config error: cannot create output directory " << dir << "\n";
    return 2;
  }
  write_json(dir / "resolved_config.json", cfg.resolved);

  if (analyze->parsed()) return cmd_analyze(cfg, dir, args);
  if (gradchk->parsed()) return cmd_grad_check(cfg, dir, args);
  if (optimize->parsed()) return cmd_optimize(cfg, dir, args);
  return cmd_pareto(cfg, dir, args);
}
