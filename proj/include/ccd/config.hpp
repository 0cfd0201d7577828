#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccd/cartpole.hpp"
#include "ccd/optimize.hpp"
#include "ccd/pipeline.hpp"
#include "ccd/quadrotor.hpp"

namespace ccd {

using nlohmann::json;

// Shortest round-trip decimal representation, for reproducible CSV output.
inline std::string fmt_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

struct GradCheckSettings {
  double threshold = 1e-6;
  double fd_step = 1e-5;
  int random_points = 0;       // extra randomly perturbed designs to check
  double random_scale = 0.05;  // relative perturbation of the baseline design
};

struct OptimizerConfig {
  OptOptions options;
  std::vector<LinearConstraint> linear;  // a . d >= b
  std::optional<double> hover_eps;       // present -> hover power constraint
  std::optional<double> hover_p_min;     // cached; computed when absent
};

struct RunConfig {
  std::string plant_type;
  std::shared_ptr<PlantModel> plant;
  const PlanarQuadrotor* quadrotor = nullptr;  // non-null for plant_type == "quadrotor"
  VectorXd design;
  AnalysisSettings settings;
  GradCheckSettings grad_check;
  OptimizerConfig optimizer;
  std::vector<double> pareto_eps;
  std::string output_dir = "out";
  json resolved;  // fully resolved config echo
};

namespace detail {

inline VectorXd to_vector(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be numeric");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline std::vector<int> to_indices(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  std::vector<int> v;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw ConfigError(std::string(what) + " must hold integers");
    v.push_back(e.get<int>());
  }
  return v;
}

// Either a full nested-array matrix or {"scaled_identity": s}.
inline MatrixXd to_matrix(const json& j, int n, const char* what) {
  if (j.is_object() && j.contains("scaled_identity"))
    return j["scaled_identity"].get<double>() * MatrixXd::Identity(n, n);
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be a matrix or scaled_identity");
  MatrixXd M(j.size(), j.empty() ? 0 : j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != M.cols())
      throw ConfigError(std::string(what) + " rows must have equal length");
    for (size_t c = 0; c < j[r].size(); ++c) M(r, c) = j[r][c].get<double>();
  }
  if (M.rows() != n || M.cols() != n)
    throw ConfigError(std::string(what) + " has wrong dimensions");
  return M;
}

inline json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace detail

// Parses and validates the run configuration, materializing the plant and
// all defaults. Every resolved value is echoed into cfg.resolved.
inline RunConfig load_config(const json& j) {
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  if (!j.contains("plant") || !j["plant"].is_object() || !j["plant"].contains("type"))
    throw ConfigError("config requires plant.type");
  const json& pj = j["plant"];
  cfg.plant_type = pj["type"].get<std::string>();

  auto num = [](const json& obj, const char* key, double dflt) {
    return obj.contains(key) ? obj[key].get<double>() : dflt;
  };

  if (cfg.plant_type == "cartpole") {
    auto p = std::make_shared<CartPole>();
    p->g = num(pj, "g", 10.0);
    p->delta = num(pj, "delta", 0.0);
    cfg.plant = p;
  } else if (cfg.plant_type == "quadrotor") {
    auto p = std::make_shared<PlanarQuadrotor>();
    p->m = num(pj, "m", 1.4);
    p->I = num(pj, "I", 0.0211);
    p->ell = num(pj, "ell", 0.159);
    p->beta = num(pj, "beta", 0.1365);
    p->g = num(pj, "g", 9.81);
    p->k_T = num(pj, "k_T", 1.4e-5);
    p->k_P = num(pj, "k_P", 2.0e-7);
    cfg.quadrotor = p.get();
    cfg.plant = p;
  } else {
    throw ConfigError("unknown plant type: " + cfg.plant_type);
  }
  PlantModel& plant = *cfg.plant;

  if (j.contains("partition")) {
    const json& pt = j["partition"];
    EquilibriumPartition part;
    auto get = [&](const char* key) {
      return pt.contains(key) ? detail::to_indices(pt[key], key) : std::vector<int>{};
    };
    part.known_state_idx = get("known_state_idx");
    part.unknown_state_idx = get("unknown_state_idx");
    part.known_control_idx = get("known_control_idx");
    part.unknown_control_idx = get("unknown_control_idx");
    part.residual_row_idx = get("residual_row_idx");
    part.validate(plant.n_x(), plant.n_u());
    if (cfg.plant_type == "cartpole")
      static_cast<CartPole&>(plant).set_partition(part);
    else
      static_cast<PlanarQuadrotor&>(plant).set_partition(part);
  }
  plant.partition().validate(plant.n_x(), plant.n_u());

  if (!j.contains("design")) throw ConfigError("config requires design");
  cfg.design = detail::to_vector(j["design"], "design");
  if (cfg.design.size() != plant.n_d()) throw ConfigError("design has wrong dimension");

  const json targets = j.contains("targets") ? j["targets"] : json::object();
  const EquilibriumPartition& part = plant.partition();
  cfg.settings.x_hat = targets.contains("x_known")
                           ? detail::to_vector(targets["x_known"], "targets.x_known")
                           : VectorXd::Zero(part.known_state_idx.size());
  cfg.settings.u_hat = targets.contains("u_known")
                           ? detail::to_vector(targets["u_known"], "targets.u_known")
                           : VectorXd::Zero(part.known_control_idx.size());
  if (cfg.settings.x_hat.size() != static_cast<Eigen::Index>(part.known_state_idx.size()))
    throw ConfigError("targets.x_known has wrong dimension");
  if (cfg.settings.u_hat.size() != static_cast<Eigen::Index>(part.known_control_idx.size()))
    throw ConfigError("targets.u_known has wrong dimension");
  if (targets.contains("theta0")) {
    cfg.settings.theta0 = detail::to_vector(targets["theta0"], "targets.theta0");
    if (cfg.settings.theta0.size() != part.n_theta())
      throw ConfigError("targets.theta0 has wrong dimension");
  }

  if (!j.contains("weights")) throw ConfigError("config requires weights.Q and weights.S");
  cfg.settings.weights.Q = detail::to_matrix(j["weights"]["Q"], plant.n_x(), "weights.Q");
  cfg.settings.weights.S = detail::to_matrix(j["weights"]["S"], plant.n_u(), "weights.S");
  cfg.settings.weights.validate();

  const json sim = j.contains("simulation") ? j["simulation"] : json::object();
  cfg.settings.dt = num(sim, "dt", 0.01);
  cfg.settings.n_t = sim.contains("n_t") ? sim["n_t"].get<int>() : 1000;
  if (cfg.settings.dt <= 0.0 || cfg.settings.n_t < 1)
    throw ConfigError("simulation requires dt > 0 and n_t >= 1");
  cfg.settings.dx0 = sim.contains("dx0") ? detail::to_vector(sim["dx0"], "simulation.dx0")
                                         : VectorXd::Zero(plant.n_x());
  if (cfg.settings.dx0.size() != plant.n_x()) throw ConfigError("simulation.dx0 has wrong dimension");

  const json eqj = j.contains("equilibrium") ? j["equilibrium"] : json::object();
  cfg.settings.eq_tol = num(eqj, "tol", 1e-12);
  cfg.settings.eq_max_iter = eqj.contains("max_iter") ? eqj["max_iter"].get<int>() : 50;
  const json arej = j.contains("are") ? j["are"] : json::object();
  cfg.settings.are_tol = num(arej, "tol", 1e-12);
  cfg.settings.are_max_iter = arej.contains("max_iter") ? arej["max_iter"].get<int>() : 50;

  const json gc = j.contains("grad_check") ? j["grad_check"] : json::object();
  cfg.grad_check.threshold = num(gc, "threshold", 1e-6);
  cfg.grad_check.fd_step = num(gc, "fd_step", 1e-5);
  cfg.grad_check.random_points = gc.contains("random_points") ? gc["random_points"].get<int>() : 0;
  cfg.grad_check.random_scale = num(gc, "random_scale", 0.05);

  const json oj = j.contains("optimizer") ? j["optimizer"] : json::object();
  cfg.optimizer.options.lower = oj.contains("lower")
                                    ? detail::to_vector(oj["lower"], "optimizer.lower")
                                    : VectorXd::Constant(plant.n_d(), -1e30);
  cfg.optimizer.options.upper = oj.contains("upper")
                                    ? detail::to_vector(oj["upper"], "optimizer.upper")
                                    : VectorXd::Constant(plant.n_d(), 1e30);
  if (cfg.optimizer.options.lower.size() != plant.n_d() ||
      cfg.optimizer.options.upper.size() != plant.n_d())
    throw ConfigError("optimizer bounds have wrong dimension");
  if ((cfg.optimizer.options.lower.array() > cfg.optimizer.options.upper.array()).any())
    throw ConfigError("optimizer bounds must satisfy lower <= upper");
  if (((cfg.design.array() < cfg.optimizer.options.lower.array()) ||
       (cfg.design.array() > cfg.optimizer.options.upper.array()))
          .any())
    throw ConfigError("initial design violates the bounds");
  cfg.optimizer.options.tol_kkt = num(oj, "tol_kkt", 1e-6);
  cfg.optimizer.options.max_outer = oj.contains("max_outer") ? oj["max_outer"].get<int>() : 30;
  cfg.optimizer.options.max_inner = oj.contains("max_inner") ? oj["max_inner"].get<int>() : 200;
  cfg.optimizer.options.mu0 = num(oj, "penalty0", 10.0);
  if (oj.contains("linear_inequalities")) {
    for (const auto& li : oj["linear_inequalities"]) {
      VectorXd a = detail::to_vector(li["a"], "linear inequality a");
      if (a.size() != plant.n_d()) throw ConfigError("linear inequality has wrong dimension");
      cfg.optimizer.linear.emplace_back(a, li["b"].get<double>());
    }
  }
  if (oj.contains("hover_power")) {
    if (cfg.plant_type != "quadrotor")
      throw ConfigError("hover_power constraint requires the quadrotor plant");
    cfg.optimizer.hover_eps = oj["hover_power"]["eps"].get<double>();
    if (oj["hover_power"].contains("p_min") && !oj["hover_power"]["p_min"].is_null())
      cfg.optimizer.hover_p_min = oj["hover_power"]["p_min"].get<double>();
  }

  if (j.contains("pareto")) {
    if (!j["pareto"].contains("eps_list") || !j["pareto"]["eps_list"].is_array())
      throw ConfigError("pareto requires eps_list");
    for (const auto& e : j["pareto"]["eps_list"]) cfg.pareto_eps.push_back(e.get<double>());
    if (!std::is_sorted(cfg.pareto_eps.begin(), cfg.pareto_eps.end()))
      throw ConfigError("pareto eps_list must be sorted ascending");
  }

  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();

  // resolved-config echo
  json r;
  r["plant"]["type"] = cfg.plant_type;
  if (cfg.plant_type == "cartpole") {
    const auto& p = static_cast<const CartPole&>(plant);
    r["plant"]["g"] = p.g;
    r["plant"]["delta"] = p.delta;
  } else {
    const auto& p = *cfg.quadrotor;
    r["plant"]["m"] = p.m;
    r["plant"]["I"] = p.I;
    r["plant"]["ell"] = p.ell;
    r["plant"]["beta"] = p.beta;
    r["plant"]["g"] = p.g;
    r["plant"]["k_T"] = p.k_T;
    r["plant"]["k_P"] = p.k_P;
  }
  r["design"] = detail::vector_to_json(cfg.design);
  r["partition"] = {{"known_state_idx", part.known_state_idx},
                    {"unknown_state_idx", part.unknown_state_idx},
                    {"known_control_idx", part.known_control_idx},
                    {"unknown_control_idx", part.unknown_control_idx},
                    {"residual_row_idx", part.residual_row_idx}};
  r["targets"] = {{"x_known", detail::vector_to_json(cfg.settings.x_hat)},
                  {"u_known", detail::vector_to_json(cfg.settings.u_hat)},
                  {"theta0", detail::vector_to_json(cfg.settings.theta0.size() > 0
                                                        ? cfg.settings.theta0
                                                        : plant.theta0())}};
  r["weights"] = {{"Q", detail::matrix_to_json(cfg.settings.weights.Q)},
                  {"S", detail::matrix_to_json(cfg.settings.weights.S)}};
  r["simulation"] = {{"dt", cfg.settings.dt},
                     {"n_t", cfg.settings.n_t},
                     {"dx0", detail::vector_to_json(cfg.settings.dx0)}};
  r["equilibrium"] = {{"tol", cfg.settings.eq_tol}, {"max_iter", cfg.settings.eq_max_iter}};
  r["are"] = {{"tol", cfg.settings.are_tol}, {"max_iter", cfg.settings.are_max_iter}};
  r["grad_check"] = {{"threshold", cfg.grad_check.threshold},
                     {"fd_step", cfg.grad_check.fd_step},
                     {"random_points", cfg.grad_check.random_points},
                     {"random_scale", cfg.grad_check.random_scale}};
  r["optimizer"] = {{"lower", detail::vector_to_json(cfg.optimizer.options.lower)},
                    {"upper", detail::vector_to_json(cfg.optimizer.options.upper)},
                    {"tol_kkt", cfg.optimizer.options.tol_kkt},
                    {"max_outer", cfg.optimizer.options.max_outer},
                    {"max_inner", cfg.optimizer.options.max_inner},
                    {"penalty0", cfg.optimizer.options.mu0}};
  if (oj.contains("linear_inequalities")) r["optimizer"]["linear_inequalities"] = oj["linear_inequalities"];
  if (cfg.optimizer.hover_eps) {
    r["optimizer"]["hover_power"]["eps"] = *cfg.optimizer.hover_eps;
    r["optimizer"]["hover_power"]["p_min"] =
        cfg.optimizer.hover_p_min ? json(*cfg.optimizer.hover_p_min) : json(nullptr);
  }
  if (!cfg.pareto_eps.empty()) r["pareto"]["eps_list"] = cfg.pareto_eps;
  r["output_dir"] = cfg.output_dir;
  cfg.resolved = r;
  return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return load_config(j);
}

}  // namespace ccd
