// Copyright 2026 The FedNova Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fednova/harness.hpp"

namespace {

using fednova::VectorXd;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

struct RoundZeroView {
  VectorXd p;
  std::vector<int> taus;
  std::vector<fednova::AccumulationVector<double>> a;
  VectorXd norms;
};

RoundZeroView round_zero(const fednova::ExperimentConfig& config, const fednova::Problem& problem) {
  RoundZeroView v;
  v.p = std::visit(
      [](const auto& pr) -> VectorXd {
        if constexpr (std::is_same_v<std::decay_t<decltype(pr)>, fednova::QuadraticProblem>)
          return pr.global.weights();
        else
          return pr.train.weights();
      },
      problem);
  v.taus = fednova::tau_for_round(config, fednova::sample_counts(problem), 0);
  const int m = static_cast<int>(v.taus.size());
  if (config.solvers.size() != 1 && static_cast<int>(config.solvers.size()) != m)
    throw fednova::ConfigError("config: solvers must list one entry per client");
  v.norms.resize(m);
  for (int i = 0; i < m; ++i) {
    v.a.push_back(fednova::accumulation_vector(config.solver_for(i).with_eta(config.eta.initial),
                                               v.taus[static_cast<std::size_t>(i)]));
    v.norms(i) = v.a.back().norm1();
  }
  return v;
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || hi < lo)
    throw fednova::ConfigError("grid must look like lo:hi:step with step > 0");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(lo + double(k) * step);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& out, const std::string& format,
            const std::optional<std::uint64_t>& seed) {
  auto config = fednova::load_config(config_path);
  if (seed) config.master_seed = *seed;
  const auto fmt_kind = fednova::metrics_format_from_string(format);
  const auto result = fednova::run_experiment(config);
  fednova::emit_metrics(result.rounds, out, fmt_kind, result.failure);
  if (result.diverged) {
    std::cerr << result.failure << '\n';
    return kExitDivergence;
  }
  return kExitOk;
}

int cmd_oracle(const std::string& config_path, std::optional<double> eta_override) {
  const auto config = fednova::load_config(config_path);
  const auto problem = fednova::build_problem(config);
  const auto* quad = std::get_if<fednova::QuadraticProblem>(&problem);
  if (quad == nullptr) throw fednova::ConfigError("oracle: needs a quadratic objective");
  if (config.tau.time_varying)
    throw fednova::ConfigError("oracle: tau schedule must be fixed across rounds");
  if (config.solvers.size() != 1)
    throw fednova::ConfigError("oracle: needs one shared solver");
  const auto& spec = config.solvers.front();
  if (spec.kind != fednova::SolverKind::kVanilla && spec.kind != fednova::SolverKind::kProximal)
    throw fednova::ConfigError("oracle: solver must be vanilla or proximal");

  const double eta = eta_override.value_or(config.eta.initial);
  const double mu = spec.kind == fednova::SolverKind::kProximal ? spec.mu : 0.0;
  const auto taus = fednova::tau_for_round(config, fednova::sample_counts(problem), 0);

  std::vector<fednova::MatrixXd> H;
  std::vector<VectorXd> e;
  for (const auto& c : quad->global.clients()) {
    H.push_back(c.hessian());
    e.push_back(c.linear_term());
  }
  const VectorXd& p = quad->global.weights();
  const VectorXd avg = fednova::quadratic_fixed_point<double>(p, H, e, taus, eta, mu);
  const VectorXd nova = fednova::fednova_quadratic_fixed_point<double>(p, H, e, taus, eta, mu);

  json j;
  j["eta"] = eta;
  j["mu"] = mu;
  j["tau"] = taus;
  j["true_optimum"] = to_json(quad->optimum);
  j["plain_averaging_fixed_point"] = to_json(avg);
  j["normalized_averaging_fixed_point"] = to_json(nova);
  j["plain_averaging_dist_to_opt"] = (avg - quad->optimum).norm();
  j["normalized_averaging_dist_to_opt"] = (nova - quad->optimum).norm();
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_constants(const std::string& config_path) {
  const auto config = fednova::load_config(config_path);
  const auto problem = fednova::build_problem(config);
  const auto view = round_zero(config, problem);
  const auto dec = fednova::resolve_rule(config.rule, view.p, view.norms, view.taus);
  const auto c = fednova::abc_constants(view.p, dec.w, dec.tau_eff, view.a);
  const double m = static_cast<double>(view.taus.size());
  const auto bound = fednova::error_bound(c, config.assumptions, m, std::max(1, config.rounds));

  json j;
  j["A"] = c.A;
  j["B"] = c.B;
  j["C"] = c.C;
  j["tau_eff"] = dec.tau_eff;
  j["tau_bar"] = c.tau_bar;
  j["slowdown"] = c.slowdown;
  j["chi2"] = c.chi2;
  j["max_learning_rate"] = fednova::max_learning_rate(
      config.assumptions.L, config.assumptions.beta2, dec.tau_eff, view.norms.maxCoeff());
  j["eps_opt"] = bound.eps_opt;
  j["total_bound"] = bound.total;
  j["best_prox_alpha"] = fednova::best_prox_alpha(m, c.tau_bar, std::max(1, config.rounds));
  j["tau"] = view.taus;
  j["weights"] = to_json(dec.w);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& grid) {
  const auto config = fednova::load_config(config_path);
  const auto problem = fednova::build_problem(config);
  const auto view = round_zero(config, problem);
  const auto values = parse_grid(grid);
  const double m = static_cast<double>(view.taus.size());
  const double T = std::max(1, config.rounds);

  if (param == "alpha") {
    std::cout << "alpha,tau_eff,chi2,slowdown,A,B,C,eps_opt,total_bound\n";
    for (double alpha : values) {
      if (!(alpha > 0 && alpha < 1)) throw fednova::ConfigError("sweep: alpha must lie in (0, 1)");
      // eta = 1, mu = alpha reproduces the accumulation vector of any (eta, mu) with eta*mu = alpha.
      const auto spec = fednova::SolverSpec<double>::proximal(1.0, alpha);
      std::vector<fednova::AccumulationVector<double>> a;
      VectorXd norms(view.norms.size());
      for (std::size_t i = 0; i < view.taus.size(); ++i) {
        a.push_back(fednova::accumulation_vector(spec, view.taus[i]));
        norms(static_cast<Eigen::Index>(i)) = a.back().norm1();
      }
      const auto dec = fednova::implicit_decomposition(view.p, norms);
      const auto c = fednova::abc_constants(view.p, dec.w, dec.tau_eff, a);
      const auto b = fednova::error_bound(c, config.assumptions, m, T);
      std::cout << fmt(alpha) << ',' << fmt(dec.tau_eff) << ',' << fmt(c.chi2) << ','
                << fmt(c.slowdown) << ',' << fmt(c.A) << ',' << fmt(c.B) << ',' << fmt(c.C)
                << ',' << fmt(b.eps_opt) << ',' << fmt(b.total) << '\n';
    }
    return kExitOk;
  }
  if (param == "tau_eff") {
    const auto base = fednova::resolve_rule(config.rule, view.p, view.norms, view.taus);
    std::cout << "tau_eff,chi2,slowdown,A,B,C,eps_opt,total_bound\n";
    for (double tau_eff : values) {
      if (!(tau_eff > 0)) throw fednova::ConfigError("sweep: tau_eff must be > 0");
      const auto c = fednova::abc_constants(view.p, base.w, tau_eff, view.a);
      const auto b = fednova::error_bound(c, config.assumptions, m, T);
      std::cout << fmt(tau_eff) << ',' << fmt(c.chi2) << ',' << fmt(c.slowdown) << ','
                << fmt(c.A) << ',' << fmt(c.B) << ',' << fmt(c.C) << ',' << fmt(b.eps_opt)
                << ',' << fmt(b.total) << '\n';
    }
    return kExitOk;
  }
  throw fednova::ConfigError("sweep: --param must be alpha or tau_eff");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous federated optimization simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "csv", param, grid;
  std::uint64_t seed = 0;
  double eta = 0;

  auto* run = app.add_subcommand("run", "Execute an experiment and write per-round metrics");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_path, "Metrics output path")->required();
  run->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");

  auto* oracle = app.add_subcommand("oracle", "Print the exact quadratic fixed points");
  oracle->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* eta_opt = oracle->add_option("--eta", eta, "Step size (defaults to eta.initial)");

  auto* constants = app.add_subcommand("constants", "Print convergence constants for a config");
  constants->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* sweep = app.add_subcommand("sweep", "Tabulate constants over a parameter grid");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "alpha or tau_eff")->required();
  sweep->add_option("--grid", grid, "lo:hi:step")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run)
      return cmd_run(config_path, out_path, format,
                     seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (*oracle)
      return cmd_oracle(config_path, eta_opt->count() ? std::optional<double>(eta) : std::nullopt);
    if (*constants) return cmd_constants(config_path);
    if (*sweep) return cmd_sweep(config_path, param, grid);
  } catch (const fednova::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const fednova::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
