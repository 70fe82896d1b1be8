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
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fednova/harness.hpp"

namespace fednova {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError("config: " + what); }

std::vector<std::vector<double>> rows_of(const json& j) {
  return j.get<std::vector<std::vector<double>>>();
}

MatrixXd matrix_from(const json& j) {
  const auto rows = rows_of(j);
  if (rows.empty()) fail("empty matrix");
  MatrixXd M(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) fail("ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return M;
}

VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ObjectiveConfig parse_objective(const json& j) {
  ObjectiveConfig o;
  const std::string type = j.value("type", "quadratic");
  o.test_fraction = j.value("test_fraction", 0.2);
  if (j.contains("weights")) o.p = vector_from(j.at("weights"));

  if (type == "quadratic") {
    o.kind = ObjectiveConfig::Kind::kQuadratic;
    auto& q = o.quadratic;
    q.m = j.value("m", q.m);
    q.d = j.value("d", q.d);
    q.e_scale = j.value("e_scale", q.e_scale);
    q.seed = j.value("seed", q.seed);
    const std::string hess = j.value("H", std::string("identity"));
    if (hess == "identity") q.random_spd = false;
    else if (hess == "random_spd") q.random_spd = true;
    else fail("objective.H must be identity or random_spd");
    if (j.contains("clients")) {
      for (const auto& c : j.at("clients")) {
        q.e.push_back(vector_from(c.at("e")));
        if (c.contains("H")) {
          q.H.push_back(matrix_from(c.at("H")));
        } else {
          const auto d = q.e.back().size();
          q.H.push_back(MatrixXd::Identity(d, d));
        }
      }
      q.m = static_cast<int>(q.e.size());
      q.d = static_cast<int>(q.e.front().size());
    }
  } else if (type == "synthetic") {
    o.kind = ObjectiveConfig::Kind::kSynthetic;
    auto& s = o.synthetic;
    s.alpha = j.value("alpha", s.alpha);
    s.beta = j.value("beta", s.beta);
    s.m = j.value("m", s.m);
    s.d_feat = j.value("d_feat", s.d_feat);
    s.K = j.value("K", s.K);
    s.seed = j.value("seed", s.seed);
  } else if (type == "dataset_file") {
    o.kind = ObjectiveConfig::Kind::kDatasetFile;
    o.dataset_path = j.at("path").get<std::string>();
  } else {
    fail("unknown objective type '" + type + "'");
  }
  return o;
}

SolverSpec<double> parse_solver(const json& j, double eta) {
  const std::string type = j.is_string() ? j.get<std::string>() : j.value("type", "vanilla");
  SolverSpec<double> s;
  try {
    s.kind = solver_kind_from_string(type);
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  s.eta = eta;
  if (j.is_object()) {
    s.mu = j.value("mu", 0.0);
    s.gamma = j.value("gamma", 1.0);
    s.rho = j.value("rho", 0.0);
  }
  return s;
}

WeightScheme parse_weight_scheme(const std::string& name) {
  if (name == "implicit") return WeightScheme::kImplicit;
  if (name == "fednova") return WeightScheme::kFedNova;
  fail("aggregation.weights must be implicit or fednova");
}

AggregationRule parse_rule(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "fedavg" || name == "fedprox") return AggregationRule::fedavg();
    if (name == "fednova") return AggregationRule::fednova();
    fail("unknown aggregation preset '" + name + "'");
  }
  AggregationRule r;
  r.weights = parse_weight_scheme(j.value("weights", std::string("implicit")));
  if (j.contains("tau_eff")) {
    const auto& t = j.at("tau_eff");
    if (t.is_number()) {
      r.tau_eff = TauEffScheme::kFixed;
      r.fixed_tau_eff = t.get<double>();
    } else {
      const auto name = t.get<std::string>();
      if (name == "implicit") r.tau_eff = TauEffScheme::kImplicit;
      else if (name == "weighted_tau") r.tau_eff = TauEffScheme::kWeightedTau;
      else fail("aggregation.tau_eff must be implicit, weighted_tau or a number");
    }
  }
  return r;
}

TauSchedule parse_tau(const json& j) {
  if (j.is_number_integer()) return TauSchedule::fixed({j.get<int>()});
  const std::string type = j.value("type", "fixed");
  const bool tv = j.value("time_varying", false);
  if (type == "fixed") {
    if (j.contains("values")) return TauSchedule::fixed(j.at("values").get<std::vector<int>>());
    return TauSchedule::fixed({j.at("value").get<int>()});
  }
  if (type == "uniform")
    return TauSchedule::uniform(j.at("lo").get<int>(), j.at("hi").get<int>(), tv);
  if (type == "gaussian" || type == "gaussian_clipped")
    return TauSchedule::gaussian_clipped(j.at("mean").get<double>(), j.at("sd").get<double>(),
                                         j.value("lo", 1), j.at("hi").get<int>(), tv);
  if (type == "epochs" || type == "epoch_based") {
    double lo, hi;
    if (j.contains("E")) {
      lo = hi = j.at("E").get<double>();
    } else {
      lo = j.at("E_lo").get<double>();
      hi = j.at("E_hi").get<double>();
    }
    return TauSchedule::epoch_based(lo, hi, j.value("batch", 0), tv);
  }
  fail("unknown tau schedule '" + type + "'");
}

SamplingScheme parse_sampling(const json& j, double& fraction) {
  fraction = 0;
  const std::string type = j.is_string() ? j.get<std::string>() : j.value("type", "full");
  if (type == "full") return SamplingScheme::full();
  int q = 0;
  if (j.is_object()) {
    q = j.value("q", 0);
    fraction = j.value("fraction", 0.0);
  }
  if (q <= 0 && fraction <= 0) fail("sampling needs q or fraction");
  if (type == "with_replacement") return SamplingScheme::with_replacement(q);
  if (type == "without_replacement" || type == "without_replacement_rescaled")
    return SamplingScheme::without_replacement_rescaled(q);
  fail("unknown sampling scheme '" + type + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(json_text);
    if (j.contains("objective")) c.objective = parse_objective(j.at("objective"));

    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      if (e.is_number()) {
        c.eta.initial = e.get<double>();
      } else {
        c.eta.initial = e.at("initial").get<double>();
        c.eta.milestones = e.value("milestones", std::vector<double>{});
        c.eta.factor = e.value("factor", 1.0);
      }
    }

    if (j.contains("solvers")) {
      c.solvers.clear();
      for (const auto& s : j.at("solvers")) c.solvers.push_back(parse_solver(s, c.eta.initial));
      if (c.solvers.empty()) fail("solvers list is empty");
    } else if (j.contains("solver")) {
      c.solvers = {parse_solver(j.at("solver"), c.eta.initial)};
    } else {
      c.solvers = {SolverSpec<double>::vanilla(c.eta.initial)};
    }

    if (j.contains("aggregation")) c.rule = parse_rule(j.at("aggregation"));
    if (j.contains("server")) {
      const auto& s = j.at("server");
      const std::string type = s.is_string() ? s.get<std::string>() : s.value("type", "plain");
      if (type == "momentum") {
        c.server.momentum = true;
        c.server.rho = s.value("rho", 0.9);
      } else if (type != "plain") {
        fail("server.type must be plain or momentum");
      }
    }
    if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling"), c.sampling_fraction);
    if (j.contains("tau")) c.tau = parse_tau(j.at("tau"));
    c.sigma2 = j.value("sigma2", 0.0);
    c.batch_size = j.value("batch_size", 1);
    if (c.tau.kind == TauSchedule::Kind::kEpochBased && c.tau.batch <= 0)
      c.tau.batch = c.batch_size;
    c.rounds = j.value("rounds", 1);
    c.master_seed = j.value("seed", std::uint64_t{0});
    if (j.contains("x0")) {
      if (j.at("x0").is_number()) c.x0_fill = j.at("x0").get<double>();
      else c.x0 = vector_from(j.at("x0"));
    }
    if (j.contains("assumptions")) {
      const auto& a = j.at("assumptions");
      c.assumptions.L = a.value("L", 1.0);
      c.assumptions.beta2 = a.value("beta2", 1.0);
      c.assumptions.kappa2 = a.value("kappa2", 0.0);
      c.assumptions.sigma2 = a.value("sigma2", c.sigma2);
    } else {
      c.assumptions.sigma2 = c.sigma2;
    }
  } catch (const json::exception& e) {
    fail(e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

const SolverSpec<double>& ExperimentConfig::solver_for(int client) const {
  return solvers.size() == 1 ? solvers.front() : solvers.at(static_cast<std::size_t>(client));
}

void ExperimentConfig::validate() const {
  if (rounds < 1) fail("rounds must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (sigma2 < 0) fail("sigma2 must be >= 0");
  if (!(eta.initial > 0)) fail("eta.initial must be > 0");
  if (!(eta.factor > 0)) fail("eta.factor must be > 0");
  for (double f : eta.milestones)
    if (!(f > 0 && f < 1)) fail("eta milestones must lie in (0, 1)");
  for (const auto& s : solvers) s.with_eta(eta.initial).validate();
  if (server.momentum && !(server.rho >= 0 && server.rho < 1))
    fail("server.rho must lie in [0, 1)");
  if (rule.tau_eff == TauEffScheme::kFixed && !(rule.fixed_tau_eff > 0))
    fail("fixed tau_eff must be > 0");
  if (objective.test_fraction < 0 || objective.test_fraction >= 1)
    fail("test_fraction must lie in [0, 1)");
  switch (tau.kind) {
    case TauSchedule::Kind::kFixed:
      if (tau.values.empty()) fail("tau.values is empty");
      for (int v : tau.values)
        if (v < 1) fail("tau values must be >= 1");
      break;
    case TauSchedule::Kind::kUniform:
    case TauSchedule::Kind::kGaussianClipped:
      if (tau.lo < 1 || tau.hi < tau.lo) fail("tau range must satisfy 1 <= lo <= hi");
      break;
    case TauSchedule::Kind::kEpochBased:
      if (!(tau.epochs_lo > 0) || tau.epochs_hi < tau.epochs_lo)
        fail("epoch range must satisfy 0 < E_lo <= E_hi");
      if (tau.batch < 1) fail("epoch-based tau needs batch >= 1");
      if (objective.kind == ObjectiveConfig::Kind::kQuadratic)
        fail("epoch-based tau needs a dataset objective");
      break;
  }
  if (objective.kind == ObjectiveConfig::Kind::kQuadratic) {
    const auto& q = objective.quadratic;
    if (q.m < 1 || q.d < 1) fail("quadratic m and d must be >= 1");
    if (q.e_scale < 0) fail("quadratic e_scale must be >= 0");
  }
}

}  // namespace fednova
