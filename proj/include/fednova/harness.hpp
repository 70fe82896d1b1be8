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

#ifndef FEDNOVA_HARNESS_HPP
#define FEDNOVA_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fednova/aggregation.hpp"
#include "fednova/analysis.hpp"
#include "fednova/objectives.hpp"
#include "fednova/sampling.hpp"
#include "fednova/solvers.hpp"
#include "fednova/synthetic.hpp"

namespace fednova {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct QuadraticConfig {
  int m = 30;
  int d = 10;
  double e_scale = 0.01;  // e_i ~ N(0, e_scale * I)
  bool random_spd = false;
  std::uint64_t seed = 0;
  // When non-empty these replace the generated family.
  std::vector<MatrixXd> H;
  std::vector<VectorXd> e;
};

struct SyntheticConfig {
  double alpha = 1;
  double beta = 1;
  int m = 30;
  int d_feat = 60;
  int K = 10;
  std::uint64_t seed = 0;
};

struct ObjectiveConfig {
  enum class Kind { kQuadratic, kSynthetic, kDatasetFile };
  Kind kind = Kind::kQuadratic;
  QuadraticConfig quadratic;
  SyntheticConfig synthetic;
  std::string dataset_path;
  double test_fraction = 0.2;
  // Client weights; empty means uniform for quadratics and n_i / n for data.
  VectorXd p;
};

struct TauSchedule {
  enum class Kind { kFixed, kUniform, kGaussianClipped, kEpochBased };
  Kind kind = Kind::kFixed;
  std::vector<int> values{1};  // fixed: one shared value or one per client
  double lo = 1, hi = 1;       // uniform / gaussian clip range
  double mean = 1, sd = 0;     // gaussian
  double epochs_lo = 1, epochs_hi = 1;  // epoch_based E or E range
  int batch = 1;                        // epoch_based B
  bool time_varying = false;

  static TauSchedule fixed(std::vector<int> values) {
    TauSchedule s;
    s.values = std::move(values);
    return s;
  }
  static TauSchedule uniform(int lo, int hi, bool time_varying);
  static TauSchedule gaussian_clipped(double mean, double sd, int lo, int hi,
                                      bool time_varying);
  static TauSchedule epoch_based(double E_lo, double E_hi, int batch,
                                 bool time_varying);
};

struct EtaSchedule {
  double initial = 0.01;
  std::vector<double> milestones;  // fractions of T in (0, 1)
  double factor = 1;
};

struct ServerConfig {
  bool momentum = false;
  double rho = 0;
};

struct ExperimentConfig {
  ObjectiveConfig objective;
  std::vector<SolverSpec<double>> solvers{SolverSpec<double>{}};  // one = shared
  AggregationRule rule;
  ServerConfig server;
  SamplingScheme sampling;
  double sampling_fraction = 0;  // when > 0, q = max(1, round(fraction * m))
  TauSchedule tau;
  EtaSchedule eta;
  double sigma2 = 0;
  int batch_size = 1;
  int rounds = 1;
  std::uint64_t master_seed = 0;
  AssumptionConstants assumptions;
  std::optional<VectorXd> x0;  // defaults to zero
  double x0_fill = 0;

  const SolverSpec<double>& solver_for(int client) const;
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// eta at round t: initial * factor^(milestones passed). Milestone f is
/// passed once t >= round(f * T).
double eta_at(const EtaSchedule& schedule, int round, int total_rounds);

/// Local steps of `client` at `round`. Non-time-varying draws are the caller's
/// responsibility to reuse; the harness does so by seeding the draw from
/// round 0. n_samples is used by epoch_based only.
int tau_at(const TauSchedule& schedule, int client, int round, Rng& rng,
           long n_samples = 0);

/// tau_i(t) for every client, drawn from the experiment's tau streams.
std::vector<int> tau_for_round(const ExperimentConfig& config,
                               const std::vector<long>& sample_counts, int round);

struct QuadraticProblem {
  GlobalObjective<QuadraticObjective<double>> global;
  VectorXd optimum;
  double optimum_value = 0;
};

struct LogisticProblem {
  GlobalObjective<LogisticObjective<double>> train;
  std::vector<LogisticObjective<double>> test;  // may be empty per client
  std::vector<long> test_sizes;
};

using Problem = std::variant<QuadraticProblem, LogisticProblem>;

Problem build_problem(const ExperimentConfig& config);
std::vector<long> sample_counts(const Problem& problem);
int num_clients(const Problem& problem);
Eigen::Index dimension(const Problem& problem);

struct RoundMetrics {
  int round = 0;
  double global_loss = 0;
  double grad_norm_sq = 0;            // true objective
  double surrogate_grad_norm_sq = 0;  // this round's implicit weights
  double dist_to_opt = 0;             // NaN unless the optimum is known
  double chi2 = 0;
  double tau_eff = 0;
  double tau_bar = 0;
  std::optional<double> test_accuracy;

  bool operator==(const RoundMetrics&) const;
};

struct RunOptions {
  bool record_trajectory = false;
  int workers = 0;  // 0: FEDNOVA_WORKERS or hardware concurrency
};

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  VectorXd final_x;
  std::vector<VectorXd> trajectory;  // x^{(t,0)} for t = 0..T when recorded
  bool diverged = false;
  std::string failure;
};

/// select -> local run -> aggregate -> server step -> measure, T times.
/// Deterministic given the config (including master_seed), independent of
/// the worker count.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Problem& problem,
                                const RunOptions& options = {});

int default_worker_count();

enum class MetricsFormat { kCsv, kJsonl };

MetricsFormat metrics_format_from_string(const std::string& name);
void write_metrics(std::ostream& out, const std::vector<RoundMetrics>& metrics,
                   MetricsFormat format, const std::string& failure = "");
void emit_metrics(const std::vector<RoundMetrics>& metrics, const std::string& path,
                  MetricsFormat format, const std::string& failure = "");
std::vector<RoundMetrics> parse_metrics_jsonl(std::istream& in);

}  // namespace fednova

#endif  // FEDNOVA_HARNESS_HPP
