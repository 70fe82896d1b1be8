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

#include "fednova/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "thread_pool.hpp"

namespace fednova {

TauSchedule TauSchedule::uniform(int lo, int hi, bool time_varying) {
  TauSchedule s;
  s.kind = Kind::kUniform;
  s.lo = lo;
  s.hi = hi;
  s.time_varying = time_varying;
  return s;
}

TauSchedule TauSchedule::gaussian_clipped(double mean, double sd, int lo, int hi,
                                          bool time_varying) {
  TauSchedule s;
  s.kind = Kind::kGaussianClipped;
  s.mean = mean;
  s.sd = sd;
  s.lo = lo;
  s.hi = hi;
  s.time_varying = time_varying;
  return s;
}

TauSchedule TauSchedule::epoch_based(double E_lo, double E_hi, int batch,
                                     bool time_varying) {
  TauSchedule s;
  s.kind = Kind::kEpochBased;
  s.epochs_lo = E_lo;
  s.epochs_hi = E_hi;
  s.batch = batch;
  s.time_varying = time_varying;
  return s;
}

double eta_at(const EtaSchedule& schedule, int round, int total_rounds) {
  double eta = schedule.initial;
  for (double f : schedule.milestones)
    if (round >= std::llround(f * total_rounds)) eta *= schedule.factor;
  return eta;
}

int tau_at(const TauSchedule& s, int client, int /*round*/, Rng& rng, long n_samples) {
  switch (s.kind) {
    case TauSchedule::Kind::kFixed:
      return s.values.size() == 1 ? s.values.front()
                                  : s.values.at(static_cast<std::size_t>(client));
    case TauSchedule::Kind::kUniform: {
      std::uniform_int_distribution<int> pick(static_cast<int>(s.lo), static_cast<int>(s.hi));
      return pick(rng);
    }
    case TauSchedule::Kind::kGaussianClipped: {
      std::normal_distribution<double> draw(s.mean, s.sd);
      const double v = std::clamp(std::round(draw(rng)), s.lo, s.hi);
      return std::max(1, static_cast<int>(v));
    }
    case TauSchedule::Kind::kEpochBased: {
      require(n_samples >= 1, "tau_at: epoch-based schedule needs n_i >= 1");
      double E = s.epochs_lo;
      if (s.epochs_hi > s.epochs_lo) {
        std::uniform_real_distribution<double> pick(s.epochs_lo, s.epochs_hi);
        E = pick(rng);
      }
      const auto tau = static_cast<long>(std::floor(E * double(n_samples) / s.batch));
      return static_cast<int>(std::max(1L, tau));
    }
  }
  return 1;
}

std::vector<int> tau_for_round(const ExperimentConfig& config,
                               const std::vector<long>& counts, int round) {
  const int m = static_cast<int>(counts.size());
  const auto& s = config.tau;
  if (s.kind == TauSchedule::Kind::kFixed && s.values.size() != 1 &&
      static_cast<int>(s.values.size()) != m)
    throw ConfigError("config: tau.values must have one entry per client");
  std::vector<int> taus(static_cast<std::size_t>(m));
  const int stream_round = s.time_varying ? round : 0;
  for (int i = 0; i < m; ++i) {
    Rng rng = make_rng(config.master_seed, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(stream_round), StreamTag::kTau);
    taus[static_cast<std::size_t>(i)] = tau_at(s, i, round, rng, counts[static_cast<std::size_t>(i)]);
  }
  return taus;
}

namespace {

VectorXd resolve_weights(const ObjectiveConfig& o, const VectorXd& natural) {
  if (o.p.size() == 0) return natural;
  if (o.p.size() != natural.size())
    throw ConfigError("config: objective.weights must have one entry per client");
  try {
    require_simplex(o.p, "objective.weights");
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return o.p;
}

QuadraticProblem build_quadratic(const ExperimentConfig& config) {
  const auto& q = config.objective.quadratic;
  std::vector<MatrixXd> H = q.H;
  std::vector<VectorXd> e = q.e;
  if (e.empty()) {
    Rng rng = make_rng(q.seed, 0, 0, StreamTag::kObjective);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> spectrum(0.5, 2.0);
    for (int i = 0; i < q.m; ++i) {
      VectorXd ei(q.d);
      for (int j = 0; j < q.d; ++j) ei(j) = std::sqrt(q.e_scale) * normal(rng);
      e.push_back(ei);
      if (q.random_spd) {
        MatrixXd G(q.d, q.d);
        for (Eigen::Index k = 0; k < G.size(); ++k) G.data()[k] = normal(rng);
        const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(G).householderQ();
        VectorXd lambda(q.d);
        for (int j = 0; j < q.d; ++j) lambda(j) = spectrum(rng);
        MatrixXd Hi = Q * lambda.asDiagonal() * Q.transpose();
        H.push_back(0.5 * (Hi + Hi.transpose()));
      } else {
        H.push_back(MatrixXd::Identity(q.d, q.d));
      }
    }
  }
  if (H.size() != e.size()) throw ConfigError("config: quadratic H/e count mismatch");
  const int m = static_cast<int>(e.size());

  std::vector<QuadraticObjective<double>> clients;
  clients.reserve(e.size());
  try {
    for (int i = 0; i < m; ++i)
      clients.emplace_back(H[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i)],
                           config.sigma2);
  } catch (const Error& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
  const VectorXd p = resolve_weights(config.objective, VectorXd::Constant(m, 1.0 / m));
  GlobalObjective<QuadraticObjective<double>> global(std::move(clients), p);
  VectorXd opt = quadratic_minimizer(global);
  const double opt_value = global.value(opt);
  return {std::move(global), std::move(opt), opt_value};
}

LogisticProblem build_logistic(const ExperimentConfig& config) {
  const auto& o = config.objective;
  SyntheticDataset ds;
  if (o.kind == ObjectiveConfig::Kind::kSynthetic) {
    const auto& s = o.synthetic;
    ds = generate_synthetic(s.alpha, s.beta, s.m, s.d_feat, s.K, s.seed);
  } else {
    try {
      ds = load_synthetic(o.dataset_path);
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  std::vector<LogisticObjective<double>> train, test;
  std::vector<long> train_sizes, test_sizes;
  for (const auto& c : ds.clients) {
    auto [tr, te] = split_client(c, o.test_fraction);
    train_sizes.push_back(static_cast<long>(tr.X.rows()));
    test_sizes.push_back(static_cast<long>(te.X.rows()));
    train.emplace_back(std::move(tr.X), std::move(tr.y), ds.K);
    if (te.X.rows() > 0) {
      test.emplace_back(std::move(te.X), std::move(te.y), ds.K);
    }
  }
  VectorXd natural(static_cast<Eigen::Index>(train_sizes.size()));
  double n = 0;
  for (long c : train_sizes) n += double(c);
  for (std::size_t i = 0; i < train_sizes.size(); ++i)
    natural(static_cast<Eigen::Index>(i)) = double(train_sizes[i]) / n;
  const VectorXd p = resolve_weights(o, natural);
  test_sizes.erase(std::remove(test_sizes.begin(), test_sizes.end(), 0L), test_sizes.end());
  return {GlobalObjective<LogisticObjective<double>>(std::move(train), p), std::move(test),
          std::move(test_sizes)};
}

struct RunState {
  VectorXd x;
  std::vector<std::optional<VectorXd>> d_prev;  // last normalized gradient per client
  std::optional<VectorXd> d_avg_prev;
};

template <class Objective>
ExperimentResult run_loop(const ExperimentConfig& config,
                          const GlobalObjective<Objective>& global,
                          const std::vector<long>& counts, const RunOptions& options,
                          const std::function<void(const VectorXd&, RoundMetrics&)>& measure) {
  const int m = global.num_clients();
  const Eigen::Index dim = global.dimension();
  if (config.solvers.size() != 1 && static_cast<int>(config.solvers.size()) != m)
    throw ConfigError("config: solvers must list one entry per client");

  SamplingScheme scheme = config.sampling;
  if (scheme.kind != SamplingKind::kFull && config.sampling_fraction > 0)
    scheme.q = std::max(1, static_cast<int>(std::lround(config.sampling_fraction * m)));
  if (scheme.kind == SamplingKind::kWithoutReplacementRescaled && scheme.q > m)
    throw ConfigError("config: sampling q exceeds the number of clients");

  RunState state;
  state.x = config.x0 ? *config.x0 : VectorXd::Constant(dim, config.x0_fill);
  if (state.x.size() != dim) throw ConfigError("config: x0 has the wrong dimension");
  state.d_prev.resize(static_cast<std::size_t>(m));

  auto server = config.server.momentum ? ServerOptimizer<double>::momentum(dim, config.server.rho)
                                       : ServerOptimizer<double>::plain(dim);
  const int workers = options.workers > 0 ? options.workers : default_worker_count();
  detail::ThreadPool pool(workers);

  ExperimentResult result;
  result.rounds.reserve(static_cast<std::size_t>(config.rounds));
  if (options.record_trajectory) result.trajectory.push_back(state.x);

  for (int t = 0; t < config.rounds; ++t) {
    const double eta = eta_at(config.eta, t, config.rounds);
    const std::vector<int> taus = tau_for_round(config, counts, t);

    Rng sampling_rng = make_rng(config.master_seed, 0, static_cast<std::uint64_t>(t),
                                StreamTag::kSampling);
    const auto participants =
        select_clients(scheme, global.weights(), sampling_rng).merged();
    const std::size_t q = participants.size();

    std::vector<LocalRunResult<double>> results(q);
    try {
      pool.parallel_for(q, [&](std::size_t j) {
        const int i = participants[j].client;
        const auto spec = config.solver_for(i).with_eta(eta);
        std::optional<VectorXd> correction;
        if (spec.kind == SolverKind::kVrMomentum && state.d_avg_prev &&
            state.d_prev[static_cast<std::size_t>(i)])
          correction = vr_correction(*state.d_prev[static_cast<std::size_t>(i)], *state.d_avg_prev);
        Rng rng = make_rng(config.master_seed, static_cast<std::uint64_t>(i),
                           static_cast<std::uint64_t>(t), StreamTag::kLocal);
        results[j] = run_local(global.client(i), state.x, spec,
                               taus[static_cast<std::size_t>(i)], correction,
                               config.batch_size, rng);
      });
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.failure = "diverged at round " + std::to_string(t) + ": " + e.what();
      break;
    }

    VectorXd weights(static_cast<Eigen::Index>(q));
    for (std::size_t j = 0; j < q; ++j)
      weights(static_cast<Eigen::Index>(j)) = participants[j].weight;
    Vector<double> norms(static_cast<Eigen::Index>(q));
    std::vector<int> run_taus(q);
    for (std::size_t j = 0; j < q; ++j) {
      norms(static_cast<Eigen::Index>(j)) = results[j].a_norm1;
      run_taus[j] = results[j].tau;
    }
    const auto dec = resolve_rule(config.rule, weights, norms, run_taus);
    const VectorXd delta = aggregate<double>(dec, results, eta);
    state.x = server.step(state.x, delta);
    if (!state.x.allFinite() || state.x.norm() > kDivergenceRadius) {
      result.diverged = true;
      result.failure = "diverged at round " + std::to_string(t) + ": global model left the 1e12 ball";
      break;
    }

    // Cross-client correction terms for the next round use the
    // participation-weighted mean of this round's normalized gradients.
    VectorXd d_avg = VectorXd::Zero(dim);
    const double mass = weights.sum();
    for (std::size_t j = 0; j < q; ++j) {
      d_avg += (participants[j].weight / mass) * results[j].d;
      state.d_prev[static_cast<std::size_t>(participants[j].client)] = results[j].d;
    }
    state.d_avg_prev = std::move(d_avg);

    // Population view: every client's accumulation norm at this round's tau.
    VectorXd pop_norms(m);
    double tau_sum = 0;
    for (int i = 0; i < m; ++i) {
      pop_norms(i) = accumulation_vector(config.solver_for(i).with_eta(eta),
                                         taus[static_cast<std::size_t>(i)]).norm1();
      tau_sum += taus[static_cast<std::size_t>(i)];
    }
    const auto pop = resolve_rule(config.rule, global.weights(), pop_norms, taus);

    RoundMetrics metrics;
    metrics.round = t + 1;
    metrics.global_loss = global.value(state.x);
    metrics.grad_norm_sq = global.gradient(state.x).squaredNorm();
    metrics.surrogate_grad_norm_sq = global.weighted_gradient(pop.w, state.x).squaredNorm();
    metrics.dist_to_opt = std::numeric_limits<double>::quiet_NaN();
    metrics.chi2 = chi_square(global.weights(), pop.w);
    metrics.tau_eff = dec.tau_eff;
    metrics.tau_bar = tau_sum / m;
    measure(state.x, metrics);
    result.rounds.push_back(metrics);
    if (options.record_trajectory) result.trajectory.push_back(state.x);
  }
  result.final_x = state.x;
  return result;
}

}  // namespace

Problem build_problem(const ExperimentConfig& config) {
  if (config.objective.kind == ObjectiveConfig::Kind::kQuadratic) return build_quadratic(config);
  return build_logistic(config);
}

std::vector<long> sample_counts(const Problem& problem) {
  if (const auto* q = std::get_if<QuadraticProblem>(&problem))
    return std::vector<long>(static_cast<std::size_t>(q->global.num_clients()), 0L);
  const auto& lp = std::get<LogisticProblem>(problem);
  std::vector<long> counts;
  for (const auto& c : lp.train.clients()) counts.push_back(static_cast<long>(c.num_samples()));
  return counts;
}

int num_clients(const Problem& problem) {
  return std::visit(
      [](const auto& pr) {
        if constexpr (std::is_same_v<std::decay_t<decltype(pr)>, QuadraticProblem>)
          return pr.global.num_clients();
        else
          return pr.train.num_clients();
      },
      problem);
}

Eigen::Index dimension(const Problem& problem) {
  return std::visit(
      [](const auto& pr) {
        if constexpr (std::is_same_v<std::decay_t<decltype(pr)>, QuadraticProblem>)
          return pr.global.dimension();
        else
          return pr.train.dimension();
      },
      problem);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  return run_experiment(config, build_problem(config), options);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem,
                                const RunOptions& options) {
  const auto counts = sample_counts(problem);
  if (const auto* q = std::get_if<QuadraticProblem>(&problem)) {
    return run_loop(config, q->global, counts, options,
                    [q](const VectorXd& x, RoundMetrics& r) {
                      r.dist_to_opt = (x - q->optimum).norm();
                    });
  }
  const auto& lp = std::get<LogisticProblem>(problem);
  return run_loop(config, lp.train, counts, options, [&lp](const VectorXd& x, RoundMetrics& r) {
    if (lp.test.empty()) return;
    double hits = 0, total = 0;
    for (std::size_t i = 0; i < lp.test.size(); ++i) {
      hits += lp.test[i].accuracy(x) * double(lp.test_sizes[i]);
      total += double(lp.test_sizes[i]);
    }
    r.test_accuracy = hits / total;
  });
}

int default_worker_count() {
  if (const char* env = std::getenv("FEDNOVA_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace fednova
