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

#include <doctest.h>

#include <random>
#include <span>

#include "fednova/aggregation.hpp"
#include "fednova/analysis.hpp"
#include "fednova/objectives.hpp"
#include "test_support.hpp"

using namespace fednova;
using namespace fednova::testing;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

struct Instance {
  VectorXd p;
  std::vector<MatrixXd> H;
  std::vector<VectorXd> e;
  std::vector<int> tau;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> m_draw(2, 5), d_draw(1, 4), tau_draw(1, 6);
  const int m = m_draw(rng), d = d_draw(rng);
  Instance in;
  in.p = random_simplex(rng, m);
  for (int i = 0; i < m; ++i) {
    in.H.push_back(random_spd(rng, d));
    in.e.push_back(random_vector(rng, d));
    in.tau.push_back(tau_draw(rng));
  }
  return in;
}

// Deterministic full-participation rounds with local (proximal) GD.
VectorXd simulate(const Instance& in, const AggregationRule& rule, double eta, double mu,
                  int rounds) {
  VectorXd x = VectorXd::Zero(in.e.front().size());
  const auto spec = mu > 0 ? SolverSpec<double>::proximal(eta, mu) : SolverSpec<double>::vanilla(eta);
  for (int t = 0; t < rounds; ++t) {
    std::vector<LocalRunResult<double>> results;
    for (std::size_t i = 0; i < in.H.size(); ++i) {
      const QuadraticObjective<double> f(in.H[i], in.e[i]);
      results.push_back(run_local<double>([&](const VectorXd& z) { return f.gradient(z); }, x,
                                          spec, in.tau[i], std::nullopt));
    }
    x += aggregate<double>(rule, in.p, results, eta);
  }
  return x;
}

VectorXd true_optimum(const Instance& in) {
  MatrixXd Hbar = MatrixXd::Zero(in.H.front().rows(), in.H.front().cols());
  VectorXd b = VectorXd::Zero(Hbar.rows());
  for (std::size_t i = 0; i < in.H.size(); ++i) {
    Hbar += in.p(static_cast<Eigen::Index>(i)) * in.H[i];
    b += in.p(static_cast<Eigen::Index>(i)) * in.e[i];
  }
  return Hbar.ldlt().solve(b);
}

double max_abs_diff(const AbcConstants& a, const ConvergenceConstants& b) {
  return std::max({std::abs(a.A - b.A), std::abs(a.B - b.B), std::abs(a.C - b.C)});
}

}  // namespace

TEST_CASE("quadratic fixed point examples") {
  const std::vector<MatrixXd> H{scalar_mat(1), scalar_mat(1)};
  const std::vector<VectorXd> e{scalar_vec(0), scalar_vec(1)};
  const std::vector<int> tau{1, 3};
  const VectorXd p = vec2(0.5, 0.5);

  CHECK(round_gain<double>(scalar_mat(1), 3, 0.1, 0.0)(0, 0) == doctest::Approx(0.271).epsilon(1e-14));
  const VectorXd x = quadratic_fixed_point<double>(p, H, e, tau, 0.1, 0.0);
  CHECK(x(0) == doctest::Approx(0.271 / 0.371).epsilon(1e-13));
  CHECK(x(0) == doctest::Approx(0.730458).epsilon(1e-6));

  const VectorXd tiny = quadratic_fixed_point<double>(p, H, e, tau, 1e-6, 0.0);
  CHECK(std::abs(tiny(0) - 0.75) < 1e-5);

  const std::vector<int> equal{4, 4};
  CHECK(std::abs(quadratic_fixed_point<double>(p, H, e, equal, 0.1, 0.0)(0) - 0.5) < 1e-14);
}

TEST_CASE("fixed point rejects a non-contracting step") {
  const std::vector<MatrixXd> H{scalar_mat(1), scalar_mat(1)};
  const std::vector<VectorXd> e{scalar_vec(0), scalar_vec(1)};
  const std::vector<int> tau{1, 3};
  CHECK_THROWS_AS(quadratic_fixed_point<double>(vec2(0.5, 0.5), H, e, tau, 2.5, 0.0), ContractionError);
}

TEST_CASE("small step limit") {
  const std::vector<int> tau{1, 3};
  const std::vector<VectorXd> e{scalar_vec(0), scalar_vec(1)};
  CHECK(small_step_limit<double>(tau, e)(0) == 0.75);
  const std::vector<int> equal{2, 2, 2};
  const std::vector<VectorXd> e3{scalar_vec(1), scalar_vec(2), scalar_vec(6)};
  CHECK(small_step_limit<double>(equal, e3)(0) == doctest::Approx(3.0));
  const std::vector<int> one{7};
  CHECK(small_step_limit<double>(one, std::vector<VectorXd>{scalar_vec(-2)})(0) == -2);
}

TEST_CASE("chi square") {
  CHECK(chi_square<double>(vec2(0.3, 0.7), vec2(0.3, 0.7)) == 0);
  CHECK(chi_square<double>(vec2(0.5, 0.5), vec2(0.25, 0.75)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (int t1 = 1; t1 <= 6; ++t1)
    for (int t2 = 1; t2 <= 6; ++t2) {
      const VectorXd w = vec2(t1, t2) / double(t1 + t2);
      CHECK(chi_square<double>(vec2(0.5, 0.5), w) ==
            doctest::Approx(double((t2 - t1) * (t2 - t1)) / (4.0 * t1 * t2)).epsilon(1e-13));
    }
  CHECK_THROWS_AS(chi_square<double>(vec2(0.5, 0.5), vec2(1, 0)), InvalidArgument);
  CHECK_THROWS_AS(chi_square<double>(vec2(0.5, 0.5), VectorXd::Ones(3)), DimensionError);
}

TEST_CASE("chi square of implicit weights vanishes iff local work is equal") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const VectorXd p = random_simplex(rng, 4);
    const double n = 1.0 + trial;
    CHECK(chi_square<double>(p, implicit_decomposition<double>(p, VectorXd::Constant(4, n)).w) == 0.0);
    VectorXd uneven = VectorXd::Constant(4, n);
    uneven(trial % 4) += 0.5;
    CHECK(chi_square<double>(p, implicit_decomposition<double>(p, uneven).w) > 0.0);
  }
}

TEST_CASE("abc constants examples") {
  for (int tau = 1; tau <= 10; ++tau)
    for (int m : {1, 2, 5, 30}) {
      const VectorXd p = VectorXd::Constant(m, 1.0 / m);
      std::vector<AccumulationVector<double>> a(static_cast<std::size_t>(m),
                                                accumulation_vector(SolverSpec<double>::vanilla(1.0), tau));
      const VectorXd norms = VectorXd::Constant(m, tau);
      const auto dec = implicit_decomposition<double>(p, norms);
      const auto c = abc_constants<double>(p, dec.w, dec.tau_eff, a);
      CHECK(c.A == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(c.B == doctest::Approx(tau - 1.0).epsilon(1e-14));
      CHECK(c.C == double(tau) * (tau - 1));
      CHECK(c.chi2 == 0.0);
      CHECK(c.slowdown == doctest::Approx(1.0));
    }

  const std::vector<AccumulationVector<double>> a{
      accumulation_vector(SolverSpec<double>::vanilla(1.0), 1),
      accumulation_vector(SolverSpec<double>::vanilla(1.0), 3)};
  const auto dec = implicit_decomposition<double>(vec2(0.5, 0.5), vec2(1, 3));
  const auto c = abc_constants<double>(vec2(0.5, 0.5), dec.w, dec.tau_eff, a);
  CHECK(c.A == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.B == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(c.C == 6.0);
  CHECK(c.tau_bar == 2.0);
  CHECK(c.chi2 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("fedavg constants") {
  const std::vector<int> t13{1, 3};
  const auto c = fedavg_constants<double>(vec2(0.5, 0.5), t13);
  CHECK(c.A == doctest::Approx(1.0));
  CHECK(c.B == doctest::Approx(1.5));
  CHECK(c.C == 6.0);

  const std::vector<int> t51{5, 1};
  CHECK(fedavg_constants<double>(vec2(1, 0), t51).A == doctest::Approx(2.0));

  const std::vector<int> flat{4, 4, 4};
  CHECK(fedavg_constants<double>(VectorXd::Constant(3, 1.0 / 3), flat).B == doctest::Approx(3.0));
}

TEST_CASE("constants agree across routes") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> tau_draw(1, 12), m_draw(1, 8);
  std::uniform_real_distribution<double> alpha_draw(0.01, 0.99);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = m_draw(rng);
    const VectorXd p = random_simplex(rng, m);
    std::vector<int> tau;
    for (int i = 0; i < m; ++i) tau.push_back(tau_draw(rng));
    const double alpha = alpha_draw(rng);

    for (bool prox : {false, true}) {
      const auto spec = prox ? SolverSpec<double>::proximal(1.0, alpha) : SolverSpec<double>::vanilla(1.0);
      std::vector<AccumulationVector<double>> a;
      VectorXd norms(m);
      for (int i = 0; i < m; ++i) {
        a.push_back(accumulation_vector(spec, tau[static_cast<std::size_t>(i)]));
        norms(i) = a.back().norm1();
      }
      const auto dec = implicit_decomposition<double>(p, norms);
      const auto explicit_route = abc_constants<double>(dec.w, dec.tau_eff, a);
      const auto closed = prox ? fedprox_constants<double>(p, tau, alpha) : fedavg_constants<double>(p, tau);
      CHECK(max_abs_diff(closed, explicit_route) < 1e-10);
      CHECK(explicit_route.A >= 0);
      CHECK(explicit_route.B >= 0);
      CHECK(explicit_route.C >= 0);
    }
  }
}

TEST_CASE("fedprox constants limits") {
  const std::vector<int> tau{1, 3, 7};
  const VectorXd p = VectorXd::Constant(3, 1.0 / 3);
  const auto prox = fedprox_constants<double>(p, tau, 1e-8);
  const auto plain = fedavg_constants<double>(p, tau);
  CHECK(std::abs(prox.A - plain.A) < 1e-5);
  CHECK(std::abs(prox.B - plain.B) < 1e-5);
  CHECK(std::abs(prox.C - plain.C) < 1e-5);

  const std::vector<int> ones{1, 1, 1};
  for (double alpha : {0.1, 0.5, 0.9}) {
    const auto c = fedprox_constants<double>(p, ones, alpha);
    const auto v = fedavg_constants<double>(p, ones);
    CHECK(c.A == doctest::Approx(v.A));
    CHECK(c.B == doctest::Approx(0.0));
    CHECK(c.C == doctest::Approx(0.0));
  }

  const std::vector<int> t13{1, 3};
  const auto spec = SolverSpec<double>::proximal(1.0, 0.5);
  const std::vector<AccumulationVector<double>> a{accumulation_vector(spec, 1), accumulation_vector(spec, 3)};
  const auto dec = implicit_decomposition<double>(vec2(0.5, 0.5), vec2(a[0].norm1(), a[1].norm1()));
  CHECK(max_abs_diff(fedprox_constants<double>(vec2(0.5, 0.5), t13, 0.5),
                     abc_constants<double>(dec.w, dec.tau_eff, a)) < 1e-12);

  CHECK_THROWS_AS(fedprox_constants<double>(vec2(0.5, 0.5), t13, 0.0), InvalidArgument);
  CHECK_THROWS_AS(fedprox_constants<double>(vec2(0.5, 0.5), t13, 1.0), InvalidArgument);
}

TEST_CASE("larger alpha trades inconsistency for slowdown") {
  const VectorXd p = VectorXd::Constant(4, 0.25);
  const std::vector<int> tau{1, 4, 9, 20};
  double prev_chi2 = 1e300, prev_slow = 0;
  for (int k = 1; k <= 99; ++k) {
    const double alpha = k / 100.0;
    const auto dec = fedprox_closed_form<double>(p, tau, alpha);
    const double chi2 = chi_square<double>(p, dec.w);
    const double slow = (1 + 4 + 9 + 20) / 4.0 / dec.tau_eff;
    CHECK(chi2 <= prev_chi2 + 1e-15);
    CHECK(slow >= prev_slow - 1e-15);
    prev_chi2 = chi2;
    prev_slow = slow;
  }
}

TEST_CASE("best prox alpha") {
  CHECK(best_prox_alpha(30, 20, 100) ==
        doctest::Approx(std::sqrt(30.0) / (std::sqrt(20.0) * std::pow(100.0, 1.0 / 6.0))).epsilon(1e-15));
  CHECK(best_prox_alpha(30, 20, 100) == doctest::Approx(0.5684762119).epsilon(1e-9));
  CHECK(best_prox_alpha(30, 20, 1e12) < best_prox_alpha(30, 20, 1e6));
  CHECK(best_prox_alpha(30, 20, 1e30) < 1e-4);
  CHECK(best_prox_alpha(100, 1, 1) == 1 - 1e-6);
}

TEST_CASE("max learning rate") {
  CHECK(max_learning_rate(1, 1, 2, 3) == doctest::Approx(1.0 / (6.0 * std::sqrt(3.0))).epsilon(1e-15));
  CHECK(max_learning_rate(1, 1, 2, 3) == doctest::Approx(0.09623).epsilon(1e-4));
  CHECK(max_learning_rate(1, 1, 10, 1) == doctest::Approx(0.05));
  CHECK(max_learning_rate(2, 1, 2, 3) == doctest::Approx(max_learning_rate(1, 1, 2, 3) / 2));
}

TEST_CASE("error bound") {
  ConvergenceConstants c{2.0, 1.5, 6.0, 2.0, 1.0, 0.0};
  AssumptionConstants as;
  as.sigma2 = 0.3;
  as.kappa2 = 0.2;
  const auto b = error_bound(c, as, 2, 100);
  const double root = std::sqrt(2.0 * 2.0 * 100.0), lin = 200.0;
  CHECK(b.eps_opt == doctest::Approx(1.0 / root + 2.0 * 0.3 / root + 2 * 1.5 * 0.3 / lin + 2 * 6.0 * 0.2 / lin));
  CHECK(b.total == doctest::Approx(2 * b.eps_opt));

  c.chi2 = 0.5;
  as.beta2 = 3;
  const auto floor = error_bound(c, as, 2, 1e18);
  CHECK(floor.total == doctest::Approx(2 * 0.5 * 0.2).epsilon(1e-6));

  AssumptionConstants quiet;
  const auto q = error_bound(c, quiet, 2, 100);
  CHECK(q.eps_opt == doctest::Approx(1.0 / root));

  AssumptionConstants bad;
  bad.beta2 = 0.5;
  CHECK_THROWS_AS(error_bound(c, bad, 2, 100), InvalidArgument);
}

// The gap is the 2 chi2 kappa2 floor of the error decomposition.
TEST_CASE("lower bound gap identity") {
  CHECK(lower_bound_gap(3, 3, 2.0) == 0.0);
  CHECK(lower_bound_gap(1, 3, 1.0) == 0.25);
  for (int t1 = 1; t1 <= 8; ++t1)
    for (int t2 = 1; t2 <= 8; ++t2)
      for (double a : {0.5, 1.0, 3.0}) {
        const VectorXd w = vec2(t1, t2) / double(t1 + t2);
        const double kappa2 = 2 * w(0) * w(1) * a * a;
        CHECK(std::abs(lower_bound_gap(t1, t2, a) - 2 * chi_square<double>(vec2(0.5, 0.5), w) * kappa2) < 1e-12);
      }
}

TEST_CASE("plain averaging simulation converges to the fixed point") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(rng);
    for (double mu : {0.0, 1.0}) {
      const VectorXd oracle = quadratic_fixed_point<double>(in.p, in.H, in.e, in.tau, 0.1, mu);
      const VectorXd sim = simulate(in, AggregationRule::fedavg(), 0.1, mu, 3000);
      CHECK((sim - oracle).norm() < 1e-8);
    }
  }
}

TEST_CASE("normalized averaging converges to its fixed point, whose bias vanishes with eta") {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(rng);
    const VectorXd oracle = fednova_quadratic_fixed_point<double>(in.p, in.H, in.e, in.tau, 0.1, 0.0);
    const VectorXd sim = simulate(in, AggregationRule::fednova(), 0.1, 0.0, 3000);
    CHECK((sim - oracle).norm() < 1e-8);

    const VectorXd xstar = true_optimum(in);
    const double b1 = (fednova_quadratic_fixed_point<double>(in.p, in.H, in.e, in.tau, 1e-2, 0.0) - xstar).norm();
    const double b2 = (fednova_quadratic_fixed_point<double>(in.p, in.H, in.e, in.tau, 1e-4, 0.0) - xstar).norm();
    CHECK(b2 <= b1 * 0.05 + 1e-12);
    CHECK(b2 < 1e-3);

    const VectorXd avg_limit = quadratic_fixed_point<double>(in.p, in.H, in.e, in.tau, 1e-4, 0.0);
    const bool heterogeneous = *std::min_element(in.tau.begin(), in.tau.end()) !=
                               *std::max_element(in.tau.begin(), in.tau.end());
    if (heterogeneous) CHECK(b2 < (avg_limit - xstar).norm());
  }
}
