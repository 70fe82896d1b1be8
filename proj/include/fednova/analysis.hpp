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

#ifndef FEDNOVA_ANALYSIS_HPP
#define FEDNOVA_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <vector>

#include "fednova/aggregation.hpp"
#include "fednova/objectives.hpp"
#include "fednova/solvers.hpp"

namespace fednova {

/// The deterministic federated iteration is not a contraction at this step
/// size, so its limit does not exist.
class ContractionError : public Error {
 public:
  using Error::Error;
};

namespace detail {

/// 1 - (1 - alpha)^n computed without cancellation.
template <class Scalar>
Scalar one_minus_pow(Scalar alpha, Scalar n) {
  return -std::expm1(n * std::log1p(-alpha));
}

template <class Scalar>
Matrix<Scalar> matrix_power(Matrix<Scalar> base, int exponent) {
  Matrix<Scalar> result = Matrix<Scalar>::Identity(base.rows(), base.cols());
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

}  // namespace detail

/// K_i = [I - (I - eta*mu*I - eta*H_i)^tau_i] (H_i + mu*I)^{-1}: one round of
/// deterministic (proximal) GD moves client i by K_i (e_i - H_i x).
template <class Scalar>
Matrix<Scalar> round_gain(const Matrix<Scalar>& H, int tau, Scalar eta, Scalar mu) {
  require(tau >= 1, "round_gain: tau must be >= 1");
  const Eigen::Index d = H.rows();
  const Matrix<Scalar> I = Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar> step = I - eta * mu * I - eta * H;
  const Matrix<Scalar> shifted = H + mu * I;
  return (I - detail::matrix_power(step, tau)) * shifted.inverse();
}

/// Limit of x <- x + sum_i p_i s_i K_i (e_i - H_i x), where s_i is the
/// server's rescaling of client i's change (1 for plain averaging).
template <class Scalar>
Vector<Scalar> scaled_quadratic_fixed_point(const Vector<Scalar>& p,
                                            const std::vector<Matrix<Scalar>>& H,
                                            const std::vector<Vector<Scalar>>& e,
                                            std::span<const int> tau, Scalar eta,
                                            Scalar mu, const Vector<Scalar>& scale) {
  const auto m = static_cast<std::size_t>(p.size());
  require(m >= 1, "quadratic_fixed_point: no clients");
  require(H.size() == m && e.size() == m && tau.size() == m &&
              static_cast<std::size_t>(scale.size()) == m,
          "quadratic_fixed_point: per-client inputs disagree in length");
  require(eta > 0 && mu >= 0, "quadratic_fixed_point: need eta > 0, mu >= 0");
  const Eigen::Index d = e.front().size();

  Matrix<Scalar> M = Matrix<Scalar>::Zero(d, d);
  Vector<Scalar> b = Vector<Scalar>::Zero(d);
  for (std::size_t i = 0; i < m; ++i) {
    require_dims(H[i].rows(), d, "quadratic_fixed_point");
    require_dims(e[i].size(), d, "quadratic_fixed_point");
    const auto ii = static_cast<Eigen::Index>(i);
    const Matrix<Scalar> K = round_gain(H[i], tau[i], eta, mu);
    M += p(ii) * scale(ii) * K * H[i];
    b += p(ii) * scale(ii) * K * e[i];
  }

  const Matrix<Scalar> iteration = Matrix<Scalar>::Identity(d, d) - M;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(iteration);
  const Scalar sigma_max = svd.singularValues()(0);
  if (!(sigma_max < Scalar(1) - Scalar(1e-10)))
    throw ContractionError("quadratic_fixed_point: iteration is not a contraction "
                           "(largest singular value " + std::to_string(sigma_max) + ")");

  Eigen::FullPivLU<Matrix<Scalar>> lu(M);
  if (!lu.isInvertible()) throw ContractionError("quadratic_fixed_point: singular system");
  return lu.solve(b);
}

/// Exact limit of deterministic full-participation FedAvg (mu = 0) or
/// FedProx with local GD at step size eta.
template <class Scalar>
Vector<Scalar> quadratic_fixed_point(const Vector<Scalar>& p,
                                     const std::vector<Matrix<Scalar>>& H,
                                     const std::vector<Vector<Scalar>>& e,
                                     std::span<const int> tau, Scalar eta, Scalar mu) {
  return scaled_quadratic_fixed_point(p, H, e, tau, eta, mu,
                                      Vector<Scalar>::Ones(p.size()).eval());
}

/// Same iteration with normalized averaging: client i's change is rescaled
/// by tau_eff / |a_i|_1 with tau_eff = sum_j p_j |a_j|_1.
template <class Scalar>
Vector<Scalar> fednova_quadratic_fixed_point(const Vector<Scalar>& p,
                                             const std::vector<Matrix<Scalar>>& H,
                                             const std::vector<Vector<Scalar>>& e,
                                             std::span<const int> tau, Scalar eta,
                                             Scalar mu) {
  Vector<Scalar> norms(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto spec = mu > 0 ? SolverSpec<Scalar>::proximal(eta, mu)
                             : SolverSpec<Scalar>::vanilla(eta);
    norms(i) = accumulation_vector(spec, tau[static_cast<std::size_t>(i)]).norm1();
  }
  const Scalar tau_eff = p.dot(norms);
  return scaled_quadratic_fixed_point(p, H, e, tau, eta, mu,
                                      (tau_eff * norms.cwiseInverse()).eval());
}

/// Small-step limit sum tau_i e_i / sum tau_i for F_i = 1/2 |x - e_i|^2.
template <class Scalar>
Vector<Scalar> small_step_limit(std::span<const int> tau, const std::vector<Vector<Scalar>>& e) {
  require(!tau.empty() && tau.size() == e.size(), "small_step_limit: bad inputs");
  Vector<Scalar> num = Vector<Scalar>::Zero(e.front().size());
  Scalar den = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    require(tau[i] >= 1, "small_step_limit: tau must be >= 1");
    num += Scalar(tau[i]) * e[i];
    den += Scalar(tau[i]);
  }
  return num / den;
}

/// sum_i (p_i - w_i)^2 / w_i.
template <class Scalar>
Scalar chi_square(const Vector<Scalar>& p, const Vector<Scalar>& w) {
  require_dims(p.size(), w.size(), "chi_square");
  require((w.array() > 0).all(), "chi_square: w has a zero entry");
  return ((p - w).array().square() / w.array()).sum();
}

struct AssumptionConstants {
  double L = 1;       // smoothness
  double sigma2 = 0;  // gradient noise
  double beta2 = 1;   // dissimilarity, >= 1
  double kappa2 = 0;  // dissimilarity, >= 0

  void validate() const {
    require(L > 0, "assumptions: L must be > 0");
    require(sigma2 >= 0, "assumptions: sigma2 must be >= 0");
    require(beta2 >= 1, "assumptions: beta2 must be >= 1");
    require(kappa2 >= 0, "assumptions: kappa2 must be >= 0");
  }
};

struct ConvergenceConstants {
  double A = 0;
  double B = 0;
  double C = 0;
  double tau_bar = 0;
  double slowdown = 0;  // tau_bar / tau_eff
  double chi2 = 0;
};

struct AbcConstants {
  double A = 0;
  double B = 0;
  double C = 0;
};

/// A = m tau_eff sum w_i^2 |a_i|_2^2 / |a_i|_1^2,
/// B = sum w_i (|a_i|_2^2 - a_{i,-1}^2),
/// C = max_i |a_i|_1 (|a_i|_1 - a_{i,-1}).
/// chi2 is left at zero; use the overload taking p to fill it.
template <class Scalar>
ConvergenceConstants abc_constants(const Vector<Scalar>& w, Scalar tau_eff,
                               const std::vector<AccumulationVector<Scalar>>& a) {
  require(!a.empty(), "abc_constants: no clients");
  require_dims(w.size(), static_cast<Eigen::Index>(a.size()), "abc_constants");
  require(tau_eff > 0, "abc_constants: tau_eff must be > 0");
  const auto m = static_cast<double>(a.size());
  ConvergenceConstants c;
  double sum_a = 0, sum_tau = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double wi = w(static_cast<Eigen::Index>(i));
    const double n1 = a[i].norm1(), n2 = a[i].norm2sq(), last = a[i].last();
    sum_a += wi * wi * n2 / (n1 * n1);
    c.B += wi * (n2 - last * last);
    c.C = std::max(c.C, n1 * (n1 - last));
    sum_tau += a[i].size();
  }
  c.A = m * tau_eff * sum_a;
  c.tau_bar = sum_tau / m;
  c.slowdown = c.tau_bar / tau_eff;
  return c;
}

template <class Scalar>
ConvergenceConstants abc_constants(const Vector<Scalar>& p, const Vector<Scalar>& w,
                               Scalar tau_eff,
                               const std::vector<AccumulationVector<Scalar>>& a) {
  ConvergenceConstants c = abc_constants(w, tau_eff, a);
  c.chi2 = chi_square(p, w);
  return c;
}

/// Closed forms for vanilla local SGD: A = m sum p_i^2 tau_i / E_p[tau],
/// B = E_p[tau] - 1 + Var_p[tau] / E_p[tau], C = tau_max (tau_max - 1).
template <class Scalar>
AbcConstants fedavg_constants(const Vector<Scalar>& p, std::span<const int> tau) {
  require_dims(p.size(), static_cast<Eigen::Index>(tau.size()), "fedavg_constants");
  const auto m = static_cast<double>(tau.size());
  double mean = 0, second = 0, psq = 0;
  int tau_max = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double pi = p(static_cast<Eigen::Index>(i)), t = tau[i];
    mean += pi * t;
    second += pi * t * t;
    psq += pi * pi * t;
    tau_max = std::max(tau_max, tau[i]);
  }
  const double var = second - mean * mean;
  return {m * psq / mean, mean - 1 + var / mean,
          double(tau_max) * double(tau_max - 1)};
}

/// Closed forms for proximal local SGD with alpha = eta * mu in (0, 1).
template <class Scalar>
AbcConstants fedprox_constants(const Vector<Scalar>& p, std::span<const int> tau,
                               Scalar alpha) {
  require_dims(p.size(), static_cast<Eigen::Index>(tau.size()), "fedprox_constants");
  require(alpha > 0 && alpha < 1, "fedprox_constants: alpha must lie in (0, 1)");
  const double a = alpha;
  const auto m = static_cast<double>(tau.size());
  const double denom2 = a * (2 - a);  // 1 - (1-alpha)^2
  double mass = 0, psq = 0, bsum = 0;
  int tau_max = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double pi = p(static_cast<Eigen::Index>(i));
    const double g1 = detail::one_minus_pow(a, double(tau[i]));
    const double norm2sq = detail::one_minus_pow(a, 2.0 * tau[i]) / denom2;
    mass += pi * g1;
    psq += pi * pi * norm2sq;
    bsum += pi * g1 * (norm2sq - 1);
    tau_max = std::max(tau_max, tau[i]);
  }
  const double n1_max = detail::one_minus_pow(a, double(tau_max)) / a;
  return {m * a * psq / mass, bsum / mass, n1_max * (n1_max - 1)};
}

/// Order-optimal proximal alpha = sqrt(m) / (sqrt(tau_bar) T^(1/6)), clipped
/// to 1 - 1e-6 when it leaves (0, 1).
inline double best_prox_alpha(double m, double tau_bar, double T) {
  require(m > 0 && tau_bar > 0 && T > 0, "best_prox_alpha: arguments must be > 0");
  const double alpha = std::sqrt(m) / (std::sqrt(tau_bar) * std::pow(T, 1.0 / 6.0));
  if (alpha >= 1) {
    std::clog << "warning: best_prox_alpha " << alpha
              << " is outside (0, 1); clipped to 1 - 1e-6\n";
    return 1 - 1e-6;
  }
  return alpha;
}

/// Largest eta with eta L <= 1/2 min{1 / (max|a|_1 sqrt(2 beta2 + 1)), 1 / tau_eff}.
inline double max_learning_rate(double L, double beta2, double tau_eff,
                                double max_a_norm1) {
  require(L > 0 && beta2 > 0 && tau_eff > 0 && max_a_norm1 > 0,
          "max_learning_rate: arguments must be > 0");
  const double local = 1.0 / (max_a_norm1 * std::sqrt(2 * beta2 + 1));
  return 0.5 * std::min(local, 1.0 / tau_eff) / L;
}

struct ErrorBound {
  double eps_opt = 0;
  double total = 0;
};

/// Order terms with unit constants and unit initial suboptimality:
/// eps_opt = (slowdown + A sigma2) / sqrt(m tau_bar T) + m (B sigma2 + C kappa2) / (tau_bar T),
/// total = 2 [chi2 (beta2 - 1) + 1] eps_opt + 2 chi2 kappa2.
inline ErrorBound error_bound(const ConvergenceConstants& c,
                              const AssumptionConstants& as, double m, double T) {
  as.validate();
  require(m > 0 && T > 0 && c.tau_bar > 0, "error_bound: m, T, tau_bar must be > 0");
  const double root = std::sqrt(m * c.tau_bar * T);
  const double lin = c.tau_bar * T;
  ErrorBound out;
  out.eps_opt = c.slowdown / root + c.A * as.sigma2 / root +
                m * c.B * as.sigma2 / lin + m * c.C * as.kappa2 / lin;
  out.total = 2 * (c.chi2 * (as.beta2 - 1) + 1) * out.eps_opt +
              2 * c.chi2 * as.kappa2;
  return out;
}

/// Limiting |grad F|^2 of FedAvg on F_1 = 1/2 (x - a)^2, F_2 = 1/2 (x + a)^2
/// with tau_1, tau_2 local steps: ((tau_1 - tau_2)/(tau_1 + tau_2))^2 a^2.
inline double lower_bound_gap(int tau1, int tau2, double a) {
  require(tau1 >= 1 && tau2 >= 1, "lower_bound_gap: tau must be >= 1");
  const double r = double(tau1 - tau2) / double(tau1 + tau2);
  return r * r * a * a;
}

}  // namespace fednova

#endif  // FEDNOVA_ANALYSIS_HPP
