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

#ifndef FEDNOVA_SOLVERS_HPP
#define FEDNOVA_SOLVERS_HPP

#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>

#include "fednova/types.hpp"

namespace fednova {

enum class SolverKind { kVanilla, kProximal, kDecayedLr, kMomentum, kVrMomentum };

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

/// Client optimizer for one round of local work.
template <class Scalar>
struct SolverSpec {
  SolverKind kind = SolverKind::kVanilla;
  Scalar eta = Scalar(0.01);
  Scalar mu = 0;     // proximal strength
  Scalar gamma = 1;  // per-step learning-rate decay
  Scalar rho = 0;    // momentum factor

  static SolverSpec vanilla(Scalar eta) { return {SolverKind::kVanilla, eta}; }
  static SolverSpec proximal(Scalar eta, Scalar mu) {
    return {SolverKind::kProximal, eta, mu};
  }
  static SolverSpec decayed_lr(Scalar eta, Scalar gamma) {
    return {SolverKind::kDecayedLr, eta, 0, gamma};
  }
  static SolverSpec momentum(Scalar eta, Scalar rho) {
    return {SolverKind::kMomentum, eta, 0, 1, rho};
  }
  static SolverSpec vr_momentum(Scalar eta, Scalar rho) {
    return {SolverKind::kVrMomentum, eta, 0, 1, rho};
  }

  /// alpha = eta * mu, the per-step proximal contraction.
  Scalar alpha() const { return eta * mu; }

  SolverSpec with_eta(Scalar new_eta) const {
    SolverSpec s = *this;
    s.eta = new_eta;
    return s;
  }

  void validate() const {
    require(eta > 0 && std::isfinite(eta), "solver: eta must be > 0");
    require(mu >= 0, "solver: mu must be >= 0");
    // gamma = 0 would zero every entry but the first and leave a_{-1} = 0.
    require(gamma > 0, "solver: gamma must be > 0");
    require(rho >= 0 && rho < 1, "solver: rho must lie in [0, 1)");
    if (kind == SolverKind::kProximal)
      require(alpha() < 1, "solver: proximal alpha = eta*mu must be < 1");
  }
};

/// Coefficients a_k with Delta = -eta * sum_k a_k g_k, chronological order.
template <class Scalar>
struct AccumulationVector {
  Vector<Scalar> entries;

  int size() const { return static_cast<int>(entries.size()); }
  Scalar norm1() const { return entries.sum(); }
  Scalar norm2sq() const { return entries.squaredNorm(); }
  Scalar last() const { return entries(entries.size() - 1); }
};

template <class Scalar>
AccumulationVector<Scalar> accumulation_vector(const SolverSpec<Scalar>& spec,
                                               int tau) {
  require(tau >= 1, "accumulation_vector: tau must be >= 1");
  spec.validate();
  Vector<Scalar> a(tau);
  switch (spec.kind) {
    case SolverKind::kVanilla:
      a.setOnes();
      break;
    case SolverKind::kProximal: {
      const Scalar keep = 1 - spec.alpha();
      for (int k = 0; k < tau; ++k) a(k) = std::pow(keep, tau - 1 - k);
      break;
    }
    case SolverKind::kDecayedLr:
      for (int k = 0; k < tau; ++k) a(k) = std::pow(spec.gamma, k);
      break;
    case SolverKind::kMomentum:
    case SolverKind::kVrMomentum:
      for (int k = 0; k < tau; ++k)
        a(k) = (1 - std::pow(spec.rho, tau - k)) / (1 - spec.rho);
      break;
  }
  return {std::move(a)};
}

template <class Scalar>
struct LocalRunResult {
  Vector<Scalar> delta;  // x^{(t,tau)} - x^{(t,0)}
  Vector<Scalar> d;      // normalized gradient, -delta / (eta * a_norm1)
  Scalar a_norm1 = 0;
  int tau = 0;
  /// Gradients visited by the loop, one column per step. Only filled when
  /// requested.
  Matrix<Scalar> gradients;
};

constexpr double kDivergenceRadius = 1e12;

/// Runs tau local steps from x_start. `grad(x)` returns the (stochastic)
/// gradient of the local objective; the proximal term and the cross-client
/// correction are applied here, not by the oracle.
///
/// `correction` is only accepted for vr_momentum; absent means zero.
template <class Scalar, class GradFn>
LocalRunResult<Scalar> run_local(GradFn&& grad,
                                 const std::type_identity_t<Vector<Scalar>>& x_start,
                                 const SolverSpec<Scalar>& spec, int tau,
                                 const std::type_identity_t<std::optional<Vector<Scalar>>>& correction,
                                 bool record_gradients = false) {
  require(tau >= 1, "run_local: tau must be >= 1");
  spec.validate();
  if (correction) {
    require(spec.kind == SolverKind::kVrMomentum,
            "run_local: correction is only valid for vr_momentum");
    require_dims(correction->size(), x_start.size(), "run_local correction");
  }

  const Eigen::Index dim = x_start.size();
  LocalRunResult<Scalar> out;
  out.tau = tau;
  if (record_gradients) out.gradients.resize(dim, tau);

  Vector<Scalar> x = x_start;
  Vector<Scalar> buffer = Vector<Scalar>::Zero(dim);
  Scalar step_scale = 1;

  for (int k = 0; k < tau; ++k) {
    Vector<Scalar> g = grad(static_cast<const Vector<Scalar>&>(x));
    require_dims(g.size(), dim, "run_local gradient");
    if (correction) g += *correction;
    if (record_gradients) out.gradients.col(k) = g;

    switch (spec.kind) {
      case SolverKind::kVanilla:
        x -= spec.eta * g;
        break;
      case SolverKind::kProximal:
        x -= spec.eta * (g + spec.mu * (x - x_start));
        break;
      case SolverKind::kDecayedLr:
        x -= (spec.eta * step_scale) * g;
        step_scale *= spec.gamma;
        break;
      case SolverKind::kMomentum:
      case SolverKind::kVrMomentum:
        buffer = spec.rho * buffer + g;
        x -= spec.eta * buffer;
        break;
    }

    if (!x.allFinite()) throw DivergenceError(k, "local iterate is not finite");
    if (x.norm() > Scalar(kDivergenceRadius))
      throw DivergenceError(k, "local iterate norm exceeded 1e12");
  }

  out.delta = x - x_start;
  out.a_norm1 = accumulation_vector(spec, tau).norm1();
  out.d = -out.delta / (spec.eta * out.a_norm1);
  return out;
}

/// Objective-driven overload: gradients come from
/// `objective.stochastic_gradient(x, batch_size, rng)`.
template <class Scalar, class Objective, class URBG>
LocalRunResult<Scalar> run_local(const Objective& objective,
                                 const std::type_identity_t<Vector<Scalar>>& x_start,
                                 const SolverSpec<Scalar>& spec, int tau,
                                 const std::type_identity_t<std::optional<Vector<Scalar>>>& correction,
                                 int batch_size, URBG& rng,
                                 bool record_gradients = false) {
  require_dims(objective.dimension(), x_start.size(), "run_local");
  return run_local(
      [&](const Vector<Scalar>& x) {
        return objective.stochastic_gradient(x, batch_size, rng);
      },
      x_start, spec, tau, correction, record_gradients);
}

/// c_i = sum_j p_j d_j - d_i from the previous round.
template <class Scalar>
Vector<Scalar> vr_correction(const Vector<Scalar>& d_prev_local,
                             const std::type_identity_t<Vector<Scalar>>& d_prev_weighted_avg) {
  require_dims(d_prev_local.size(), d_prev_weighted_avg.size(), "vr_correction");
  return d_prev_weighted_avg - d_prev_local;
}

}  // namespace fednova

#endif  // FEDNOVA_SOLVERS_HPP
