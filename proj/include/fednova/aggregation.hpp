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

#ifndef FEDNOVA_AGGREGATION_HPP
#define FEDNOVA_AGGREGATION_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fednova/solvers.hpp"
#include "fednova/types.hpp"

namespace fednova {

// Server update:  x <- x - tau_eff * sum_i w_i * eta * d_i.
//
// Plain averaging of the raw changes, sum_i p_i Delta_i, is the special case
// tau_eff = sum_i p_i |a_i|_1 and w_i = p_i |a_i|_1 / tau_eff. Normalized
// averaging keeps w_i = p_i. The participation weights p passed here need not
// sum to one (rescaled client sampling); w is always normalized.

enum class WeightScheme { kImplicit, kFedNova };
enum class TauEffScheme { kImplicit, kWeightedTau, kFixed };

struct AggregationRule {
  WeightScheme weights = WeightScheme::kImplicit;
  TauEffScheme tau_eff = TauEffScheme::kImplicit;
  double fixed_tau_eff = 0;

  static AggregationRule fedavg() { return {}; }
  static AggregationRule fednova() {
    return {WeightScheme::kFedNova, TauEffScheme::kImplicit};
  }
  static AggregationRule fixed(WeightScheme w, double tau_eff) {
    return {w, TauEffScheme::kFixed, tau_eff};
  }
};

template <class Scalar>
struct Decomposition {
  Scalar tau_eff = 0;
  Vector<Scalar> w;
};

namespace detail {

template <class Scalar>
void check_participation(const Vector<Scalar>& p, const char* where) {
  require(p.size() >= 1, std::string(where) + ": no clients");
  require((p.array() >= 0).all() && p.allFinite(),
          std::string(where) + ": weights must be finite and >= 0");
  require(p.sum() > 0, std::string(where) + ": weights sum to zero");
}

// Weights already on the simplex (to the tolerance require_simplex accepts)
// are returned unchanged.
template <class Scalar>
Vector<Scalar> normalized(const Vector<Scalar>& p) {
  const Scalar total = p.sum();
  return std::abs(total - 1) <= Scalar(1e-12) ? p : Vector<Scalar>(p / total);
}

}  // namespace detail

/// tau_eff = sum p_i |a_i|_1, w_i = p_i |a_i|_1 / tau_eff.
template <class Scalar>
Decomposition<Scalar> implicit_decomposition(const Vector<Scalar>& p,
                                             const Vector<Scalar>& a_norm1s) {
  detail::check_participation(p, "implicit_decomposition");
  require_dims(p.size(), a_norm1s.size(), "implicit_decomposition");
  require((a_norm1s.array() > 0).all(), "implicit_decomposition: zero |a|_1");
  // Equal local work leaves the weights at p exactly, not just to rounding.
  if ((a_norm1s.array() == a_norm1s(0)).all())
    return {a_norm1s(0) * p.sum(), detail::normalized(p)};
  const Vector<Scalar> mass = p.cwiseProduct(a_norm1s);
  const Scalar tau_eff = mass.sum();
  return {tau_eff, mass / tau_eff};
}

/// Closed forms for proximal local solvers with alpha = eta * mu:
/// tau_eff = (1/alpha) sum p_i [1 - (1-alpha)^tau_i], w_i proportional to
/// p_i [1 - (1-alpha)^tau_i].
template <class Scalar>
Decomposition<Scalar> fedprox_closed_form(const Vector<Scalar>& p,
                                          std::span<const int> tau,
                                          Scalar alpha) {
  detail::check_participation(p, "fedprox_closed_form");
  require_dims(p.size(), static_cast<Eigen::Index>(tau.size()),
               "fedprox_closed_form");
  require(alpha > 0 && alpha < 1, "fedprox_closed_form: alpha must lie in (0, 1)");
  Vector<Scalar> mass(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    require(tau[static_cast<std::size_t>(i)] >= 1, "fedprox_closed_form: tau >= 1");
    // 1 - (1-alpha)^tau computed without cancellation for tiny alpha.
    mass(i) = p(i) * -std::expm1(tau[static_cast<std::size_t>(i)] * std::log1p(-alpha));
  }
  const Scalar total = mass.sum();
  return {total / alpha, mass / total};
}

/// Resolve (tau_eff, w) for a rule given the participants' accumulation
/// norms and executed local steps.
template <class Scalar>
Decomposition<Scalar> resolve_rule(const AggregationRule& rule,
                                   const Vector<Scalar>& p,
                                   const Vector<Scalar>& a_norm1s,
                                   std::span<const int> taus) {
  detail::check_participation(p, "resolve_rule");
  require_dims(p.size(), a_norm1s.size(), "resolve_rule");
  require_dims(p.size(), static_cast<Eigen::Index>(taus.size()), "resolve_rule");

  Decomposition<Scalar> out = implicit_decomposition(p, a_norm1s);
  if (rule.weights == WeightScheme::kFedNova) out.w = detail::normalized(p);

  switch (rule.tau_eff) {
    case TauEffScheme::kImplicit:
      break;
    case TauEffScheme::kWeightedTau: {
      Scalar t = 0;
      for (Eigen::Index i = 0; i < p.size(); ++i)
        t += p(i) * Scalar(taus[static_cast<std::size_t>(i)]);
      out.tau_eff = t;
      break;
    }
    case TauEffScheme::kFixed:
      require(rule.fixed_tau_eff > 0, "resolve_rule: fixed tau_eff must be > 0");
      out.tau_eff = Scalar(rule.fixed_tau_eff);
      break;
  }
  return out;
}

/// Global change -tau_eff * eta * sum_i w_i d_i, summed in participant order.
template <class Scalar>
Vector<Scalar> aggregate(const Decomposition<Scalar>& dec,
                         std::span<const LocalRunResult<Scalar>> results,
                         Scalar eta) {
  require(!results.empty(), "aggregate: no results");
  require_dims(dec.w.size(), static_cast<Eigen::Index>(results.size()), "aggregate");
  const Eigen::Index dim = results.front().d.size();
  Vector<Scalar> sum = Vector<Scalar>::Zero(dim);
  for (std::size_t i = 0; i < results.size(); ++i) {
    require_dims(results[i].d.size(), dim, "aggregate");
    sum += dec.w(static_cast<Eigen::Index>(i)) * results[i].d;
  }
  return -dec.tau_eff * eta * sum;
}

template <class Scalar>
Vector<Scalar> aggregate(const AggregationRule& rule, const Vector<Scalar>& p,
                         std::span<const LocalRunResult<Scalar>> results,
                         Scalar eta) {
  require_dims(p.size(), static_cast<Eigen::Index>(results.size()), "aggregate");
  Vector<Scalar> norms(p.size());
  std::vector<int> taus(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    norms(static_cast<Eigen::Index>(i)) = results[i].a_norm1;
    taus[i] = results[i].tau;
  }
  return aggregate(resolve_rule(rule, p, norms, taus), results, eta);
}

/// Plain model update, or heavy-ball momentum on the global change:
/// u <- rho_s u + delta, x <- x + u. The buffer persists across rounds.
template <class Scalar>
class ServerOptimizer {
 public:
  static ServerOptimizer plain(Eigen::Index dim) { return ServerOptimizer(dim, 0, false); }
  static ServerOptimizer momentum(Eigen::Index dim, Scalar rho_s) {
    require(rho_s >= 0 && rho_s < 1, "server momentum: rho_s must lie in [0, 1)");
    return ServerOptimizer(dim, rho_s, true);
  }

  bool uses_momentum() const { return momentum_; }
  Scalar rho() const { return rho_; }
  const Vector<Scalar>& buffer() const { return buffer_; }

  Vector<Scalar> step(const Vector<Scalar>& x, const Vector<Scalar>& global_delta) {
    require_dims(x.size(), buffer_.size(), "server_step");
    require_dims(global_delta.size(), buffer_.size(), "server_step");
    if (!momentum_) return x + global_delta;
    buffer_ = rho_ * buffer_ + global_delta;
    return x + buffer_;
  }

 private:
  ServerOptimizer(Eigen::Index dim, Scalar rho, bool momentum)
      : buffer_(Vector<Scalar>::Zero(dim)), rho_(rho), momentum_(momentum) {}

  Vector<Scalar> buffer_;
  Scalar rho_;
  bool momentum_;
};

}  // namespace fednova

#endif  // FEDNOVA_AGGREGATION_HPP
