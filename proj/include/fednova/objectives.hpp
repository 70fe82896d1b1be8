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

#ifndef FEDNOVA_OBJECTIVES_HPP
#define FEDNOVA_OBJECTIVES_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "fednova/types.hpp"

namespace fednova {

/// F(x) = 1/2 x'Hx - e'x + 1/2 e'H^{-1}e with H symmetric positive definite.
/// The constant makes the local minimum value zero.
///
/// Stochastic gradients add isotropic Gaussian noise N(0, sigma2 I) to the
/// exact gradient.
template <class Scalar>
class QuadraticObjective {
 public:
  QuadraticObjective(Matrix<Scalar> H, Vector<Scalar> e, Scalar sigma2 = 0)
      : H_(std::move(H)), e_(std::move(e)), sigma2_(sigma2) {
    require(H_.rows() == H_.cols(), "quadratic: H must be square");
    require_dims(H_.rows(), e_.size(), "quadratic");
    require(sigma2_ >= 0, "quadratic: sigma2 must be >= 0");
    const Scalar asym = (H_ - H_.transpose()).cwiseAbs().maxCoeff();
    require(asym <= Scalar(1e-12) * std::max<Scalar>(1, H_.cwiseAbs().maxCoeff()),
            "quadratic: H must be symmetric");
    Eigen::LLT<Matrix<Scalar>> llt(H_);
    require(llt.info() == Eigen::Success,
            "quadratic: H must be positive definite");
    minimizer_ = llt.solve(e_);
  }

  Eigen::Index dimension() const { return e_.size(); }
  const Matrix<Scalar>& hessian() const { return H_; }
  const Vector<Scalar>& linear_term() const { return e_; }
  const Vector<Scalar>& minimizer() const { return minimizer_; }
  Scalar noise_variance() const { return sigma2_; }

  // Evaluated in the shifted form 1/2 (x - x*)'H(x - x*), which is equal and
  // never negative.
  Scalar value(const Vector<Scalar>& x) const {
    require_dims(x.size(), dimension(), "quad_value");
    const Vector<Scalar> r = x - minimizer_;
    return Scalar(0.5) * r.dot(H_ * r);
  }

  Vector<Scalar> gradient(const Vector<Scalar>& x) const {
    require_dims(x.size(), dimension(), "quad_grad");
    return H_ * x - e_;
  }

  /// batch_size is ignored; the noise level is fixed by sigma2.
  template <class URBG>
  Vector<Scalar> stochastic_gradient(const Vector<Scalar>& x, int /*batch_size*/,
                                     URBG& rng) const {
    Vector<Scalar> g = gradient(x);
    if (sigma2_ > 0) {
      std::normal_distribution<Scalar> noise(0, std::sqrt(sigma2_));
      for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += noise(rng);
    }
    return g;
  }

 private:
  Matrix<Scalar> H_;
  Vector<Scalar> e_;
  Vector<Scalar> minimizer_;
  Scalar sigma2_;
};

/// Multinomial logistic regression over one client's samples.
///
/// The parameter vector holds W (classes x features) in row-major order
/// followed by the bias b (classes).
template <class Scalar>
class LogisticObjective {
 public:
  LogisticObjective(Matrix<Scalar> X, std::vector<int> y, int num_classes)
      : X_(std::move(X)), y_(std::move(y)), K_(num_classes) {
    require(K_ >= 2, "logistic: need at least two classes");
    require(X_.rows() >= 1, "logistic: client needs at least one sample");
    require_dims(X_.rows(), static_cast<Eigen::Index>(y_.size()), "logistic");
    for (int label : y_)
      require(label >= 0 && label < K_, "logistic: label out of range");
  }

  Eigen::Index dimension() const { return K_ * X_.cols() + K_; }
  Eigen::Index num_features() const { return X_.cols(); }
  Eigen::Index num_samples() const { return X_.rows(); }
  int num_classes() const { return K_; }
  const Matrix<Scalar>& features() const { return X_; }
  const std::vector<int>& labels() const { return y_; }

  Scalar value(const Vector<Scalar>& x) const {
    require_dims(x.size(), dimension(), "logistic_value");
    Scalar total = 0;
    for (Eigen::Index s = 0; s < num_samples(); ++s) {
      const Vector<Scalar> z = logits(x, s);
      const Scalar zmax = z.maxCoeff();
      const Scalar lse = zmax + std::log((z.array() - zmax).exp().sum());
      total += lse - z(y_[s]);
    }
    return total / Scalar(num_samples());
  }

  Vector<Scalar> gradient(const Vector<Scalar>& x) const {
    std::vector<int> all(static_cast<std::size_t>(num_samples()));
    for (std::size_t s = 0; s < all.size(); ++s) all[s] = static_cast<int>(s);
    return gradient(x, all);
  }

  /// Mean gradient over a multiset of sample indices.
  Vector<Scalar> gradient(const Vector<Scalar>& x,
                          std::span<const int> batch) const {
    require_dims(x.size(), dimension(), "logistic_grad");
    require(!batch.empty(), "logistic_grad: empty batch");
    const Eigen::Index d = num_features();
    Vector<Scalar> g = Vector<Scalar>::Zero(dimension());
    Eigen::Map<RowMajorMatrix<Scalar>> gW(g.data(), K_, d);
    auto gb = g.tail(K_);
    for (int s : batch) {
      require(s >= 0 && s < num_samples(), "logistic_grad: index out of range");
      Vector<Scalar> prob = softmax(logits(x, s));
      prob(y_[s]) -= 1;
      gW.noalias() += prob * X_.row(s);
      gb += prob;
    }
    return g / Scalar(batch.size());
  }

  /// Mini-batch of batch_size indices drawn uniformly with replacement.
  template <class URBG>
  Vector<Scalar> stochastic_gradient(const Vector<Scalar>& x, int batch_size,
                                     URBG& rng) const {
    require(batch_size >= 1, "logistic: batch_size must be >= 1");
    std::uniform_int_distribution<int> pick(0, static_cast<int>(num_samples()) - 1);
    std::vector<int> batch(static_cast<std::size_t>(batch_size));
    for (auto& s : batch) s = pick(rng);
    return gradient(x, batch);
  }

  /// Fraction of samples whose arg-max logit equals the label.
  Scalar accuracy(const Vector<Scalar>& x) const {
    require_dims(x.size(), dimension(), "logistic_accuracy");
    Eigen::Index hits = 0;
    for (Eigen::Index s = 0; s < num_samples(); ++s) {
      Eigen::Index best;
      logits(x, s).maxCoeff(&best);
      hits += (best == y_[s]);
    }
    return Scalar(hits) / Scalar(num_samples());
  }

 private:
  Vector<Scalar> logits(const Vector<Scalar>& x, Eigen::Index s) const {
    const Eigen::Index d = num_features();
    Eigen::Map<const RowMajorMatrix<Scalar>> W(x.data(), K_, d);
    return W * X_.row(s).transpose() + x.tail(K_);
  }

  static Vector<Scalar> softmax(const Vector<Scalar>& z) {
    Vector<Scalar> p = (z.array() - z.maxCoeff()).exp();
    return p / p.sum();
  }

  Matrix<Scalar> X_;
  std::vector<int> y_;
  int K_;
};

/// Check that weights are non-negative and sum to one within 1e-12.
template <class Scalar>
void require_simplex(const Vector<Scalar>& p, const char* where) {
  require(p.size() >= 1, std::string(where) + ": empty weight vector");
  require((p.array() >= 0).all(), std::string(where) + ": negative weight");
  require(std::abs(p.sum() - Scalar(1)) <= Scalar(1e-12),
          std::string(where) + ": weights must sum to 1");
}

/// F(x) = sum_i p_i F_i(x).
template <class Objective, class Scalar = double>
class GlobalObjective {
 public:
  GlobalObjective(std::vector<Objective> clients, Vector<Scalar> p)
      : clients_(std::move(clients)), p_(std::move(p)) {
    require(!clients_.empty(), "global objective: no clients");
    require_dims(static_cast<Eigen::Index>(clients_.size()), p_.size(),
                 "global objective weights");
    require_simplex(p_, "global objective");
    for (const auto& c : clients_)
      require_dims(c.dimension(), clients_.front().dimension(),
                   "global objective clients");
  }

  int num_clients() const { return static_cast<int>(clients_.size()); }
  Eigen::Index dimension() const { return clients_.front().dimension(); }
  const Vector<Scalar>& weights() const { return p_; }
  const std::vector<Objective>& clients() const { return clients_; }
  const Objective& client(int i) const { return clients_[static_cast<std::size_t>(i)]; }

  Scalar value(const Vector<Scalar>& x) const { return weighted_value(p_, x); }
  Vector<Scalar> gradient(const Vector<Scalar>& x) const {
    return weighted_gradient(p_, x);
  }

  /// sum_i w_i F_i(x) for an arbitrary weighting (surrogate objective).
  Scalar weighted_value(const Vector<Scalar>& w, const Vector<Scalar>& x) const {
    require_dims(w.size(), p_.size(), "weighted_value");
    Scalar v = 0;
    for (int i = 0; i < num_clients(); ++i)
      if (w(i) != 0) v += w(i) * client(i).value(x);
    return v;
  }

  Vector<Scalar> weighted_gradient(const Vector<Scalar>& w,
                                   const Vector<Scalar>& x) const {
    require_dims(w.size(), p_.size(), "weighted_gradient");
    Vector<Scalar> g = Vector<Scalar>::Zero(dimension());
    for (int i = 0; i < num_clients(); ++i)
      if (w(i) != 0) g += w(i) * client(i).gradient(x);
    return g;
  }

 private:
  std::vector<Objective> clients_;
  Vector<Scalar> p_;
};

/// Minimizer (sum w_i H_i)^{-1} (sum w_i e_i) of a weighted quadratic family.
template <class Scalar>
Vector<Scalar> quadratic_minimizer(const std::vector<QuadraticObjective<Scalar>>& clients,
                                   const Vector<Scalar>& w) {
  require(!clients.empty(), "quadratic_minimizer: no clients");
  require_dims(static_cast<Eigen::Index>(clients.size()), w.size(),
               "quadratic_minimizer");
  const Eigen::Index d = clients.front().dimension();
  Matrix<Scalar> Hbar = Matrix<Scalar>::Zero(d, d);
  Vector<Scalar> ebar = Vector<Scalar>::Zero(d);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    require_dims(clients[i].dimension(), d, "quadratic_minimizer");
    Hbar += w(static_cast<Eigen::Index>(i)) * clients[i].hessian();
    ebar += w(static_cast<Eigen::Index>(i)) * clients[i].linear_term();
  }
  Eigen::LLT<Matrix<Scalar>> llt(Hbar);
  require(llt.info() == Eigen::Success,
          "quadratic_minimizer: weighted Hessian is not positive definite");
  return llt.solve(ebar);
}

template <class Scalar>
Vector<Scalar> quadratic_minimizer(
    const GlobalObjective<QuadraticObjective<Scalar>, Scalar>& global) {
  return quadratic_minimizer(global.clients(), global.weights());
}

}  // namespace fednova

#endif  // FEDNOVA_OBJECTIVES_HPP
