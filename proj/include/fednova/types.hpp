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

#ifndef FEDNOVA_TYPES_HPP
#define FEDNOVA_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fednova {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

using Rng = std::mt19937_64;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A local iterate became non-finite or left the ball of radius 1e12.
class DivergenceError : public Error {
 public:
  DivergenceError(int step, const std::string& what)
      : Error(what + " (local step " + std::to_string(step) + ")"),
        step_(step) {}

  int step() const { return step_; }

 private:
  int step_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

inline void require_dims(Eigen::Index a, Eigen::Index b,
                         const std::string& where) {
  if (a != b)
    throw DimensionError(where + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tags separating the independent random streams of an experiment.
enum class StreamTag : std::uint64_t {
  kObjective = 1,
  kTau = 2,
  kSampling = 3,
  kLocal = 4,
};

/// Seed of the stream identified by (master, client, round, tag). Changing any
/// one coordinate yields a statistically unrelated stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t client,
                                    std::uint64_t round, StreamTag tag) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ (client + 0x1000193ULL));
  h = mix64(h ^ (round + 0x2545f4914f6cdd1dULL));
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::uint64_t client,
                    std::uint64_t round, StreamTag tag) {
  return Rng(derive_seed(master, client, round, tag));
}

template <class Scalar>
bool all_finite(const Vector<Scalar>& v) {
  return v.allFinite();
}

}  // namespace fednova

#endif  // FEDNOVA_TYPES_HPP
