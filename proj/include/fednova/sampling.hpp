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

#ifndef FEDNOVA_SAMPLING_HPP
#define FEDNOVA_SAMPLING_HPP

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "fednova/objectives.hpp"

namespace fednova {

enum class SamplingKind { kFull, kWithReplacement, kWithoutReplacementRescaled };

struct SamplingScheme {
  SamplingKind kind = SamplingKind::kFull;
  int q = 0;

  static SamplingScheme full() { return {}; }
  static SamplingScheme with_replacement(int q) {
    return {SamplingKind::kWithReplacement, q};
  }
  static SamplingScheme without_replacement_rescaled(int q) {
    return {SamplingKind::kWithoutReplacementRescaled, q};
  }
};

template <class Scalar>
struct Participant {
  int client = 0;
  Scalar weight = 0;
};

/// Clients chosen for a round with their aggregation weights. For any fixed
/// per-client vectors v_i, E[sum_j weight_j v_{client_j}] = sum_i p_i v_i.
template <class Scalar>
struct ParticipationDraw {
  std::vector<Participant<Scalar>> entries;  // draw order, may repeat

  /// Distinct clients in index order, repeated draws merged by summing
  /// their weights.
  std::vector<Participant<Scalar>> merged() const {
    std::map<int, Scalar> acc;
    for (const auto& e : entries) acc[e.client] += e.weight;
    std::vector<Participant<Scalar>> out;
    out.reserve(acc.size());
    for (const auto& [client, weight] : acc) out.push_back({client, weight});
    return out;
  }
};

/// full: every client with weight p_i.
/// with_replacement: q i.i.d. draws from Multinomial(p), weight 1/q each.
/// without_replacement_rescaled: q distinct uniform clients, weight p_i m / q.
template <class Scalar, class URBG>
ParticipationDraw<Scalar> select_clients(const SamplingScheme& scheme,
                                         const Vector<Scalar>& p, URBG& rng) {
  require_simplex(p, "select_clients");
  const int m = static_cast<int>(p.size());
  ParticipationDraw<Scalar> draw;

  switch (scheme.kind) {
    case SamplingKind::kFull:
      for (int i = 0; i < m; ++i) draw.entries.push_back({i, p(i)});
      break;
    case SamplingKind::kWithReplacement: {
      require(scheme.q >= 1, "select_clients: q must be >= 1");
      std::discrete_distribution<int> pick(p.data(), p.data() + m);
      for (int j = 0; j < scheme.q; ++j)
        draw.entries.push_back({pick(rng), Scalar(1) / Scalar(scheme.q)});
      break;
    }
    case SamplingKind::kWithoutReplacementRescaled: {
      require(scheme.q >= 1, "select_clients: q must be >= 1");
      require(scheme.q <= m, "select_clients: q exceeds the number of clients");
      std::vector<int> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      // Partial Fisher-Yates over the first q slots.
      for (int j = 0; j < scheme.q; ++j) {
        std::uniform_int_distribution<int> pick(j, m - 1);
        std::swap(order[static_cast<std::size_t>(j)],
                  order[static_cast<std::size_t>(pick(rng))]);
      }
      order.resize(static_cast<std::size_t>(scheme.q));
      std::sort(order.begin(), order.end());
      for (int i : order)
        draw.entries.push_back({i, p(i) * Scalar(m) / Scalar(scheme.q)});
      break;
    }
  }
  return draw;
}

}  // namespace fednova

#endif  // FEDNOVA_SAMPLING_HPP
