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

#ifndef FEDNOVA_SYNTHETIC_HPP
#define FEDNOVA_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fednova/objectives.hpp"

namespace fednova {

struct ClientData {
  MatrixXd X;          // n_i x d_feat
  std::vector<int> y;  // n_i labels in [0, K)
};

/// Non-iid multinomial-logistic federated dataset.
struct SyntheticDataset {
  std::vector<ClientData> clients;
  int d_feat = 0;
  int K = 0;
  std::uint64_t seed = 0;
  double alpha = 0;
  double beta = 0;

  int num_clients() const { return static_cast<int>(clients.size()); }
  long total_samples() const;
  std::vector<long> sample_counts() const;
  /// p_i = n_i / n.
  VectorXd sample_weights() const;
};

/// Clients i = 1..m draw u_i ~ N(0, alpha), B_i ~ N(0, beta), a local model
/// W_i, b_i ~ N(u_i, 1), a feature mean v_i with entries ~ N(B_i, 1), and
/// features x ~ N(v_i, diag(j^-1.2)). Labels are argmax(W_i x + b_i); n_i is
/// round(lognormal(4, 2)) floored at 10.
SyntheticDataset generate_synthetic(double alpha, double beta, int m,
                                    int d_feat, int K, std::uint64_t seed);

/// Train/test split of one client: the last floor(test_fraction * n_i)
/// samples (at least one when n_i >= 2) are held out.
std::pair<ClientData, ClientData> split_client(const ClientData& c,
                                               double test_fraction);

std::string synthetic_to_json(const SyntheticDataset& ds);
SyntheticDataset synthetic_from_json(const std::string& text);
void save_synthetic(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset load_synthetic(const std::string& path);

}  // namespace fednova

#endif  // FEDNOVA_SYNTHETIC_HPP
