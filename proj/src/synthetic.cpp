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

#include "fednova/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fednova {

using nlohmann::json;

long SyntheticDataset::total_samples() const {
  long n = 0;
  for (const auto& c : clients) n += static_cast<long>(c.X.rows());
  return n;
}

std::vector<long> SyntheticDataset::sample_counts() const {
  std::vector<long> n;
  n.reserve(clients.size());
  for (const auto& c : clients) n.push_back(static_cast<long>(c.X.rows()));
  return n;
}

VectorXd SyntheticDataset::sample_weights() const {
  const auto counts = sample_counts();
  const double n = static_cast<double>(total_samples());
  VectorXd p(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i)
    p(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]) / n;
  return p;
}

SyntheticDataset generate_synthetic(double alpha, double beta, int m,
                                    int d_feat, int K, std::uint64_t seed) {
  require(m >= 1, "generate_synthetic: m must be >= 1");
  require(d_feat >= 1, "generate_synthetic: d_feat must be >= 1");
  require(K >= 2, "generate_synthetic: K must be >= 2");
  require(alpha >= 0 && beta >= 0, "generate_synthetic: alpha, beta must be >= 0");

  SyntheticDataset ds;
  ds.d_feat = d_feat;
  ds.K = K;
  ds.seed = seed;
  ds.alpha = alpha;
  ds.beta = beta;
  ds.clients.resize(static_cast<std::size_t>(m));

  Rng rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::lognormal_distribution<double> size_law(4.0, 2.0);

  VectorXd feature_sd(d_feat);
  for (int j = 0; j < d_feat; ++j)
    feature_sd(j) = std::sqrt(std::pow(static_cast<double>(j + 1), -1.2));

  std::vector<long> sizes(static_cast<std::size_t>(m));
  for (auto& n : sizes)
    n = std::max(10L, static_cast<long>(std::lround(size_law(rng))));

  for (int i = 0; i < m; ++i) {
    const double u = std::sqrt(alpha) * std_normal(rng);
    const double B = std::sqrt(beta) * std_normal(rng);

    MatrixXd W(K, d_feat);
    VectorXd b(K);
    for (Eigen::Index k = 0; k < W.size(); ++k) W.data()[k] = u + std_normal(rng);
    for (int k = 0; k < K; ++k) b(k) = u + std_normal(rng);
    VectorXd v(d_feat);
    for (int j = 0; j < d_feat; ++j) v(j) = B + std_normal(rng);

    auto& c = ds.clients[static_cast<std::size_t>(i)];
    const long n = sizes[static_cast<std::size_t>(i)];
    c.X.resize(n, d_feat);
    c.y.resize(static_cast<std::size_t>(n));
    for (long s = 0; s < n; ++s) {
      for (int j = 0; j < d_feat; ++j)
        c.X(s, j) = v(j) + feature_sd(j) * std_normal(rng);
      Eigen::Index label;
      (W * c.X.row(s).transpose() + b).maxCoeff(&label);
      c.y[static_cast<std::size_t>(s)] = static_cast<int>(label);
    }
  }
  return ds;
}

std::pair<ClientData, ClientData> split_client(const ClientData& c,
                                               double test_fraction) {
  require(test_fraction >= 0 && test_fraction < 1,
          "split_client: test_fraction must be in [0, 1)");
  const Eigen::Index n = c.X.rows();
  Eigen::Index n_test = static_cast<Eigen::Index>(std::floor(test_fraction * n));
  if (test_fraction > 0 && n >= 2) n_test = std::max<Eigen::Index>(n_test, 1);
  const Eigen::Index n_train = n - n_test;

  ClientData train{c.X.topRows(n_train),
                   std::vector<int>(c.y.begin(), c.y.begin() + n_train)};
  ClientData test{c.X.bottomRows(n_test),
                  std::vector<int>(c.y.begin() + n_train, c.y.end())};
  return {std::move(train), std::move(test)};
}

std::string synthetic_to_json(const SyntheticDataset& ds) {
  json j;
  j["d_feat"] = ds.d_feat;
  j["K"] = ds.K;
  j["seed"] = ds.seed;
  j["alpha"] = ds.alpha;
  j["beta"] = ds.beta;
  json clients = json::array();
  for (const auto& c : ds.clients) {
    json X = json::array();
    for (Eigen::Index s = 0; s < c.X.rows(); ++s) {
      std::vector<double> row(static_cast<std::size_t>(c.X.cols()));
      for (Eigen::Index k = 0; k < c.X.cols(); ++k)
        row[static_cast<std::size_t>(k)] = c.X(s, k);
      X.push_back(std::move(row));
    }
    clients.push_back({{"n", c.X.rows()}, {"X", std::move(X)}, {"y", c.y}});
  }
  j["clients"] = std::move(clients);
  return j.dump();
}

SyntheticDataset synthetic_from_json(const std::string& text) {
  SyntheticDataset ds;
  json j;
  try {
    j = json::parse(text);
    ds.d_feat = j.at("d_feat").get<int>();
    ds.K = j.at("K").get<int>();
    ds.seed = j.value("seed", std::uint64_t{0});
    ds.alpha = j.value("alpha", 0.0);
    ds.beta = j.value("beta", 0.0);
    for (const auto& jc : j.at("clients")) {
      ClientData c;
      const auto rows = jc.at("X").get<std::vector<std::vector<double>>>();
      const long n = jc.at("n").get<long>();
      require(static_cast<long>(rows.size()) == n,
              "dataset: client n does not match X rows");
      c.X.resize(n, ds.d_feat);
      for (long s = 0; s < n; ++s) {
        require(static_cast<int>(rows[static_cast<std::size_t>(s)].size()) == ds.d_feat,
                "dataset: feature row has wrong length");
        for (int k = 0; k < ds.d_feat; ++k)
          c.X(s, k) = rows[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
      }
      c.y = jc.at("y").get<std::vector<int>>();
      require(static_cast<long>(c.y.size()) == n, "dataset: label count mismatch");
      for (int label : c.y)
        require(label >= 0 && label < ds.K, "dataset: label out of range");
      ds.clients.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("dataset: malformed JSON: ") + e.what());
  }
  require(!ds.clients.empty(), "dataset: no clients");
  return ds;
}

void save_synthetic(const SyntheticDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << synthetic_to_json(ds);
  if (!out) throw Error("write failed: " + path);
}

SyntheticDataset load_synthetic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open dataset file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return synthetic_from_json(buf.str());
}

}  // namespace fednova
