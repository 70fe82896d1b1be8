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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "fednova/harness.hpp"

namespace fednova {

using nlohmann::json;

namespace {

constexpr const char* kHeader =
    "round,global_loss,grad_norm_sq,surrogate_grad_norm_sq,dist_to_opt,chi2,tau_eff,tau_bar";

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json real_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double real_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

bool same_real(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

bool RoundMetrics::operator==(const RoundMetrics& o) const {
  const bool acc = test_accuracy.has_value() == o.test_accuracy.has_value() &&
                   (!test_accuracy || same_real(*test_accuracy, *o.test_accuracy));
  return round == o.round && same_real(global_loss, o.global_loss) &&
         same_real(grad_norm_sq, o.grad_norm_sq) &&
         same_real(surrogate_grad_norm_sq, o.surrogate_grad_norm_sq) &&
         same_real(dist_to_opt, o.dist_to_opt) && same_real(chi2, o.chi2) &&
         same_real(tau_eff, o.tau_eff) && same_real(tau_bar, o.tau_bar) && acc;
}

MetricsFormat metrics_format_from_string(const std::string& name) {
  if (name == "csv") return MetricsFormat::kCsv;
  if (name == "jsonl") return MetricsFormat::kJsonl;
  throw InvalidArgument("unknown metrics format '" + name + "'");
}

void write_metrics(std::ostream& out, const std::vector<RoundMetrics>& metrics,
                   MetricsFormat format, const std::string& failure) {
  // Held-out accuracy is only known for dataset objectives.
  bool with_accuracy = false;
  for (const auto& r : metrics) with_accuracy = with_accuracy || r.test_accuracy.has_value();

  if (format == MetricsFormat::kCsv) {
    out << kHeader << (with_accuracy ? ",test_accuracy" : "") << '\n';
    for (const auto& r : metrics) {
      out << r.round << ',' << format_real(r.global_loss) << ',' << format_real(r.grad_norm_sq)
          << ',' << format_real(r.surrogate_grad_norm_sq) << ',' << format_real(r.dist_to_opt)
          << ',' << format_real(r.chi2) << ',' << format_real(r.tau_eff) << ','
          << format_real(r.tau_bar);
      if (with_accuracy)
        out << ',' << format_real(r.test_accuracy.value_or(std::nan("")));
      out << '\n';
    }
    if (!failure.empty()) out << "# " << failure << '\n';
    return;
  }

  for (const auto& r : metrics) {
    json j;
    j["round"] = r.round;
    j["global_loss"] = real_to_json(r.global_loss);
    j["grad_norm_sq"] = real_to_json(r.grad_norm_sq);
    j["surrogate_grad_norm_sq"] = real_to_json(r.surrogate_grad_norm_sq);
    j["dist_to_opt"] = real_to_json(r.dist_to_opt);
    j["chi2"] = real_to_json(r.chi2);
    j["tau_eff"] = real_to_json(r.tau_eff);
    j["tau_bar"] = real_to_json(r.tau_bar);
    if (r.test_accuracy) j["test_accuracy"] = real_to_json(*r.test_accuracy);
    out << j.dump() << '\n';
  }
  if (!failure.empty()) out << json{{"status", "diverged"}, {"message", failure}}.dump() << '\n';
}

void emit_metrics(const std::vector<RoundMetrics>& metrics, const std::string& path,
                  MetricsFormat format, const std::string& failure) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_metrics(out, metrics, format, failure);
  out.flush();
  if (!out) throw Error("write failed: " + path);
}

std::vector<RoundMetrics> parse_metrics_jsonl(std::istream& in) {
  std::vector<RoundMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.contains("status")) continue;
    RoundMetrics r;
    r.round = j.at("round").get<int>();
    r.global_loss = real_from_json(j.at("global_loss"));
    r.grad_norm_sq = real_from_json(j.at("grad_norm_sq"));
    r.surrogate_grad_norm_sq = real_from_json(j.at("surrogate_grad_norm_sq"));
    r.dist_to_opt = real_from_json(j.at("dist_to_opt"));
    r.chi2 = real_from_json(j.at("chi2"));
    r.tau_eff = real_from_json(j.at("tau_eff"));
    r.tau_bar = real_from_json(j.at("tau_bar"));
    if (j.contains("test_accuracy")) r.test_accuracy = real_from_json(j.at("test_accuracy"));
    out.push_back(r);
  }
  return out;
}

}  // namespace fednova
