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

#include "fednova/solvers.hpp"

namespace fednova {

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kVanilla: return "vanilla";
    case SolverKind::kProximal: return "proximal";
    case SolverKind::kDecayedLr: return "decayed_lr";
    case SolverKind::kMomentum: return "momentum";
    case SolverKind::kVrMomentum: return "vr_momentum";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "vanilla") return SolverKind::kVanilla;
  if (name == "proximal") return SolverKind::kProximal;
  if (name == "decayed_lr") return SolverKind::kDecayedLr;
  if (name == "momentum") return SolverKind::kMomentum;
  if (name == "vr_momentum") return SolverKind::kVrMomentum;
  throw InvalidArgument("unknown solver '" + name + "'");
}

}  // namespace fednova
