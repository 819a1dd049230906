// Copyright 2026 The BurnSeer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>

#include "burnseer/error.hpp"
#include "burnseer/hash.hpp"

namespace burnseer {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedDump: return "MalformedDump";
    case Errc::CounterRegression: return "CounterRegression";
    case Errc::ConflictingSample: return "ConflictingSample";
    case Errc::NoMatchingSeries: return "NoMatchingSeries";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::InvalidQuery: return "InvalidQuery";
    case Errc::InvalidInputs: return "InvalidInputs";
    case Errc::DuplicateActiveRun: return "DuplicateActiveRun";
    case Errc::UnknownRun: return "UnknownRun";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::MalformedManifest: return "MalformedManifest";
    case Errc::RunNotCompleted: return "RunNotCompleted";
    case Errc::MissingMetric: return "MissingMetric";
    case Errc::InvalidSchedule: return "InvalidSchedule";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::MalformedCell: return "MalformedCell";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InsufficientPairs: return "InsufficientPairs";
    case Errc::InsufficientRows: return "InsufficientRows";
    case Errc::TargetMissing: return "TargetMissing";
    case Errc::NoFeaturesSelected: return "NoFeaturesSelected";
    case Errc::Underdetermined: return "Underdetermined";
    case Errc::DegenerateDesign: return "DegenerateDesign";
    case Errc::MissingFeature: return "MissingFeature";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidSplit: return "InvalidSplit";
    case Errc::MalformedModel: return "MalformedModel";
    case Errc::RunNotRunning: return "RunNotRunning";
    case Errc::ModelScheduleMismatch: return "ModelScheduleMismatch";
    case Errc::PredictionNotReady: return "PredictionNotReady";
    case Errc::StaleRequest: return "StaleRequest";
    case Errc::InvalidPolicy: return "InvalidPolicy";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnknownCommand: return "UnknownCommand";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::PortInUse: return "PortInUse";
    case Errc::ModelUnavailable: return "ModelUnavailable";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

}  // namespace burnseer
