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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace burnseer {

/// Machine-readable failure codes. The enumerator names are the wire names
/// used by the CLI and the HTTP service.
enum class Errc {
  // metric store
  MalformedDump,
  CounterRegression,
  ConflictingSample,
  NoMatchingSeries,
  EmptyWindow,
  KindMismatch,
  InvalidQuery,
  // run registry
  InvalidInputs,
  DuplicateActiveRun,
  UnknownRun,
  IllegalTransition,
  NonMonotonicTimestamps,
  MalformedManifest,
  // dataset builder
  RunNotCompleted,
  MissingMetric,
  InvalidSchedule,
  EmptyDataset,
  SchemaMismatch,
  MalformedCell,
  // analysis
  LengthMismatch,
  InsufficientPairs,
  InsufficientRows,
  TargetMissing,
  NoFeaturesSelected,
  Underdetermined,
  DegenerateDesign,
  MissingFeature,
  ZeroVariance,
  InvalidSplit,
  MalformedModel,
  // predictor
  RunNotRunning,
  ModelScheduleMismatch,
  PredictionNotReady,
  StaleRequest,
  InvalidPolicy,
  // simulator
  InvalidSpec,
  // cli / service
  UnknownCommand,
  InvalidConfig,
  PortInUse,
  ModelUnavailable,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace burnseer
