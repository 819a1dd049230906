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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "burnseer/metric_store.hpp"
#include "burnseer/run_registry.hpp"

namespace burnseer {

/// Linear resource law over the RunInputs fields.
struct Law {
  double intercept = 0.0;
  std::array<double, RunInputs::kFieldCount> coefficients{};

  double evaluate(const RunInputs& inputs) const;
};

/// Known resource laws behind a synthetic fleet.
struct GroundTruth {
  Law cpu_law;  // CPU-seconds
  Law mem_law;  // bytes
  double cpu_noise_sd = 0.0;
  double mem_noise_sd = 0.0;
  double fail_fraction = 0.0;
  std::uint64_t seed = 0;

  static GroundTruth defaults();
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct FleetSpec {
  std::size_t n_runs = 900;
  std::array<Range, RunInputs::kFieldCount> input_ranges{};
  double sample_period = 30.0;     // seconds between samples
  std::size_t nodes = 8;
  std::size_t ensemble_size = 10;  // runs per ensemble id
  TimestampMs base_start = 1'700'000'000'000;
  double start_spacing = 30.0;     // seconds between consecutive run starts
  Range runtime_factor{1.05, 1.5};  // runtime = sim_time * factor
  /// Makes wind_moisture a scaled copy of surface_moisture.
  bool collinear = false;

  static FleetSpec defaults();
};

/// Law value at the midpoint of every input range (its mean under uniform
/// independent sampling).
double law_mean(const Law& law, const FleetSpec& spec);

/// Throws InvalidSpec.
void validate(const GroundTruth& truth, const FleetSpec& spec);

struct TruthRow {
  RunId run_id;
  RunStatus status = RunStatus::Completed;
  double cpu_law_value = 0.0;  // noiseless
  double mem_law_value = 0.0;
  double cpu_total = 0.0;      // drawn, what the counters report
  double memory_peak = 0.0;
};

struct GeneratedRun {
  RunRecord record;
  std::vector<MetricSeries> series;
  TruthRow truth;
};

/// Draws one run. `index` fixes its ids, node and start time.
GeneratedRun generate_run(const GroundTruth& truth, const FleetSpec& spec, std::mt19937_64& rng,
                          std::size_t index);

struct Fleet {
  std::vector<RunRecord> runs;
  std::vector<MetricSeries> series;
  std::vector<TruthRow> truth;

  std::size_t count(RunStatus status) const;
  void load_into(MetricStore& store, RunRegistry& registry) const;
};

/// All runs from one stream seeded by truth.seed; a pure function of inputs.
Fleet generate_fleet(const GroundTruth& truth, const FleetSpec& spec);

void write_truth_csv(const std::vector<TruthRow>& rows, std::ostream& out);

}  // namespace burnseer
