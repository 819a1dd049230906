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

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "burnseer/analysis.hpp"
#include "burnseer/metric_store.hpp"
#include "burnseer/run_registry.hpp"

namespace burnseer {

enum class RefreshMode { Interval, Manual, Hybrid };

std::string_view to_string(RefreshMode mode) noexcept;
RefreshMode parse_refresh_mode(std::string_view text);

struct RefreshPolicy {
  RefreshMode mode = RefreshMode::Manual;
  double interval_seconds = 300.0;
  double warmup_seconds = 45.0;

  /// Throws InvalidPolicy.
  void validate() const;
};

enum class TrackerPhase { Untracked, WarmingUp, Active, Closed };
std::string_view to_string(TrackerPhase phase) noexcept;

/// What produced a record: the automatic post-warm-up refresh, an interval
/// slot, a user request, or the observed totals of a finished run.
enum class RecordOrigin { Warmup, Interval, Manual, Actual };
std::string_view to_string(RecordOrigin origin) noexcept;

struct PredictionRecord {
  RunId run_id;
  double refresh_time = 0.0;       // seconds since run start
  double cpu_feature_offset = 0.0;  // schedule offset the CPU features were taken at
  double mem_feature_offset = 0.0;
  double predicted_cpu_total = 0.0;    // CPU-seconds
  double predicted_memory_peak = 0.0;  // bytes
  std::string cpu_model_version;
  std::string mem_model_version;
  bool cpu_clamped = false;
  bool mem_clamped = false;
  TimestampMs issued_at = 0;
  RecordOrigin origin = RecordOrigin::Manual;
  bool actual = false;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

struct TrackerState {
  RunId run_id;
  RefreshPolicy policy;
  TrackerPhase phase = TrackerPhase::Untracked;
  std::vector<PredictionRecord> history;
};

/// Refresh requested inside the warm-up (or before any model's features are
/// computable).
class PredictionNotReady : public Error {
 public:
  explicit PredictionNotReady(double remaining_seconds);
  double remaining_seconds() const noexcept { return remaining_; }

 private:
  double remaining_;
};

/// Offset (seconds) of the latest refresh window a model's features read;
/// 0 for a model over inputs only. ModelScheduleMismatch when a feature is
/// not computable mid-run.
double required_offset(const LinearModel& model);

/// Observed totals over [start, min(now, stop)].
struct LiveMetrics {
  double elapsed_seconds = 0.0;
  std::optional<double> cpu_so_far;
  std::optional<double> memory_peak_so_far;
};
LiveMetrics live_metrics(const MetricStore& store, const RunRecord& run, TimestampMs now);

/// Per-run prediction trackers. All time comes in through `now`; there is
/// no ambient clock.
class Predictor {
 public:
  Predictor(const MetricStore& store, const RunRegistry& registry) : store_(store), registry_(registry) {}

  TrackerState start_tracking(const RunId& run_id, const RefreshPolicy& policy,
                              const LinearModel& cpu_model, const LinearModel& mem_model);
  /// Several models per target: each refresh uses the one whose features
  /// reach furthest without passing the elapsed time.
  TrackerState start_tracking(const RunId& run_id, const RefreshPolicy& policy,
                              std::vector<LinearModel> cpu_models, std::vector<LinearModel> mem_models);

  PredictionRecord request_refresh(const RunId& run_id, TimestampMs now);
  std::optional<PredictionRecord> tick(const RunId& run_id, TimestampMs now);

  TrackerState state(const RunId& run_id) const;
  bool is_tracked(const RunId& run_id) const;
  std::vector<RunId> tracked_runs() const;

 private:
  struct Tracker {
    std::mutex mutex;
    TrackerState state;
    std::vector<LinearModel> cpu_models;
    std::vector<LinearModel> mem_models;
    double last_auto_slot = -1.0;
  };

  Tracker& tracker(const RunId& run_id) const;
  bool closed_at(const RunRecord& run, TimestampMs now) const;
  PredictionRecord evaluate(Tracker& t, const RunRecord& run, double refresh_time, TimestampMs now,
                            RecordOrigin origin) const;
  PredictionRecord actuals(const RunRecord& run, TimestampMs now) const;

  const MetricStore& store_;
  const RunRegistry& registry_;
  mutable std::shared_mutex mutex_;
  std::map<RunId, std::unique_ptr<Tracker>> trackers_;
};

nlohmann::json to_json(const PredictionRecord& r);
nlohmann::json to_json(const TrackerState& s);
nlohmann::json to_json(const RefreshPolicy& p);
RefreshPolicy refresh_policy_from_json(const nlohmann::json& j, const RefreshPolicy& defaults = {});

}  // namespace burnseer
