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
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "burnseer/time.hpp"

namespace burnseer {

/// Per-run simulation inputs.
struct RunInputs {
  double surface_moisture = 0.0;       // fraction [0,1]
  double wind_moisture = 0.0;          // fraction [0,1]
  double wind_direction = 0.0;         // degrees [0,360)
  double wind_speed = 0.0;             // m/s >= 0
  double sim_time = 1.0;               // s > 0, estimated minimum runtime
  double timestep = 1.0;               // s > 0
  double run_max_mem_rss_bytes = 1.0;  // > 0
  double area = 1.0;                   // m^2 > 0

  static constexpr std::size_t kFieldCount = 8;
  static const std::array<std::string_view, kFieldCount>& field_names();

  std::array<double, kFieldCount> values() const;
  static RunInputs from_values(const std::array<double, kFieldCount>& v);

  /// Throws InvalidInputs naming the first out-of-range field.
  void validate() const;

  friend bool operator==(const RunInputs&, const RunInputs&) = default;
};

enum class RunStatus { Pending, Running, Completed, Failed };

std::string_view to_string(RunStatus status) noexcept;
RunStatus parse_run_status(std::string_view text);

using RunId = std::string;

struct RunRecord {
  RunId run_id;
  std::string ensemble_id;
  std::string pod;
  std::string node;
  RunInputs inputs;
  std::optional<TimestampMs> start;
  std::optional<TimestampMs> stop;
  std::optional<std::int64_t> threads;
  RunStatus status = RunStatus::Pending;

  /// stop - start in seconds, when both are present.
  std::optional<double> runtime_seconds() const;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using StatusFilter = std::set<RunStatus>;

inline const StatusFilter kAllStatuses{RunStatus::Pending, RunStatus::Running,
                                       RunStatus::Completed, RunStatus::Failed};

/// Authoritative record of runs. Failed runs are kept; consumers decide what
/// to exclude.
class RunRegistry {
 public:
  RunRegistry() = default;
  RunRegistry(const RunRegistry& other);
  RunRegistry& operator=(const RunRegistry& other);

  RunId register_run(std::string ensemble_id, std::string pod, std::string node,
                     const RunInputs& inputs, std::optional<std::int64_t> threads = std::nullopt);

  RunRecord mark_started(const RunId& id, TimestampMs start);
  /// An absent stop marks the run Failed.
  RunRecord mark_finished(const RunId& id, std::optional<TimestampMs> stop);

  RunRecord get(const RunId& id) const;
  bool contains(const RunId& id) const;

  /// Ordered by (start, run_id); runs without a start sort last.
  std::vector<RunRecord> list_runs(const StatusFilter& filter = kAllStatuses) const;

  std::size_t size() const;

  /// Loads records verbatim (bulk import). Each record must satisfy the
  /// status/timestamp invariants; duplicate ids are rejected.
  void import_records(const std::vector<RunRecord>& records);

  std::string snapshot_id() const;

 private:
  RunId next_id_locked();

  mutable std::shared_mutex mutex_;
  std::map<RunId, RunRecord> runs_;
  std::uint64_t next_seq_ = 1;
};

/// Validates the status/timestamp invariants of a standalone record.
void validate_record(const RunRecord& r);

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Run manifest: a JSON array of records, null for NA timestamps.
nlohmann::json to_manifest(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_manifest(const nlohmann::json& doc);

}  // namespace burnseer
