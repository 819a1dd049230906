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

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "burnseer/metric_store.hpp"
#include "burnseer/run_registry.hpp"

namespace burnseer {

inline constexpr std::string_view kCpuTarget = "cpu_usage_total";
inline constexpr std::string_view kMemoryTarget = "memory_usage_peak";

/// Telemetry lands on the metrics backend with a delay; no refresh offset
/// (and no prediction) is allowed before this many seconds into a run.
inline constexpr double kWarmupSeconds = 45.0;

/// One per-run metric column. Queried entries read a store series;
/// derived entries divide a usage column by a quota column.
struct CatalogEntry {
  std::string_view column;
  enum class Source { Query, Derived } source;
  // Query
  std::string_view metric{};
  Aggregator aggregator = Aggregator::Last;
  SampleKind kind = SampleKind::Gauge;
  // Derived: numerator / (denominator [* window seconds])
  std::string_view numerator{};
  std::string_view denominator{};
  bool per_second = false;
};

/// Catalog in table order: CPU quota, memory quota, network, storage IO.
const std::vector<CatalogEntry>& metric_catalog();
const CatalogEntry* find_catalog_entry(std::string_view column);
/// Index of a column in metric_catalog(); SchemaMismatch if absent.
std::size_t catalog_position(std::string_view column);

/// Refresh offsets t_k in seconds from run start, k = 1..K.
class RefreshSchedule {
 public:
  RefreshSchedule() = default;
  /// Throws InvalidSchedule unless strictly increasing, finite and t_1 >= 45.
  explicit RefreshSchedule(std::vector<double> offsets);

  /// "45,300" -> {45, 300}. Empty text is an empty schedule.
  static RefreshSchedule parse(std::string_view text);

  const std::vector<double>& offsets() const { return offsets_; }
  std::size_t size() const { return offsets_.size(); }
  bool empty() const { return offsets_.empty(); }
  /// Offset for 1-based refresh index k.
  double offset(int k) const { return offsets_.at(static_cast<std::size_t>(k - 1)); }
  std::string to_string() const;

  friend bool operator==(const RefreshSchedule&, const RefreshSchedule&) = default;

 private:
  std::vector<double> offsets_;
};

// Column-name grammar.
enum class ColumnKind { RunId, Input, Runtime, Full, Duration, Partial, Ratio, Target };

struct ColumnSpec {
  ColumnKind kind;
  std::string base;  // catalog column, input field, or target name
  int k = 0;         // refresh index for Duration / Partial / Ratio

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Throws SchemaMismatch for names outside the grammar.
ColumnSpec parse_column(std::string_view name);
std::optional<ColumnSpec> try_parse_column(std::string_view name);

std::string partial_column(std::string_view base, int k);
std::string ratio_column(std::string_view base, int k);
std::string duration_column(int k);

/// True when the column's value is known before the run ends: inputs and
/// partial-window columns.
bool computable_mid_run(const ColumnSpec& spec);

/// Numeric columns (run_id excluded) for a schedule, in dataset order.
std::vector<std::string> dataset_schema(const RefreshSchedule& schedule);

inline bool is_absent(double v) { return v != v; }
inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

struct FeatureRow {
  RunId run_id;
  std::vector<std::string> columns;
  Eigen::VectorXd values;  // NaN marks an absent cell

  /// Cell value (NaN when absent); SchemaMismatch for unknown columns.
  double at(std::string_view column) const;
};

struct Provenance {
  std::string registry_snapshot;
  std::string store_snapshot;
  RefreshSchedule schedule;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Rectangular table, one row per completed run. Absent cells are NaN.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<RunId> run_ids;
  Eigen::MatrixXd values;
  Provenance provenance;

  Eigen::Index rows() const { return values.rows(); }
  std::optional<Eigen::Index> index_of(std::string_view column) const;
  /// SchemaMismatch for unknown columns.
  Eigen::Index require(std::string_view column) const;
  auto column(std::string_view name) const { return values.col(require(name)); }

  /// Cell-wise equality treating absent == absent.
  friend bool operator==(const Dataset& a, const Dataset& b);
};

/// Base-column values (every catalog entry) aggregated over [start, end].
/// When `partial`, per-metric empty windows become absent cells; otherwise
/// they are MissingMetric errors.
std::vector<double> window_columns(const MetricStore& store, const RunRecord& run,
                                   TimestampMs start, TimestampMs end, bool partial);

struct BuildReport {
  std::size_t total_runs = 0;
  std::size_t rows = 0;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// Joins the registry and the metric store into the tabular dataset.
class DatasetBuilder {
 public:
  DatasetBuilder(const MetricStore& store, const RunRegistry& registry)
      : store_(store), registry_(registry) {}

  /// Full-window columns use [start, stop]; partial columns `<c>_t<k>` use
  /// [start, start + t_k]. Offsets at or past the runtime leave that k's
  /// partial cells absent and add a ScheduleExceedsRuntime warning.
  FeatureRow build_row(const RunRecord& run, const RefreshSchedule& schedule,
                       std::vector<std::string>* warnings = nullptr) const;

  /// One row per Completed run (in `filter`), ordered by start time.
  Dataset build_dataset(const RefreshSchedule& schedule,
                        const StatusFilter& filter = {RunStatus::Completed},
                        BuildReport* report = nullptr) const;

 private:
  const MetricStore& store_;
  const RunRegistry& registry_;
};

/// Returns bytes written. Rows are identical for identical datasets.
std::size_t write_csv(const Dataset& ds, std::ostream& out);
Dataset read_csv(std::istream& in);

void write_csv_file(const Dataset& ds, const std::string& path);
Dataset read_csv_file(const std::string& path);

}  // namespace burnseer
