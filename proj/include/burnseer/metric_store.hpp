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
#include <map>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "burnseer/error.hpp"
#include "burnseer/time.hpp"

namespace burnseer {

enum class SampleKind { Counter, Gauge };

enum class Aggregator { Increase, MaxOverTime, MinOverTime, AvgOverTime, Last };

std::string_view to_string(SampleKind kind) noexcept;
std::string_view to_string(Aggregator agg) noexcept;

using Labels = std::map<std::string, std::string>;

struct Sample {
  TimestampMs t;
  double value;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Every series carries at least the "pod" and "node" labels. Samples are
/// strictly increasing in time; counter values never decrease.
struct MetricSeries {
  std::string metric;
  Labels labels;
  SampleKind kind = SampleKind::Gauge;
  std::vector<Sample> samples;

  friend bool operator==(const MetricSeries&, const MetricSeries&) = default;
};

struct WindowQuery {
  std::string metric;
  Labels matchers;  // exact match
  TimestampMs start = 0;
  TimestampMs end = 0;
  Aggregator aggregator = Aggregator::Last;
};

struct SeriesInfo {
  std::string metric;
  Labels labels;
  SampleKind kind;
  std::size_t sample_count;
};

struct IngestReport {
  std::size_t ingested = 0;
  struct Rejection {
    std::string metric;
    Labels labels;
    Errc code;
    std::string detail;
  };
  std::vector<Rejection> rejected;
};

/// Evaluates one aggregator over the samples of a single series, using only
/// samples with start <= t <= end. Throws EmptyWindow / KindMismatch.
double aggregate(const MetricSeries& series, TimestampMs start, TimestampMs end,
                 Aggregator agg);

/// In-memory time-series store. Any number of concurrent readers, one writer;
/// a reader never observes a partially merged series.
class MetricStore {
 public:
  MetricStore() = default;
  MetricStore(const MetricStore& other);
  MetricStore& operator=(const MetricStore& other);

  /// Parses and ingests a JSON metric dump. The document is validated as a
  /// whole before anything is stored (MalformedDump); counter regressions and
  /// timestamp conflicts reject only the offending series.
  IngestReport ingest(const nlohmann::json& dump);
  IngestReport ingest_text(std::string_view json_text);

  /// Ingests already-typed series (used by the simulator and tests).
  IngestReport ingest(std::vector<MetricSeries> series);

  /// One value per matching series, keyed by its full label set.
  std::map<Labels, double> query_window(const WindowQuery& q) const;

  std::vector<SeriesInfo> list_series(std::string_view metric_name_prefix = {}) const;

  /// Copies of every series matching the metric name and label matchers.
  std::vector<MetricSeries> find(std::string_view metric, const Labels& matchers) const;

  std::size_t series_count() const;

  /// Content hash of the store state; equal stores have equal ids.
  std::string snapshot_id() const;

  /// Serializes the whole store in the dump format.
  nlohmann::json to_json() const;

  friend bool operator==(const MetricStore& a, const MetricStore& b);

 private:
  using Key = std::pair<std::string, Labels>;

  IngestReport merge_all(std::vector<MetricSeries> batch);
  void index(const MetricSeries& s);
  void rebuild_index();
  /// Series of `metric` carrying every matcher label. Caller holds the lock.
  std::vector<const MetricSeries*> matching(std::string_view metric, const Labels& matchers) const;

  mutable std::shared_mutex mutex_;
  std::map<Key, MetricSeries> series_;
  // "metric\x1fname\x1fvalue" -> series with that label; map nodes never move.
  std::unordered_map<std::string, std::vector<const MetricSeries*>> label_index_;
};

/// Parses one dump document into typed series without storing anything.
std::vector<MetricSeries> parse_dump(const nlohmann::json& dump);
nlohmann::json to_dump(const std::vector<MetricSeries>& series);

}  // namespace burnseer
