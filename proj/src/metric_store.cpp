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

#include "burnseer/metric_store.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <nlohmann/json.hpp>

#include "burnseer/hash.hpp"

namespace burnseer {

using nlohmann::json;

std::string_view to_string(SampleKind kind) noexcept {
  return kind == SampleKind::Counter ? "counter" : "gauge";
}

std::string_view to_string(Aggregator agg) noexcept {
  switch (agg) {
    case Aggregator::Increase: return "increase";
    case Aggregator::MaxOverTime: return "max_over_time";
    case Aggregator::MinOverTime: return "min_over_time";
    case Aggregator::AvgOverTime: return "avg_over_time";
    case Aggregator::Last: return "last";
  }
  return "unknown";
}

namespace {

bool labels_match(const Labels& labels, const Labels& matchers) {
  for (const auto& [name, value] : matchers) {
    auto it = labels.find(name);
    if (it == labels.end() || it->second != value) return false;
  }
  return true;
}

// First sample with a counter value below its predecessor, or samples.end().
auto find_regression(const std::vector<Sample>& samples) {
  return std::adjacent_find(samples.begin(), samples.end(),
                            [](const Sample& a, const Sample& b) { return b.value < a.value; });
}

MetricSeries parse_series(const json& entry, std::size_t index) {
  auto fail = [index](const std::string& what) -> Error {
    return Error(Errc::MalformedDump, "series[" + std::to_string(index) + "]: " + what);
  };
  if (!entry.is_object()) throw fail("not an object");

  MetricSeries s;
  auto metric = entry.find("metric");
  if (metric == entry.end() || !metric->is_string() || metric->get<std::string>().empty()) {
    throw fail("missing or empty \"metric\"");
  }
  s.metric = metric->get<std::string>();

  auto labels = entry.find("labels");
  if (labels == entry.end() || !labels->is_object()) throw fail("missing \"labels\" object");
  for (const auto& [name, value] : labels->items()) {
    if (!value.is_string()) throw fail("label \"" + name + "\" is not a string");
    s.labels.emplace(name, value.get<std::string>());
  }
  if (!s.labels.contains("pod") || !s.labels.contains("node")) {
    throw fail("labels must include \"pod\" and \"node\"");
  }

  auto kind = entry.find("kind");
  if (kind == entry.end() || !kind->is_string()) throw fail("missing \"kind\"");
  if (*kind == "counter") {
    s.kind = SampleKind::Counter;
  } else if (*kind == "gauge") {
    s.kind = SampleKind::Gauge;
  } else {
    throw fail("kind must be \"counter\" or \"gauge\"");
  }

  auto samples = entry.find("samples");
  if (samples == entry.end() || !samples->is_array()) throw fail("missing \"samples\" array");
  s.samples.reserve(samples->size());
  for (const auto& pair : *samples) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
      throw fail("sample must be [t_seconds, value]");
    }
    double t = pair[0].get<double>();
    double v = pair[1].get<double>();
    if (!std::isfinite(t) || !std::isfinite(v) || v < 0.0) {
      throw fail("sample values must be finite and non-negative");
    }
    s.samples.push_back({to_ms(t), v});
  }
  std::stable_sort(s.samples.begin(), s.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.t < b.t; });
  auto dup = std::adjacent_find(s.samples.begin(), s.samples.end(),
                                [](const Sample& a, const Sample& b) { return a.t == b.t; });
  if (dup != s.samples.end()) {
    throw fail("duplicate timestamp " + std::to_string(dup->t) + " ms");
  }
  return s;
}

}  // namespace

std::vector<MetricSeries> parse_dump(const json& dump) {
  if (!dump.is_object()) throw Error(Errc::MalformedDump, "top level must be an object");
  auto series = dump.find("series");
  if (series == dump.end() || !series->is_array()) {
    throw Error(Errc::MalformedDump, "missing \"series\" array");
  }
  std::vector<MetricSeries> out;
  out.reserve(series->size());
  for (std::size_t i = 0; i < series->size(); ++i) out.push_back(parse_series((*series)[i], i));
  return out;
}

json to_dump(const std::vector<MetricSeries>& series) {
  json arr = json::array();
  for (const auto& s : series) {
    json samples = json::array();
    for (const auto& sample : s.samples) samples.push_back({to_seconds(sample.t), sample.value});
    arr.push_back({{"metric", s.metric},
                   {"labels", s.labels},
                   {"kind", to_string(s.kind)},
                   {"samples", std::move(samples)}});
  }
  return json{{"series", std::move(arr)}};
}

double aggregate(const MetricSeries& series, TimestampMs start, TimestampMs end, Aggregator agg) {
  if (agg == Aggregator::Increase && series.kind != SampleKind::Counter) {
    throw Error(Errc::KindMismatch, "increase on gauge series \"" + series.metric + "\"");
  }
  auto lo = std::lower_bound(series.samples.begin(), series.samples.end(), start,
                             [](const Sample& s, TimestampMs t) { return s.t < t; });
  auto hi = std::upper_bound(series.samples.begin(), series.samples.end(), end,
                             [](TimestampMs t, const Sample& s) { return t < s.t; });
  const auto n = std::distance(lo, hi);
  if (n <= 0 || (agg == Aggregator::Increase && n < 2)) {
    throw Error(Errc::EmptyWindow, "\"" + series.metric + "\" has " + std::to_string(std::max<long>(n, 0)) +
                                       " samples in [" + std::to_string(start) + ", " +
                                       std::to_string(end) + "] ms");
  }
  switch (agg) {
    case Aggregator::Increase:
      return std::prev(hi)->value - lo->value;
    case Aggregator::MaxOverTime:
      return std::max_element(lo, hi, [](const Sample& a, const Sample& b) {
               return a.value < b.value;
             })->value;
    case Aggregator::MinOverTime:
      return std::min_element(lo, hi, [](const Sample& a, const Sample& b) {
               return a.value < b.value;
             })->value;
    case Aggregator::AvgOverTime: {
      double sum = 0.0;
      for (auto it = lo; it != hi; ++it) sum += it->value;
      return sum / static_cast<double>(n);
    }
    case Aggregator::Last:
      return std::prev(hi)->value;
  }
  throw Error(Errc::InvalidQuery, "unknown aggregator");
}

MetricStore::MetricStore(const MetricStore& other) {
  std::shared_lock lock(other.mutex_);
  series_ = other.series_;
  rebuild_index();
}

MetricStore& MetricStore::operator=(const MetricStore& other) {
  if (this == &other) return *this;
  std::map<Key, MetricSeries> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.series_;
  }
  std::unique_lock lock(mutex_);
  series_ = std::move(copy);
  rebuild_index();
  return *this;
}

namespace {

std::string index_key(std::string_view metric, std::string_view name, std::string_view value) {
  std::string k;
  k.reserve(metric.size() + name.size() + value.size() + 2);
  k.append(metric).push_back('\x1f');
  k.append(name).push_back('\x1f');
  k.append(value);
  return k;
}

}  // namespace

void MetricStore::index(const MetricSeries& s) {
  for (const auto& [name, value] : s.labels) label_index_[index_key(s.metric, name, value)].push_back(&s);
}

void MetricStore::rebuild_index() {
  label_index_.clear();
  for (const auto& [key, s] : series_) index(s);
}

std::vector<const MetricSeries*> MetricStore::matching(std::string_view metric, const Labels& matchers) const {
  std::vector<const MetricSeries*> out;
  if (matchers.empty()) {
    for (auto it = series_.lower_bound(Key{std::string(metric), {}});
         it != series_.end() && it->first.first == metric; ++it) {
      out.push_back(&it->second);
    }
    return out;
  }
  // Start from the rarest matcher, then check the rest.
  const std::vector<const MetricSeries*>* best = nullptr;
  for (const auto& [name, value] : matchers) {
    auto it = label_index_.find(index_key(metric, name, value));
    if (it == label_index_.end()) return out;
    if (!best || it->second.size() < best->size()) best = &it->second;
  }
  for (const auto* s : *best) {
    if (labels_match(s->labels, matchers)) out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const MetricSeries* a, const MetricSeries* b) { return a->labels < b->labels; });
  return out;
}

IngestReport MetricStore::ingest(const json& dump) { return merge_all(parse_dump(dump)); }

IngestReport MetricStore::ingest_text(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(Errc::MalformedDump, "not valid JSON");
  return ingest(doc);
}

IngestReport MetricStore::ingest(std::vector<MetricSeries> series) {
  for (auto& s : series) {
    if (s.metric.empty() || !s.labels.contains("pod") || !s.labels.contains("node")) {
      throw Error(Errc::MalformedDump, "series \"" + s.metric + "\" lacks name or pod/node labels");
    }
    std::stable_sort(s.samples.begin(), s.samples.end(),
                     [](const Sample& a, const Sample& b) { return a.t < b.t; });
  }
  return merge_all(std::move(series));
}

IngestReport MetricStore::merge_all(std::vector<MetricSeries> batch) {
  IngestReport report;
  auto reject = [&report](const MetricSeries& s, Errc code, std::string detail) {
    report.rejected.push_back({s.metric, s.labels, code, std::move(detail)});
  };

  std::unique_lock lock(mutex_);
  for (auto& incoming : batch) {
    if (incoming.kind == SampleKind::Counter) {
      if (auto it = find_regression(incoming.samples); it != incoming.samples.end()) {
        reject(incoming, Errc::CounterRegression,
               "counter decreases after t=" + std::to_string(it->t) + " ms");
        continue;
      }
    }

    Key key{incoming.metric, incoming.labels};
    auto existing = series_.find(key);
    if (existing == series_.end()) {
      auto pos = series_.emplace(std::move(key), std::move(incoming)).first;
      index(pos->second);
      ++report.ingested;
      continue;
    }

    MetricSeries& current = existing->second;
    if (current.kind != incoming.kind) {
      reject(incoming, Errc::KindMismatch, "existing series has a different kind");
      continue;
    }
    std::vector<Sample> merged;
    merged.reserve(current.samples.size() + incoming.samples.size());
    std::merge(current.samples.begin(), current.samples.end(), incoming.samples.begin(),
               incoming.samples.end(), std::back_inserter(merged),
               [](const Sample& a, const Sample& b) { return a.t < b.t; });
    bool conflict = false;
    auto last = std::unique(merged.begin(), merged.end(), [&conflict](const Sample& a, const Sample& b) {
      if (a.t != b.t) return false;
      if (a.value != b.value) conflict = true;
      return true;
    });
    if (conflict) {
      reject(incoming, Errc::ConflictingSample, "timestamp already stored with a different value");
      continue;
    }
    merged.erase(last, merged.end());
    if (current.kind == SampleKind::Counter && find_regression(merged) != merged.end()) {
      reject(incoming, Errc::CounterRegression, "merged counter would decrease");
      continue;
    }
    current.samples = std::move(merged);
    ++report.ingested;
  }
  return report;
}

std::map<Labels, double> MetricStore::query_window(const WindowQuery& q) const {
  if (q.start > q.end) {
    throw Error(Errc::InvalidQuery, "window start " + std::to_string(q.start) + " > end " +
                                        std::to_string(q.end));
  }
  std::map<Labels, double> out;
  std::shared_lock lock(mutex_);
  for (const auto* s : matching(q.metric, q.matchers)) {
    out.emplace(s->labels, aggregate(*s, q.start, q.end, q.aggregator));
  }
  if (out.empty()) throw Error(Errc::NoMatchingSeries, "no series \"" + q.metric + "\" matches");
  return out;
}

std::vector<SeriesInfo> MetricStore::list_series(std::string_view prefix) const {
  std::vector<SeriesInfo> out;
  std::shared_lock lock(mutex_);
  for (const auto& [key, s] : series_) {
    if (!std::string_view(s.metric).starts_with(prefix)) continue;
    out.push_back({s.metric, s.labels, s.kind, s.samples.size()});
  }
  return out;
}

std::vector<MetricSeries> MetricStore::find(std::string_view metric, const Labels& matchers) const {
  std::vector<MetricSeries> out;
  std::shared_lock lock(mutex_);
  for (const auto* s : matching(metric, matchers)) out.push_back(*s);
  return out;
}

std::size_t MetricStore::series_count() const {
  std::shared_lock lock(mutex_);
  return series_.size();
}

std::string MetricStore::snapshot_id() const {
  Fnv1a h;
  std::shared_lock lock(mutex_);
  for (const auto& [key, s] : series_) {
    h.update(s.metric);
    for (const auto& [name, value] : s.labels) {
      h.update(name);
      h.update(value);
    }
    h.update_u64(static_cast<std::uint64_t>(s.kind));
    h.update_u64(s.samples.size());
    for (const auto& sample : s.samples) {
      h.update_u64(static_cast<std::uint64_t>(sample.t));
      h.update(sample.value);
    }
  }
  return h.hex();
}

json MetricStore::to_json() const {
  std::vector<MetricSeries> all;
  {
    std::shared_lock lock(mutex_);
    all.reserve(series_.size());
    for (const auto& [key, s] : series_) all.push_back(s);
  }
  return to_dump(all);
}

bool operator==(const MetricStore& a, const MetricStore& b) {
  if (&a == &b) return true;
  std::shared_lock la(a.mutex_, std::defer_lock);
  std::shared_lock lb(b.mutex_, std::defer_lock);
  std::lock(la, lb);
  return a.series_ == b.series_;
}

}  // namespace burnseer
