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

#include "burnseer/run_registry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>

#include "burnseer/error.hpp"
#include "burnseer/hash.hpp"

namespace burnseer {

using nlohmann::json;

const std::array<std::string_view, RunInputs::kFieldCount>& RunInputs::field_names() {
  static const std::array<std::string_view, kFieldCount> names{
      "surface_moisture", "wind_moisture", "wind_direction",        "wind_speed",
      "sim_time",         "timestep",      "run_max_mem_rss_bytes", "area"};
  return names;
}

std::array<double, RunInputs::kFieldCount> RunInputs::values() const {
  return {surface_moisture, wind_moisture, wind_direction,        wind_speed,
          sim_time,         timestep,      run_max_mem_rss_bytes, area};
}

RunInputs RunInputs::from_values(const std::array<double, kFieldCount>& v) {
  return RunInputs{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

void RunInputs::validate() const {
  const auto v = values();
  const auto& names = field_names();
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (!std::isfinite(v[i])) throw Error(Errc::InvalidInputs, std::string(names[i]));
  }
  auto check = [](bool ok, std::string_view field) {
    if (!ok) throw Error(Errc::InvalidInputs, std::string(field));
  };
  check(surface_moisture >= 0.0 && surface_moisture <= 1.0, "surface_moisture");
  check(wind_moisture >= 0.0 && wind_moisture <= 1.0, "wind_moisture");
  check(wind_direction >= 0.0 && wind_direction < 360.0, "wind_direction");
  check(wind_speed >= 0.0, "wind_speed");
  check(sim_time > 0.0, "sim_time");
  check(timestep > 0.0, "timestep");
  check(run_max_mem_rss_bytes > 0.0, "run_max_mem_rss_bytes");
  check(area > 0.0, "area");
}

std::string_view to_string(RunStatus status) noexcept {
  switch (status) {
    case RunStatus::Pending: return "pending";
    case RunStatus::Running: return "running";
    case RunStatus::Completed: return "completed";
    case RunStatus::Failed: return "failed";
  }
  return "unknown";
}

RunStatus parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::Pending, RunStatus::Running, RunStatus::Completed, RunStatus::Failed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::MalformedManifest, "unknown status \"" + std::string(text) + "\"");
}

std::optional<double> RunRecord::runtime_seconds() const {
  if (!start || !stop) return std::nullopt;
  return to_seconds(*stop - *start);
}

void validate_record(const RunRecord& r) {
  auto fail = [&r](const std::string& what) {
    return Error(Errc::MalformedManifest, "run " + r.run_id + ": " + what);
  };
  if (r.run_id.empty()) throw Error(Errc::MalformedManifest, "empty run_id");
  r.inputs.validate();
  switch (r.status) {
    case RunStatus::Pending:
      if (r.start || r.stop) throw fail("pending run has timestamps");
      break;
    case RunStatus::Running:
      if (!r.start || r.stop) throw fail("running run needs start and no stop");
      break;
    case RunStatus::Completed:
      if (!r.start || !r.stop) throw fail("completed run needs start and stop");
      if (*r.stop <= *r.start) throw Error(Errc::NonMonotonicTimestamps, "run " + r.run_id);
      break;
    case RunStatus::Failed:
      if (r.start && r.stop) throw fail("failed run must have an NA start or stop");
      break;
  }
}

RunRegistry::RunRegistry(const RunRegistry& other) {
  std::shared_lock lock(other.mutex_);
  runs_ = other.runs_;
  next_seq_ = other.next_seq_;
}

RunRegistry& RunRegistry::operator=(const RunRegistry& other) {
  if (this == &other) return *this;
  std::map<RunId, RunRecord> runs;
  std::uint64_t seq;
  {
    std::shared_lock lock(other.mutex_);
    runs = other.runs_;
    seq = other.next_seq_;
  }
  std::unique_lock lock(mutex_);
  runs_ = std::move(runs);
  next_seq_ = seq;
  return *this;
}

RunId RunRegistry::next_id_locked() {
  for (;;) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run-%06llu", static_cast<unsigned long long>(next_seq_++));
    if (!runs_.contains(buf)) return buf;
  }
}

RunId RunRegistry::register_run(std::string ensemble_id, std::string pod, std::string node,
                                const RunInputs& inputs, std::optional<std::int64_t> threads) {
  inputs.validate();
  std::unique_lock lock(mutex_);
  for (const auto& [id, r] : runs_) {
    if (r.status == RunStatus::Running && r.pod == pod && r.node == node) {
      throw Error(Errc::DuplicateActiveRun, pod + "/" + node + " is running " + id);
    }
  }
  RunRecord rec;
  rec.run_id = next_id_locked();
  rec.ensemble_id = std::move(ensemble_id);
  rec.pod = std::move(pod);
  rec.node = std::move(node);
  rec.inputs = inputs;
  rec.threads = threads;
  rec.status = RunStatus::Pending;
  auto id = rec.run_id;
  runs_.emplace(id, std::move(rec));
  return id;
}

RunRecord RunRegistry::mark_started(const RunId& id, TimestampMs start) {
  std::unique_lock lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(Errc::UnknownRun, id);
  RunRecord& r = it->second;
  if (r.status != RunStatus::Pending) {
    throw Error(Errc::IllegalTransition, id + ": " + std::string(to_string(r.status)) + " -> running");
  }
  r.start = start;
  r.status = RunStatus::Running;
  return r;
}

RunRecord RunRegistry::mark_finished(const RunId& id, std::optional<TimestampMs> stop) {
  std::unique_lock lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(Errc::UnknownRun, id);
  RunRecord& r = it->second;
  if (r.status != RunStatus::Running) {
    throw Error(Errc::IllegalTransition, id + ": " + std::string(to_string(r.status)) + " -> finished");
  }
  if (stop && *stop <= *r.start) {
    throw Error(Errc::NonMonotonicTimestamps,
                id + ": stop " + std::to_string(*stop) + " <= start " + std::to_string(*r.start));
  }
  r.stop = stop;
  r.status = stop ? RunStatus::Completed : RunStatus::Failed;
  return r;
}

RunRecord RunRegistry::get(const RunId& id) const {
  std::shared_lock lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(Errc::UnknownRun, id);
  return it->second;
}

bool RunRegistry::contains(const RunId& id) const {
  std::shared_lock lock(mutex_);
  return runs_.contains(id);
}

std::vector<RunRecord> RunRegistry::list_runs(const StatusFilter& filter) const {
  std::vector<RunRecord> out;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, r] : runs_) {
      if (filter.contains(r.status)) out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.start.has_value() != b.start.has_value()) return a.start.has_value();
    if (a.start && *a.start != *b.start) return *a.start < *b.start;
    return a.run_id < b.run_id;
  });
  return out;
}

std::size_t RunRegistry::size() const {
  std::shared_lock lock(mutex_);
  return runs_.size();
}

void RunRegistry::import_records(const std::vector<RunRecord>& records) {
  for (const auto& r : records) validate_record(r);
  std::unique_lock lock(mutex_);
  std::set<RunId> seen;
  for (const auto& r : records) {
    if (runs_.contains(r.run_id) || !seen.insert(r.run_id).second) {
      throw Error(Errc::MalformedManifest, "duplicate run_id " + r.run_id);
    }
  }
  for (const auto& r : records) runs_.emplace(r.run_id, r);
}

std::string RunRegistry::snapshot_id() const {
  Fnv1a h;
  std::shared_lock lock(mutex_);
  for (const auto& [id, r] : runs_) {
    h.update(r.run_id);
    h.update(r.ensemble_id);
    h.update(r.pod);
    h.update(r.node);
    for (double v : r.inputs.values()) h.update(v);
    h.update_u64(r.start ? static_cast<std::uint64_t>(*r.start) : ~0ULL);
    h.update_u64(r.stop ? static_cast<std::uint64_t>(*r.stop) : ~0ULL);
    h.update_u64(r.threads ? static_cast<std::uint64_t>(*r.threads) : ~0ULL);
    h.update_u64(static_cast<std::uint64_t>(r.status));
  }
  return h.hex();
}

namespace {

json optional_seconds(const std::optional<TimestampMs>& t) {
  return t ? json(to_seconds(*t)) : json(nullptr);
}

std::optional<TimestampMs> read_timestamp(const json& j, const char* key, const std::string& id) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number() || !std::isfinite(it->get<double>())) {
    throw Error(Errc::MalformedManifest, "run " + id + ": \"" + key + "\" must be a number or null");
  }
  return to_ms(it->get<double>());
}

}  // namespace

json to_json(const RunRecord& r) {
  json inputs = json::object();
  const auto values = r.inputs.values();
  for (std::size_t i = 0; i < RunInputs::kFieldCount; ++i) {
    inputs[std::string(RunInputs::field_names()[i])] = values[i];
  }
  return json{{"run_id", r.run_id},
              {"ensemble_id", r.ensemble_id},
              {"pod", r.pod},
              {"node", r.node},
              {"inputs", std::move(inputs)},
              {"start", optional_seconds(r.start)},
              {"stop", optional_seconds(r.stop)},
              {"threads", r.threads ? json(*r.threads) : json(nullptr)},
              {"status", to_string(r.status)}};
}

RunRecord run_record_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::MalformedManifest, "record must be an object");
  auto str = [&j](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw Error(Errc::MalformedManifest, std::string("missing string field \"") + key + "\"");
    }
    return it->get<std::string>();
  };
  RunRecord r;
  r.run_id = str("run_id");
  r.ensemble_id = str("ensemble_id");
  r.pod = str("pod");
  r.node = str("node");

  auto inputs = j.find("inputs");
  if (inputs == j.end() || !inputs->is_object()) {
    throw Error(Errc::MalformedManifest, "run " + r.run_id + ": missing \"inputs\"");
  }
  std::array<double, RunInputs::kFieldCount> values{};
  for (std::size_t i = 0; i < RunInputs::kFieldCount; ++i) {
    const std::string name(RunInputs::field_names()[i]);
    auto f = inputs->find(name);
    if (f == inputs->end() || !f->is_number()) {
      throw Error(Errc::MalformedManifest, "run " + r.run_id + ": input \"" + name + "\" missing");
    }
    values[i] = f->get<double>();
  }
  r.inputs = RunInputs::from_values(values);
  r.start = read_timestamp(j, "start", r.run_id);
  r.stop = read_timestamp(j, "stop", r.run_id);

  if (auto t = j.find("threads"); t != j.end() && !t->is_null()) {
    if (!t->is_number_integer()) {
      throw Error(Errc::MalformedManifest, "run " + r.run_id + ": threads must be an integer");
    }
    r.threads = t->get<std::int64_t>();
  }

  if (auto s = j.find("status"); s != j.end() && !s->is_null()) {
    if (!s->is_string()) throw Error(Errc::MalformedManifest, "run " + r.run_id + ": bad status");
    r.status = parse_run_status(s->get<std::string>());
  } else {
    // Terminated runs with an NA timestamp are failures.
    r.status = (r.start && r.stop) ? RunStatus::Completed : RunStatus::Failed;
  }
  return r;
}

json to_manifest(const std::vector<RunRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return arr;
}

std::vector<RunRecord> parse_manifest(const json& doc) {
  if (!doc.is_array()) throw Error(Errc::MalformedManifest, "manifest must be a JSON array");
  std::vector<RunRecord> out;
  out.reserve(doc.size());
  for (const auto& j : doc) out.push_back(run_record_from_json(j));
  return out;
}

}  // namespace burnseer
