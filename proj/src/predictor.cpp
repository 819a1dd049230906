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

#include "burnseer/predictor.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "numfmt.hpp"

namespace burnseer {

using nlohmann::json;

std::string_view to_string(RefreshMode mode) noexcept {
  switch (mode) {
    case RefreshMode::Interval: return "interval";
    case RefreshMode::Manual: return "manual";
    case RefreshMode::Hybrid: return "hybrid";
  }
  return "unknown";
}

RefreshMode parse_refresh_mode(std::string_view text) {
  for (auto m : {RefreshMode::Interval, RefreshMode::Manual, RefreshMode::Hybrid}) {
    if (to_string(m) == text) return m;
  }
  throw Error(Errc::InvalidPolicy, "unknown mode \"" + std::string(text) + "\"");
}

std::string_view to_string(TrackerPhase phase) noexcept {
  switch (phase) {
    case TrackerPhase::Untracked: return "untracked";
    case TrackerPhase::WarmingUp: return "warming_up";
    case TrackerPhase::Active: return "active";
    case TrackerPhase::Closed: return "closed";
  }
  return "unknown";
}

std::string_view to_string(RecordOrigin origin) noexcept {
  switch (origin) {
    case RecordOrigin::Warmup: return "warmup";
    case RecordOrigin::Interval: return "interval";
    case RecordOrigin::Manual: return "manual";
    case RecordOrigin::Actual: return "actual";
  }
  return "unknown";
}

void RefreshPolicy::validate() const {
  if (!(interval_seconds > 0.0) || !std::isfinite(interval_seconds)) {
    throw Error(Errc::InvalidPolicy, "interval_seconds must be > 0");
  }
  if (!(warmup_seconds > 0.0) || !std::isfinite(warmup_seconds)) {
    throw Error(Errc::InvalidPolicy, "warmup_seconds must be > 0");
  }
}

PredictionNotReady::PredictionNotReady(double remaining_seconds)
    : Error(Errc::PredictionNotReady, detail::format_double(remaining_seconds) + " s remaining"),
      remaining_(remaining_seconds) {}

double required_offset(const LinearModel& model) {
  double offset = 0.0;
  for (const auto& f : model.features) {
    auto spec = try_parse_column(f);
    if (!spec || !computable_mid_run(*spec)) {
      throw Error(Errc::ModelScheduleMismatch,
                  "model " + model.version + " uses \"" + f + "\", unknown until the run ends");
    }
    if (spec->kind == ColumnKind::Input) continue;
    if (spec->k > static_cast<int>(model.schedule.size())) {
      throw Error(Errc::ModelScheduleMismatch,
                  "feature \"" + f + "\" has no offset in the model's schedule");
    }
    offset = std::max(offset, model.schedule.offset(spec->k));
  }
  return offset;
}

LiveMetrics live_metrics(const MetricStore& store, const RunRecord& run, TimestampMs now) {
  LiveMetrics live;
  if (!run.start || now < *run.start) return live;
  const TimestampMs end = run.stop ? std::min(now, *run.stop) : now;
  live.elapsed_seconds = to_seconds(now - *run.start);
  const Labels matchers{{"pod", run.pod}, {"node", run.node}};
  auto read = [&](const char* metric, Aggregator agg) -> std::optional<double> {
    try {
      auto values = store.query_window({metric, matchers, *run.start, end, agg});
      if (values.size() == 1) return values.begin()->second;
    } catch (const Error&) {
    }
    return std::nullopt;
  };
  live.cpu_so_far = read("cpu_usage", Aggregator::Increase);
  live.memory_peak_so_far = read("memory_usage", Aggregator::MaxOverTime);
  return live;
}

TrackerState Predictor::start_tracking(const RunId& run_id, const RefreshPolicy& policy,
                                       const LinearModel& cpu_model, const LinearModel& mem_model) {
  return start_tracking(run_id, policy, std::vector<LinearModel>{cpu_model},
                        std::vector<LinearModel>{mem_model});
}

TrackerState Predictor::start_tracking(const RunId& run_id, const RefreshPolicy& policy,
                                       std::vector<LinearModel> cpu_models,
                                       std::vector<LinearModel> mem_models) {
  policy.validate();
  const RunRecord run = registry_.get(run_id);
  if (run.status != RunStatus::Running) {
    throw Error(Errc::RunNotRunning, run_id + " is " + std::string(to_string(run.status)));
  }
  for (const auto* models : {&cpu_models, &mem_models}) {
    if (models->empty()) throw Error(Errc::ModelScheduleMismatch, "no model supplied");
    double earliest = std::numeric_limits<double>::infinity();
    for (const auto& m : *models) earliest = std::min(earliest, required_offset(m));
    if (earliest > policy.warmup_seconds) {
      throw Error(Errc::ModelScheduleMismatch,
                  "no model is computable at the " + detail::format_double(policy.warmup_seconds) +
                      " s warm-up refresh");
    }
  }

  std::unique_lock lock(mutex_);
  auto& slot = trackers_[run_id];
  if (!slot) {
    slot = std::make_unique<Tracker>();
    slot->state.run_id = run_id;
    slot->state.phase = TrackerPhase::WarmingUp;
  }
  std::lock_guard tlock(slot->mutex);
  slot->state.policy = policy;
  slot->cpu_models = std::move(cpu_models);
  slot->mem_models = std::move(mem_models);
  return slot->state;
}

Predictor::Tracker& Predictor::tracker(const RunId& run_id) const {
  std::shared_lock lock(mutex_);
  auto it = trackers_.find(run_id);
  if (it == trackers_.end()) throw Error(Errc::UnknownRun, run_id + " is not tracked");
  return *it->second;
}

bool Predictor::closed_at(const RunRecord& run, TimestampMs now) const {
  switch (run.status) {
    case RunStatus::Running:
    case RunStatus::Pending:
      return false;
    case RunStatus::Completed:
      return now >= *run.stop;
    case RunStatus::Failed:
      return true;
  }
  return true;
}

PredictionRecord Predictor::evaluate(Tracker& t, const RunRecord& run, double refresh_time,
                                     TimestampMs now, RecordOrigin origin) const {
  // Pick, per target, the model reaching furthest without passing refresh_time.
  auto choose = [refresh_time](const std::vector<LinearModel>& models) -> std::pair<const LinearModel*, double> {
    const LinearModel* best = nullptr;
    double best_offset = -1.0;
    for (const auto& m : models) {
      const double off = required_offset(m);
      if (off <= refresh_time && off > best_offset) {
        best = &m;
        best_offset = off;
      }
    }
    return {best, best_offset};
  };
  auto [cpu_model, cpu_offset] = choose(t.cpu_models);
  auto [mem_model, mem_offset] = choose(t.mem_models);
  if (!cpu_model || !mem_model) {
    double earliest = std::numeric_limits<double>::infinity();
    for (const auto* models : {&t.cpu_models, &t.mem_models}) {
      for (const auto& m : *models) earliest = std::min(earliest, required_offset(m));
    }
    throw PredictionNotReady(earliest - refresh_time);
  }

  std::map<double, std::vector<double>> windows;  // offset -> catalog values
  auto features_for = [&](const LinearModel& m) {
    std::map<std::string, double, std::less<>> row;
    const auto inputs = run.inputs.values();
    const auto& input_names = RunInputs::field_names();
    for (const auto& f : m.features) {
      const auto spec = parse_column(f);
      if (spec.kind == ColumnKind::Input) {
        auto it = std::find(input_names.begin(), input_names.end(), spec.base);
        row[f] = inputs[static_cast<std::size_t>(std::distance(input_names.begin(), it))];
        continue;
      }
      const double tk = m.schedule.offset(spec.k);
      if (spec.kind == ColumnKind::Duration) {
        row[f] = tk;
        continue;
      }
      auto w = windows.find(tk);
      if (w == windows.end()) {
        w = windows.emplace(tk, window_columns(store_, run, *run.start, *run.start + to_ms(tk), true)).first;
      }
      const double v = w->second[catalog_position(spec.base)];
      row[f] = spec.kind == ColumnKind::Ratio && !is_absent(v) ? v / tk : v;
    }
    return row;
  };

  const auto cpu = predict(*cpu_model, features_for(*cpu_model));
  const auto mem = predict(*mem_model, features_for(*mem_model));
  PredictionRecord r;
  r.run_id = run.run_id;
  r.refresh_time = refresh_time;
  r.cpu_feature_offset = cpu_offset;
  r.mem_feature_offset = mem_offset;
  r.predicted_cpu_total = cpu.value;
  r.predicted_memory_peak = mem.value;
  r.cpu_model_version = cpu_model->version;
  r.mem_model_version = mem_model->version;
  r.cpu_clamped = cpu.clamped;
  r.mem_clamped = mem.clamped;
  r.issued_at = now;
  r.origin = origin;
  return r;
}

PredictionRecord Predictor::actuals(const RunRecord& run, TimestampMs now) const {
  const TimestampMs end = run.stop ? *run.stop : now;
  const Labels matchers{{"pod", run.pod}, {"node", run.node}};
  auto single = [&](const char* metric, Aggregator agg) {
    auto values = store_.query_window({metric, matchers, *run.start, end, agg});
    if (values.size() != 1) throw Error(Errc::MissingMetric, std::string(metric) + " is ambiguous");
    return values.begin()->second;
  };
  PredictionRecord r;
  r.run_id = run.run_id;
  r.refresh_time = to_seconds(now - *run.start);
  r.predicted_cpu_total = single("cpu_usage", Aggregator::Increase);
  r.predicted_memory_peak = single("memory_usage", Aggregator::MaxOverTime);
  r.issued_at = now;
  r.origin = RecordOrigin::Actual;
  r.actual = true;
  return r;
}

PredictionRecord Predictor::request_refresh(const RunId& run_id, TimestampMs now) {
  Tracker& t = tracker(run_id);
  std::lock_guard lock(t.mutex);
  const RunRecord run = registry_.get(run_id);
  auto& hist = t.state.history;
  const double elapsed = to_seconds(now - *run.start);

  if (!hist.empty()) {
    if (hist.back().actual) return hist.back();
    if (elapsed < hist.back().refresh_time) {
      throw Error(Errc::StaleRequest, "now is before the latest record at " +
                                          detail::format_double(hist.back().refresh_time) + " s");
    }
  }

  if (closed_at(run, now)) {
    auto r = actuals(run, now);
    t.state.phase = TrackerPhase::Closed;
    if (r.refresh_time >= t.state.policy.warmup_seconds &&
        (hist.empty() || r.refresh_time > hist.back().refresh_time)) {
      hist.push_back(r);
    }
    return r;
  }

  if (!hist.empty() && elapsed == hist.back().refresh_time) return hist.back();
  if (elapsed < t.state.policy.warmup_seconds) {
    throw PredictionNotReady(t.state.policy.warmup_seconds - elapsed);
  }
  auto r = evaluate(t, run, elapsed, now, RecordOrigin::Manual);
  hist.push_back(r);
  t.state.phase = TrackerPhase::Active;
  return r;
}

std::optional<PredictionRecord> Predictor::tick(const RunId& run_id, TimestampMs now) {
  Tracker& t = tracker(run_id);
  std::lock_guard lock(t.mutex);
  if (t.state.phase == TrackerPhase::Closed) return std::nullopt;
  const RunRecord run = registry_.get(run_id);
  if (closed_at(run, now)) {
    t.state.phase = TrackerPhase::Closed;
    return std::nullopt;
  }
  const auto& policy = t.state.policy;
  const double elapsed = to_seconds(now - *run.start);
  if (elapsed < policy.warmup_seconds) return std::nullopt;

  // Latest automatic slot at or before elapsed.
  double slot = policy.warmup_seconds;
  RecordOrigin origin = RecordOrigin::Warmup;
  if (policy.mode != RefreshMode::Manual) {
    const double interval_slot = std::floor(elapsed / policy.interval_seconds) * policy.interval_seconds;
    if (interval_slot > slot) {
      slot = interval_slot;
      origin = RecordOrigin::Interval;
    }
  }
  if (slot <= t.last_auto_slot) return std::nullopt;
  t.last_auto_slot = slot;

  auto& hist = t.state.history;
  if (!hist.empty() && slot <= hist.back().refresh_time) return std::nullopt;
  auto r = evaluate(t, run, slot, now, origin);
  hist.push_back(r);
  t.state.phase = TrackerPhase::Active;
  return r;
}

TrackerState Predictor::state(const RunId& run_id) const {
  {
    std::shared_lock lock(mutex_);
    if (!trackers_.contains(run_id)) {
      TrackerState s;
      s.run_id = run_id;
      return s;
    }
  }
  Tracker& t = tracker(run_id);
  std::lock_guard lock(t.mutex);
  return t.state;
}

bool Predictor::is_tracked(const RunId& run_id) const {
  std::shared_lock lock(mutex_);
  return trackers_.contains(run_id);
}

std::vector<RunId> Predictor::tracked_runs() const {
  std::shared_lock lock(mutex_);
  std::vector<RunId> out;
  for (const auto& [id, t] : trackers_) out.push_back(id);
  return out;
}

json to_json(const PredictionRecord& r) {
  return json{{"run_id", r.run_id},
              {"refresh_time", r.refresh_time},
              {"cpu_feature_offset", r.cpu_feature_offset},
              {"mem_feature_offset", r.mem_feature_offset},
              {"predicted_cpu_total", r.predicted_cpu_total},
              {"predicted_memory_peak", r.predicted_memory_peak},
              {"cpu_model_version", r.cpu_model_version},
              {"mem_model_version", r.mem_model_version},
              {"clamped", {{"cpu", r.cpu_clamped}, {"memory", r.mem_clamped}}},
              {"issued_at", to_seconds(r.issued_at)},
              {"origin", to_string(r.origin)},
              {"actual", r.actual}};
}

json to_json(const RefreshPolicy& p) {
  return json{{"mode", to_string(p.mode)},
              {"interval_seconds", p.interval_seconds},
              {"warmup_seconds", p.warmup_seconds}};
}

json to_json(const TrackerState& s) {
  json history = json::array();
  for (const auto& r : s.history) history.push_back(to_json(r));
  return json{{"run_id", s.run_id},
              {"phase", to_string(s.phase)},
              {"policy", to_json(s.policy)},
              {"history", std::move(history)}};
}

RefreshPolicy refresh_policy_from_json(const json& j, const RefreshPolicy& defaults) {
  RefreshPolicy p = defaults;
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(Errc::InvalidPolicy, "policy must be an object");
  try {
    if (auto m = j.find("mode"); m != j.end()) p.mode = parse_refresh_mode(m->get<std::string>());
    if (auto i = j.find("interval_seconds"); i != j.end()) p.interval_seconds = i->get<double>();
    if (auto w = j.find("warmup_seconds"); w != j.end()) p.warmup_seconds = w->get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidPolicy, e.what());
  }
  p.validate();
  return p;
}

}  // namespace burnseer
