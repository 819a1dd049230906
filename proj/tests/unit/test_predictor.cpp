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

#include <doctest.h>

#include <nlohmann/json.hpp>

#include "burnseer/predictor.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace burnseer;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(Errc::IoError, "");
}

LinearModel model(std::string target, std::vector<std::string> features, std::vector<double> coefs, double intercept,
                  std::vector<double> schedule = {45}) {
  LinearModel m;
  m.target = std::move(target);
  m.features = std::move(features);
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
  m.intercept = intercept;
  m.schedule = RefreshSchedule(std::move(schedule));
  m.version = LinearModel::compute_version(m.features, m.coefficients, m.intercept);
  return m;
}

LinearModel cpu_t1() { return model(std::string(kCpuTarget), {"cpu_usage_t1", "area"}, {2.0, 0.0}, 10.0); }
LinearModel mem_t1() { return model(std::string(kMemoryTarget), {"memory_usage_t1"}, {1.0}, 0.0); }

// A run started at 1000 s with one cpu-second per second, sampled every 15 s
// until `until`; gauges step up by 10 per sample from 100.
struct Live {
  MetricStore store;
  RunRegistry reg;
  RunId id;
  Predictor predictor{store, reg};
  std::vector<std::pair<double, double>> cpu;

  explicit Live(double until = 2000.0) {
    for (double t = 1000; t <= until; t += 15) cpu.emplace_back(t, t - 1000);
    store.ingest(fixture::catalog_series("p", "n", cpu));
    id = reg.register_run("e", "p", "n", fixture::valid_inputs());
    reg.mark_started(id, to_ms(1000));
  }
  TimestampMs at(double elapsed) const { return to_ms(1000 + elapsed); }
  void track(RefreshMode mode, double interval = 300) {
    predictor.start_tracking(id, {mode, interval, 45}, cpu_t1(), mem_t1());
  }
};

}  // namespace

TEST_CASE("manual mode: warm-up gating and the automatic first record") {
  Live live;
  live.track(RefreshMode::Manual);
  CHECK(live.predictor.state(live.id).phase == TrackerPhase::WarmingUp);

  try {
    live.predictor.request_refresh(live.id, live.at(30));
    FAIL("expected PredictionNotReady");
  } catch (const PredictionNotReady& e) {
    CHECK(e.remaining_seconds() == 15.0);
    CHECK(e.code() == Errc::PredictionNotReady);
  }
  CHECK(!live.predictor.tick(live.id, live.at(44.999)));
  const auto first = live.predictor.tick(live.id, live.at(45));
  REQUIRE(first);
  CHECK(first->refresh_time == 45.0);
  CHECK(first->origin == RecordOrigin::Warmup);
  // cpu_usage_t1 = 45, memory_usage_t1 = max(100, 110, 120, 130)
  CHECK(first->predicted_cpu_total == 100.0);
  CHECK(first->predicted_memory_peak == 130.0);
  CHECK(first->cpu_model_version == cpu_t1().version);
  CHECK(live.predictor.state(live.id).phase == TrackerPhase::Active);

  // manual mode never adds interval records
  CHECK(!live.predictor.tick(live.id, live.at(500)));
  const auto manual = live.predictor.request_refresh(live.id, live.at(500));
  CHECK(manual.refresh_time == 500.0);
  CHECK(manual.origin == RecordOrigin::Manual);
  CHECK(manual.cpu_feature_offset == 45.0);
  // same instant gives back the same record
  CHECK(live.predictor.request_refresh(live.id, live.at(500)) == manual);
  CHECK(error_of([&] { live.predictor.request_refresh(live.id, live.at(400)); }).code() == Errc::StaleRequest);
  CHECK(live.predictor.state(live.id).history.size() == 2);
}

TEST_CASE("a refresh request at 45 s is served without a tick") {
  Live live;
  live.track(RefreshMode::Manual);
  const auto r = live.predictor.request_refresh(live.id, live.at(45));
  CHECK(r.refresh_time == 45.0);
  CHECK(!live.predictor.tick(live.id, live.at(46)));
}

TEST_CASE("interval mode emits one record per slot") {
  Live live;
  live.track(RefreshMode::Interval, 300);
  live.reg.mark_finished(live.id, to_ms(2000));
  std::vector<double> times;
  for (double s = 0; s <= 1100; s += 1) {
    if (auto r = live.predictor.tick(live.id, live.at(s))) times.push_back(r->refresh_time);
  }
  CHECK(times == std::vector<double>{45, 300, 600, 900});
  CHECK(live.predictor.state(live.id).phase == TrackerPhase::Closed);
}

TEST_CASE("hybrid mode: manual requests in between do not suppress later slots") {
  Live live;
  live.track(RefreshMode::Hybrid, 300);
  CHECK(live.predictor.tick(live.id, live.at(45)));
  live.predictor.request_refresh(live.id, live.at(100));
  CHECK(!live.predictor.tick(live.id, live.at(299)));
  auto r = live.predictor.tick(live.id, live.at(301));
  REQUIRE(r);
  CHECK(r->refresh_time == 300.0);
  CHECK(!live.predictor.tick(live.id, live.at(302)));
}

TEST_CASE("the first tick after a gap takes the latest slot only") {
  Live live;
  live.track(RefreshMode::Interval, 300);
  auto r = live.predictor.tick(live.id, live.at(650));
  REQUIRE(r);
  CHECK(r->refresh_time == 600.0);
  CHECK(live.predictor.state(live.id).history.size() == 1);
}

TEST_CASE("after the run stops, refresh returns the observed totals") {
  Live live(1600);
  live.track(RefreshMode::Manual);
  live.predictor.tick(live.id, live.at(45));
  live.reg.mark_finished(live.id, to_ms(1600));
  const auto actual = live.predictor.request_refresh(live.id, live.at(700));
  CHECK(actual.actual);
  CHECK(actual.origin == RecordOrigin::Actual);

  std::vector<Sample> samples;
  for (auto [t, v] : live.cpu) samples.push_back({to_ms(t), v});
  CHECK(actual.predicted_cpu_total == *oracle::increase(samples, to_ms(1000), to_ms(1600)));
  CHECK(actual.predicted_memory_peak == 100.0 + 10.0 * static_cast<double>(live.cpu.size() - 1));
  CHECK(live.predictor.state(live.id).phase == TrackerPhase::Closed);
  CHECK(!live.predictor.tick(live.id, live.at(800)));
  CHECK(live.predictor.request_refresh(live.id, live.at(900)) == actual);
}

TEST_CASE("tracking preconditions") {
  Live live;
  auto bad = mem_t1();
  bad.features = {"memory_usage"};
  bad.version = LinearModel::compute_version(bad.features, bad.coefficients, bad.intercept);
  CHECK(error_of([&] { live.predictor.start_tracking(live.id, {}, cpu_t1(), bad); }).code() ==
        Errc::ModelScheduleMismatch);
  const auto late = model(std::string(kCpuTarget), {"cpu_usage_t2"}, {1.0}, 0.0, {45, 300});
  CHECK(error_of([&] { live.predictor.start_tracking(live.id, {}, late, mem_t1()); }).code() ==
        Errc::ModelScheduleMismatch);
  CHECK(error_of([&] { live.predictor.start_tracking(live.id, {RefreshMode::Interval, 0, 45}, cpu_t1(), mem_t1()); })
            .code() == Errc::InvalidPolicy);
  CHECK(error_of([&] { live.predictor.request_refresh(live.id, live.at(100)); }).code() == Errc::UnknownRun);

  auto pending = live.reg.register_run("e", "q", "n", fixture::valid_inputs());
  CHECK(error_of([&] { live.predictor.start_tracking(pending, {}, cpu_t1(), mem_t1()); }).code() ==
        Errc::RunNotRunning);
  live.reg.mark_finished(live.id, to_ms(1500));
  CHECK(error_of([&] { live.predictor.start_tracking(live.id, {}, cpu_t1(), mem_t1()); }).code() ==
        Errc::RunNotRunning);
}

TEST_CASE("with several models the furthest computable one is used") {
  Live live;
  const auto early = cpu_t1();
  const auto later = model(std::string(kCpuTarget), {"cpu_usage_t2_ratio"}, {1000.0}, 0.0, {45, 300});
  live.predictor.start_tracking(live.id, {RefreshMode::Manual, 300, 45}, {early, later}, {mem_t1()});
  auto r = live.predictor.request_refresh(live.id, live.at(299));
  CHECK(r.cpu_model_version == early.version);
  r = live.predictor.request_refresh(live.id, live.at(300));
  CHECK(r.cpu_model_version == later.version);
  CHECK(r.cpu_feature_offset == 300.0);
  CHECK(r.predicted_cpu_total == 1000.0);  // one cpu-second per second
}

TEST_CASE("property: no record before warm-up, times strictly increase, replay is deterministic") {
  gen::for_all(505, 60, [](gen::Gen& g, int c) {
    CAPTURE(c);
    const double runtime = g.uniform(60, 1500);
    const RefreshMode mode = g.pick(std::vector{RefreshMode::Manual, RefreshMode::Interval, RefreshMode::Hybrid});
    const double interval = g.uniform(10, 400);
    std::vector<std::pair<bool, double>> events;  // (is_tick, elapsed)
    double t = 0;
    for (int i = 0; i < 80; ++i) {
      t += g.uniform(0, 40);
      // whole milliseconds, as the clock reports them
      const double e = g.coin(0.1) ? g.uniform(0, t) : t;
      events.emplace_back(g.coin(0.6), std::round(e * 1000.0) / 1000.0);
    }

    auto replay = [&] {
      Live live(2600);
      live.predictor.start_tracking(live.id, {mode, interval, 45}, cpu_t1(), mem_t1());
      bool finished = false;
      for (auto [is_tick, elapsed] : events) {
        if (!finished && elapsed >= runtime) {
          live.reg.mark_finished(live.id, live.at(runtime));
          finished = true;
        }
        try {
          if (is_tick) {
            live.predictor.tick(live.id, live.at(elapsed));
          } else {
            live.predictor.request_refresh(live.id, live.at(elapsed));
          }
        } catch (const PredictionNotReady& e) {
          CHECK(elapsed < 45.0);
          CHECK(e.remaining_seconds() == doctest::Approx(45.0 - elapsed));
        } catch (const Error& e) {
          CHECK(e.code() == Errc::StaleRequest);
        }
      }
      return live.predictor.state(live.id).history;
    };

    const auto history = replay();
    for (std::size_t i = 0; i < history.size(); ++i) {
      CHECK(history[i].refresh_time >= 45.0);
      if (i) CHECK(history[i].refresh_time > history[i - 1].refresh_time);
      if (!history[i].actual) CHECK(history[i].refresh_time < runtime);
      if (history[i].origin == RecordOrigin::Interval) {
        const double k = std::round(history[i].refresh_time / interval);
        CHECK(history[i].refresh_time == std::floor(k) * interval);
      }
      if (i + 1 < history.size()) CHECK(!history[i].actual);
    }
    CHECK(replay() == history);
  });
}

TEST_CASE("policy JSON") {
  const RefreshPolicy p{RefreshMode::Hybrid, 120, 60};
  const auto back = refresh_policy_from_json(to_json(p));
  CHECK(back.mode == RefreshMode::Hybrid);
  CHECK(back.interval_seconds == 120);
  CHECK(back.warmup_seconds == 60);
  const auto partial = refresh_policy_from_json(nlohmann::json{{"mode", "interval"}}, p);
  CHECK(partial.mode == RefreshMode::Interval);
  CHECK(partial.interval_seconds == 120);
  CHECK(error_of([] { parse_refresh_mode("weekly"); }).code() == Errc::InvalidPolicy);
}
