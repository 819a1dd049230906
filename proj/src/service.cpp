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

#include "burnseer/service.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <sstream>

#include <httplib.h>
#include <pthread.h>
#include <nlohmann/json.hpp>

#include "burnseer/simulator.hpp"

namespace burnseer {

using nlohmann::json;

TimestampMs system_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownRun:
    case Errc::UnknownCommand:
      return 404;
    case Errc::PredictionNotReady:
    case Errc::StaleRequest:
    case Errc::RunNotRunning:
    case Errc::IllegalTransition:
    case Errc::DuplicateActiveRun:
      return 409;
    case Errc::ModelUnavailable:
      return 503;
    case Errc::IoError:
      return 500;
    default:
      return 400;
  }
}

HttpResponse error_response(const Error& e) {
  json body{{"code", to_string(e.code())}, {"message", e.detail()}};
  if (const auto* nr = dynamic_cast<const PredictionNotReady*>(&e)) body["remaining_seconds"] = nr->remaining_seconds();
  return {http_status(e.code()), body.dump()};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  for (std::string seg; std::getline(ss, seg, '/');) {
    if (!seg.empty()) out.push_back(seg);
  }
  return out;
}

json parse_body(const std::string& body, Errc on_error) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return nullptr;
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(on_error, std::string("request body: ") + e.what());
  }
}

std::string live_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

}  // namespace

Service::Service(AppConfig config, MetricStore store, RunRegistry registry, std::optional<ModelSet> models,
                 Clock clock, ServiceOptions options)
    : config_(std::move(config)),
      options_(options),
      clock_(std::move(clock)),
      store_(std::move(store)),
      registry_(std::move(registry)),
      predictor_(store_, registry_) {
  config_.validate();
  if (models) models_ = std::make_shared<const ModelSet>(std::move(*models));
  if (options_.live_runs > 0) spawn_live_runs();
}

Service::~Service() { stop(); }

void Service::spawn_live_runs() {
  GroundTruth truth = GroundTruth::defaults();
  FleetSpec spec = FleetSpec::defaults();
  truth.seed = options_.live_seed;
  truth.cpu_noise_sd = 0.1 * law_mean(truth.cpu_law, spec);
  truth.mem_noise_sd = 0.1 * law_mean(truth.mem_law, spec);
  spec.n_runs = options_.live_runs;
  spec.base_start = clock_();
  spec.start_spacing = 0.0;
  validate(truth, spec);

  std::mt19937_64 rng(truth.seed);
  std::vector<RunRecord> records;
  std::vector<MetricSeries> series;
  std::lock_guard lock(live_mutex_);
  for (std::size_t i = 0; i < spec.n_runs; ++i) {
    GeneratedRun run = generate_run(truth, spec, rng, i);
    RunRecord rec = run.record;
    rec.run_id = live_id("live-", i);
    rec.pod = live_id("live-pod-", i);
    rec.status = RunStatus::Running;
    rec.stop.reset();
    for (auto& s : run.series) {
      s.labels["pod"] = rec.pod;
      series.push_back(std::move(s));
    }
    live_.push_back({rec.run_id, run.record.stop});
    records.push_back(std::move(rec));
  }
  auto report = store_.ingest(std::move(series));
  if (!report.rejected.empty()) throw Error(report.rejected.front().code, report.rejected.front().detail);
  registry_.import_records(records);
}

void Service::advance(TimestampMs now) {
  std::lock_guard lock(live_mutex_);
  for (auto& live : live_) {
    if (live.finish_at && *live.finish_at <= now) {
      registry_.mark_finished(live.run_id, live.finish_at);
      live.finish_at.reset();
    }
  }
}

std::shared_ptr<const ModelSet> Service::models() const {
  std::shared_lock lock(models_mutex_);
  return models_;
}

std::optional<std::string> Service::model_version() const {
  auto m = models();
  if (!m) return std::nullopt;
  return m->version();
}

void Service::ensure_tracked(const RunId& run_id, const std::optional<RefreshPolicy>& policy) {
  auto m = models();
  if (!m) throw Error(Errc::ModelUnavailable, "no trained models; POST /train first");
  std::lock_guard lock(tracked_mutex_);
  const auto it = tracked_with_.find(run_id);
  const bool tracked = it != tracked_with_.end();
  if (tracked && !policy && it->second == m->version()) return;

  const RefreshPolicy use = policy ? *policy : tracked ? predictor_.state(run_id).policy : config_.policy;
  try {
    predictor_.start_tracking(run_id, use, m->cpu, m->mem);
  } catch (const Error& e) {
    // A run that finished keeps the models it was tracked with.
    if (tracked && !policy && e.code() == Errc::RunNotRunning) return;
    throw;
  }
  tracked_with_[run_id] = m->version();
}

void Service::tick_run(const RunId& run_id, TimestampMs now) {
  std::shared_lock lock(models_mutex_);
  predictor_.tick(run_id, now);
}

void Service::tick_all() {
  const TimestampMs now = clock_();
  advance(now);
  for (const auto& id : predictor_.tracked_runs()) {
    try {
      tick_run(id, now);
    } catch (const Error&) {
      // a failing tick leaves the tracker unchanged; requests surface the error
    }
  }
}

json Service::get_runs(TimestampMs now) {
  json out = json::array();
  for (const auto& r : registry_.list_runs()) {
    json j = to_json(r);
    const auto state = predictor_.state(r.run_id);
    j["tracked"] = state.phase != TrackerPhase::Untracked;
    j["phase"] = to_string(state.phase);
    if (r.status == RunStatus::Running && r.start) j["elapsed_seconds"] = to_seconds(now - *r.start);
    out.push_back(std::move(j));
  }
  return out;
}

json Service::get_run(const RunId& id, TimestampMs now) {
  const RunRecord run = registry_.get(id);
  if (predictor_.is_tracked(id)) tick_run(id, now);
  json j = to_json(run);
  const auto state = predictor_.state(id);
  j["phase"] = to_string(state.phase);
  j["policy"] = to_json(state.phase == TrackerPhase::Untracked ? config_.policy : state.policy);
  if (run.start) {
    const LiveMetrics live = live_metrics(store_, run, now);
    j["live"] = {{"elapsed_seconds", live.elapsed_seconds},
                 {"cpu_so_far", live.cpu_so_far ? json(*live.cpu_so_far) : json(nullptr)},
                 {"memory_peak_so_far", live.memory_peak_so_far ? json(*live.memory_peak_so_far) : json(nullptr)}};
    const double warmup = j["policy"]["warmup_seconds"].get<double>();
    j["refresh_available_in"] = run.status == RunStatus::Running ? std::max(0.0, warmup - live.elapsed_seconds) : 0.0;
  }
  j["latest"] = state.history.empty() ? json(nullptr) : to_json(state.history.back());
  return j;
}

json Service::post_track(const RunId& id, const std::string& body, TimestampMs now) {
  registry_.get(id);
  const RefreshPolicy policy = refresh_policy_from_json(parse_body(body, Errc::InvalidPolicy), config_.policy);
  ensure_tracked(id, policy);
  tick_run(id, now);
  return to_json(predictor_.state(id));
}

json Service::post_refresh(const RunId& id, TimestampMs now) {
  registry_.get(id);
  ensure_tracked(id, std::nullopt);
  std::shared_lock lock(models_mutex_);
  predictor_.tick(id, now);  // lets the automatic warm-up record land first
  return to_json(predictor_.request_refresh(id, now));
}

json Service::get_predictions(const RunId& id, TimestampMs now) {
  registry_.get(id);
  if (predictor_.is_tracked(id)) tick_run(id, now);
  return to_json(predictor_.state(id));
}

json Service::get_model() {
  auto m = models();
  if (!m) throw Error(Errc::ModelUnavailable, "no trained models; POST /train first");
  return to_json(*m);
}

json Service::post_train(const std::string& body) {
  std::lock_guard train_lock(train_mutex_);
  AppConfig cfg = config_;
  const json req = parse_body(body, Errc::InvalidConfig);
  if (!req.is_null()) {
    if (!req.is_object()) throw Error(Errc::InvalidConfig, "request body must be an object");
    try {
      if (auto v = req.find("threshold"); v != req.end()) cfg.threshold = v->get<double>();
      if (auto v = req.find("test_fraction"); v != req.end()) cfg.test_fraction = v->get<double>();
      if (auto v = req.find("seed"); v != req.end()) cfg.split_seed = v->get<std::uint64_t>();
      if (auto v = req.find("schedule"); v != req.end()) cfg.schedule = RefreshSchedule::parse(v->get<std::string>());
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, e.what());
    }
  }
  cfg.validate();

  BuildReport report;
  const Dataset ds = DatasetBuilder(store_, registry_).build_dataset(cfg.schedule, {RunStatus::Completed}, &report);
  ModelTraining training = train_models(ds, cfg);
  auto fresh = std::make_shared<const ModelSet>(training.models);
  {
    std::unique_lock lock(models_mutex_);
    models_ = fresh;
    correlations_ = std::move(training.correlations);
  }

  json versions = json::object();
  for (auto [key, group] : {std::pair{kCpuTarget, &fresh->cpu}, std::pair{kMemoryTarget, &fresh->mem}}) {
    json arr = json::array();
    for (const auto& m : *group) {
      arr.push_back({{"version", m.version},
                     {"features", m.features.size()},
                     {"r_squared_train", m.training_stats.r_squared_train},
                     {"r_squared_test", m.training_stats.r_squared_test ? json(*m.training_stats.r_squared_test)
                                                                        : json(nullptr)}});
    }
    versions[std::string(key)] = std::move(arr);
  }
  return {{"version", fresh->version()},
          {"schedule", fresh->schedule.to_string()},
          {"rows", report.rows},
          {"models", std::move(versions)},
          {"warnings", training.warnings}};
}

json Service::get_correlations() {
  std::optional<CorrelationMatrix> cm;
  {
    std::shared_lock lock(models_mutex_);
    cm = correlations_;
  }
  if (!cm) {
    const Dataset ds = DatasetBuilder(store_, registry_).build_dataset(config_.schedule);
    cm = correlation_matrix(ds);
  }
  json values = json::array();
  for (Eigen::Index i = 0; i < cm->values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < cm->values.cols(); ++j) {
      const double v = cm->values(i, j);
      row.push_back(is_absent(v) ? json(nullptr) : json(v));
    }
    values.push_back(std::move(row));
  }
  return {{"names", cm->names}, {"values", std::move(values)}};
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    const TimestampMs now = clock_();
    advance(now);
    const auto seg = split_path(path);
    const bool get = method == "GET";
    const bool post = method == "POST";
    json out;
    if (get && seg.size() == 1 && seg[0] == "runs") {
      out = get_runs(now);
    } else if (get && seg.size() == 2 && seg[0] == "runs") {
      out = get_run(seg[1], now);
    } else if (post && seg.size() == 3 && seg[0] == "runs" && seg[2] == "track") {
      out = post_track(seg[1], body, now);
    } else if (post && seg.size() == 3 && seg[0] == "runs" && seg[2] == "refresh") {
      out = post_refresh(seg[1], now);
    } else if (get && seg.size() == 3 && seg[0] == "runs" && seg[2] == "predictions") {
      out = get_predictions(seg[1], now);
    } else if (get && seg.size() == 1 && seg[0] == "model") {
      out = get_model();
    } else if (post && seg.size() == 1 && seg[0] == "train") {
      out = post_train(body);
    } else if (get && seg.size() == 1 && seg[0] == "correlations") {
      out = get_correlations();
    } else {
      throw Error(Errc::UnknownCommand, "no route for " + method + " " + path);
    }
    return {200, out.dump()};
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return {500, json{{"code", "IoError"}, {"message", e.what()}}.dump()};
  }
}

int Service::start(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  // Without SO_REUSEPORT a second server on the same port fails to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);

  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    throw Error(Errc::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });

  if (options_.tick_period_seconds > 0.0) {
    const auto period = std::chrono::duration<double>(options_.tick_period_seconds);
    ticker_ = std::thread([this, period] {
      std::unique_lock lock(ticker_mutex_);
      while (!ticker_cv_.wait_for(lock, period, [this] { return stopping_; })) {
        lock.unlock();
        tick_all();
        lock.lock();
      }
    });
  }
  return bound;
}

void Service::stop() {
  {
    std::lock_guard lock(ticker_mutex_);
    stopping_ = true;
  }
  ticker_cv_.notify_all();
  if (ticker_.joinable()) ticker_.join();
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

namespace {
sigset_t shutdown_set() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}
}  // namespace

void block_shutdown_signals() {
  const sigset_t set = shutdown_set();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

int wait_for_shutdown_signal() {
  const sigset_t set = shutdown_set();
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

}  // namespace burnseer
