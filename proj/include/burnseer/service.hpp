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

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <nlohmann/json_fwd.hpp>

#include "burnseer/app.hpp"

namespace httplib {
class Server;
}

namespace burnseer {

using Clock = std::function<TimestampMs()>;

/// Wall-clock milliseconds since the epoch.
TimestampMs system_now();

struct ServiceOptions {
  /// Simulated runs registered as Running at service start, finishing on
  /// their simulated schedule.
  std::size_t live_runs = 0;
  std::uint64_t live_seed = 1;
  /// Background tick period for tracked runs; 0 disables the ticker.
  double tick_period_seconds = 1.0;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

/// HTTP front of the predictor. Owns its store, registry, and models.
class Service {
 public:
  Service(AppConfig config, MetricStore store, RunRegistry registry, std::optional<ModelSet> models,
          Clock clock, ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves in a background thread. Port 0 picks a free port.
  /// Returns the bound port; PortInUse when binding fails.
  int start(const std::string& host, int port);
  /// Stops accepting, lets in-flight requests finish, joins threads.
  void stop();

  /// Dispatches one request without a socket; the HTTP layer calls this too.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  /// Closes due live runs, then ticks every tracked run.
  void tick_all();

  std::optional<std::string> model_version() const;

 private:
  struct LiveRun {
    RunId run_id;
    std::optional<TimestampMs> finish_at;
  };

  void spawn_live_runs();
  void advance(TimestampMs now);
  std::shared_ptr<const ModelSet> models() const;
  void ensure_tracked(const RunId& run_id, const std::optional<RefreshPolicy>& policy);
  void tick_run(const RunId& run_id, TimestampMs now);

  nlohmann::json get_runs(TimestampMs now);
  nlohmann::json get_run(const RunId& id, TimestampMs now);
  nlohmann::json post_track(const RunId& id, const std::string& body, TimestampMs now);
  nlohmann::json post_refresh(const RunId& id, TimestampMs now);
  nlohmann::json get_predictions(const RunId& id, TimestampMs now);
  nlohmann::json get_model();
  nlohmann::json post_train(const std::string& body);
  nlohmann::json get_correlations();

  AppConfig config_;
  ServiceOptions options_;
  Clock clock_;
  MetricStore store_;
  RunRegistry registry_;
  Predictor predictor_;

  mutable std::shared_mutex models_mutex_;  // exclusive while training swaps models
  std::shared_ptr<const ModelSet> models_;
  std::optional<CorrelationMatrix> correlations_;
  std::mutex train_mutex_;

  std::mutex live_mutex_;
  std::vector<LiveRun> live_;
  std::mutex tracked_mutex_;
  std::map<RunId, std::string> tracked_with_;  // run -> model set version

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread ticker_;
  std::mutex ticker_mutex_;
  std::condition_variable ticker_cv_;
  bool stopping_ = false;
};

/// Blocks SIGINT/SIGTERM for the calling thread (and threads it spawns
/// afterwards), then waits for one of them.
void block_shutdown_signals();
int wait_for_shutdown_signal();

}  // namespace burnseer
