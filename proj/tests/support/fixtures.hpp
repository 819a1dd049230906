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

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "burnseer/dataset.hpp"
#include "burnseer/metric_store.hpp"
#include "burnseer/run_registry.hpp"

namespace fixture {

using burnseer::MetricSeries;
using burnseer::Sample;
using burnseer::SampleKind;
using burnseer::TimestampMs;

inline burnseer::RunInputs valid_inputs() {
  burnseer::RunInputs in;
  in.surface_moisture = 0.2;
  in.wind_moisture = 0.1;
  in.wind_direction = 90.0;
  in.wind_speed = 5.0;
  in.sim_time = 600.0;
  in.timestep = 1.0;
  in.run_max_mem_rss_bytes = 4e9;
  in.area = 5e4;
  return in;
}

inline MetricSeries series(std::string metric, std::string pod, std::string node, SampleKind kind,
                           std::vector<std::pair<double, double>> samples_seconds) {
  MetricSeries s;
  s.metric = std::move(metric);
  s.labels = {{"pod", std::move(pod)}, {"node", std::move(node)}};
  s.kind = kind;
  for (auto [t, v] : samples_seconds) s.samples.push_back({burnseer::to_ms(t), v});
  return s;
}

/// Every queried catalog series for one pod/node. `cpu` gives the cpu_usage
/// counter as (seconds, value); other series are sampled at the same times.
/// Counters are 2 x cpu, gauges step up by 10 per sample from 100, and
/// request/limit gauges are constant.
inline std::vector<MetricSeries> catalog_series(const std::string& pod, const std::string& node,
                                                const std::vector<std::pair<double, double>>& cpu) {
  std::vector<MetricSeries> out;
  for (const auto& e : burnseer::metric_catalog()) {
    if (e.source != burnseer::CatalogEntry::Source::Query) continue;
    const std::string name(e.metric);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < cpu.size(); ++i) {
      double v = 0.0;
      if (name == "cpu_usage") {
        v = cpu[i].second;
      } else if (e.kind == SampleKind::Counter) {
        v = 2.0 * cpu[i].second;
      } else if (name == "cpu_requests") {
        v = 4.0;
      } else if (name == "cpu_limits") {
        v = 8.0;
      } else if (name == "memory_requests") {
        v = 50.0;
      } else if (name == "memory_limits") {
        v = 1000.0;
      } else {
        v = 100.0 + 10.0 * static_cast<double>(i);
      }
      samples.emplace_back(cpu[i].first, v);
    }
    out.push_back(series(name, pod, node, e.kind, samples));
  }
  return out;
}

/// Registers, starts and (when stop > 0) finishes a run; returns its id.
inline burnseer::RunId add_run(burnseer::RunRegistry& reg, const std::string& pod, const std::string& node,
                               double start_s, std::optional<double> stop_s,
                               burnseer::RunInputs inputs = valid_inputs()) {
  auto id = reg.register_run("ens-1", pod, node, inputs);
  reg.mark_started(id, burnseer::to_ms(start_s));
  reg.mark_finished(id, stop_s ? std::optional<TimestampMs>(burnseer::to_ms(*stop_s)) : std::nullopt);
  return id;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("burnseer-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
