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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "burnseer/analysis.hpp"
#include "burnseer/dataset.hpp"
#include "burnseer/metric_store.hpp"
#include "burnseer/predictor.hpp"
#include "burnseer/run_registry.hpp"

namespace burnseer {

struct AppConfig {
  std::string data_dir = ".burnseer";
  std::string host = "127.0.0.1";
  int port = 8080;
  RefreshPolicy policy;
  RefreshSchedule schedule{{45.0, 300.0}};
  double threshold = 0.5;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Trained models for both targets. Each target may carry one model per
/// refresh offset; the predictor picks among them by elapsed time.
struct ModelSet {
  RefreshSchedule schedule;
  std::vector<LinearModel> cpu;
  std::vector<LinearModel> mem;

  /// Hash of the member model versions.
  std::string version() const;
};

nlohmann::json to_json(const ModelSet& models);
ModelSet model_set_from_json(const nlohmann::json& j);

struct ModelTraining {
  ModelSet models;
  CorrelationMatrix correlations;
  std::vector<std::string> warnings;
};

/// Trains, for each target and each k in `ks` (every schedule index when
/// empty), a model restricted to inputs and refresh-k columns.
ModelTraining train_models(const Dataset& ds, const AppConfig& config, const std::set<int>& ks = {},
                           const std::vector<std::string>& targets = {std::string(kCpuTarget),
                                                                      std::string(kMemoryTarget)});

/// Files kept under the data directory between CLI invocations.
class Workspace {
 public:
  explicit Workspace(std::string dir) : dir_(std::move(dir)) {}

  std::string metrics_path() const { return dir_ + "/metrics.json"; }
  std::string runs_path() const { return dir_ + "/runs.json"; }
  std::string dataset_path() const { return dir_ + "/dataset.csv"; }
  std::string models_path() const { return dir_ + "/models.json"; }

  MetricStore load_store() const;
  void save_store(const MetricStore& store) const;
  RunRegistry load_registry() const;
  void save_registry(const RunRegistry& registry) const;
  /// ModelUnavailable when nothing has been trained.
  ModelSet load_models() const;
  void save_models(const ModelSet& models) const;

 private:
  std::string dir_;
};

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

/// Runs one CLI invocation (`args` excludes the program name). Returns the
/// process exit code; failures print the error name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace burnseer
