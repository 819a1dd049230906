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

#include "burnseer/app.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "burnseer/hash.hpp"
#include "burnseer/service.hpp"
#include "burnseer/simulator.hpp"
#include "numfmt.hpp"

namespace burnseer {

using nlohmann::json;
using detail::format_double;

void AppConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(Errc::InvalidConfig, "port must be in [0, 65535]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::InvalidConfig, "threshold must be in (0, 1)");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "test_fraction must be in [0, 1)");
  }
  if (data_dir.empty()) throw Error(Errc::InvalidConfig, "data_dir is empty");
  if (schedule.empty()) throw Error(Errc::InvalidConfig, "schedule is empty");
  policy.validate();
}

std::string ModelSet::version() const {
  Fnv1a h;
  h.update(schedule.to_string());
  for (const auto* group : {&cpu, &mem}) {
    h.update_u64(group->size());
    for (const auto& m : *group) h.update(m.version);
  }
  return h.hex();
}

json to_json(const ModelSet& models) {
  json cpu = json::array();
  json mem = json::array();
  for (const auto& m : models.cpu) cpu.push_back(to_json(m));
  for (const auto& m : models.mem) mem.push_back(to_json(m));
  return json{{"version", models.version()},
              {"schedule", models.schedule.to_string()},
              {std::string(kCpuTarget), std::move(cpu)},
              {std::string(kMemoryTarget), std::move(mem)}};
}

ModelSet model_set_from_json(const json& j) {
  ModelSet out;
  try {
    out.schedule = RefreshSchedule::parse(j.at("schedule").get<std::string>());
    for (auto [key, dest] : {std::pair{kCpuTarget, &out.cpu}, std::pair{kMemoryTarget, &out.mem}}) {
      for (const auto& m : j.at(std::string(key))) {
        auto model = linear_model_from_json(m);
        if (model.target != key) {
          throw Error(Errc::MalformedModel, "model for " + model.target + " listed under " + std::string(key));
        }
        dest->push_back(std::move(model));
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedModel, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedModel) throw;
    throw Error(Errc::MalformedModel, e.what());
  }
  if (auto v = j.find("version"); v != j.end() && *v != out.version()) {
    throw Error(Errc::MalformedModel, "model set version does not match its models");
  }
  return out;
}

ModelTraining train_models(const Dataset& ds, const AppConfig& config, const std::set<int>& ks,
                           const std::vector<std::string>& targets) {
  if (ds.rows() == 0) throw Error(Errc::EmptyDataset, "dataset has no rows");
  const RefreshSchedule& schedule = ds.provenance.schedule;
  std::set<int> indices = ks;
  if (indices.empty()) {
    for (int k = 1; k <= static_cast<int>(schedule.size()); ++k) indices.insert(k);
  }

  ModelTraining out;
  out.models.schedule = schedule;
  out.correlations = correlation_matrix(ds);
  for (const auto& target : targets) {
    auto& dest = target == kCpuTarget ? out.models.cpu : out.models.mem;
    if (target != kCpuTarget && target != kMemoryTarget) {
      throw Error(Errc::TargetMissing, "unsupported target \"" + target + "\"");
    }
    for (int k : indices) {
      TrainOptions opts;
      opts.threshold = config.threshold;
      opts.split = SplitSpec{config.test_fraction, config.split_seed};
      opts.pool = FeaturePool::mid_run({k});
      try {
        auto result = train_target(ds, target, opts);
        for (auto& w : result.warnings) out.warnings.push_back(target + " t" + std::to_string(k) + ": " + w);
        dest.push_back(std::move(result.fit.model));
      } catch (const Error& e) {
        if (e.code() != Errc::NoFeaturesSelected) throw;
        out.warnings.push_back(target + " t" + std::to_string(k) + ": " + e.what());
      }
    }
    if (dest.empty()) {
      throw Error(Errc::NoFeaturesSelected, target + ": no refresh offset yields a feature above the threshold");
    }
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::IoError, path + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << j.dump() << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

MetricStore Workspace::load_store() const {
  MetricStore store;
  if (!std::filesystem::exists(metrics_path())) return store;
  store.ingest(read_json_file(metrics_path()));
  return store;
}

void Workspace::save_store(const MetricStore& store) const { write_json_file(store.to_json(), metrics_path()); }

RunRegistry Workspace::load_registry() const {
  RunRegistry registry;
  if (!std::filesystem::exists(runs_path())) return registry;
  registry.import_records(parse_manifest(read_json_file(runs_path())));
  return registry;
}

void Workspace::save_registry(const RunRegistry& registry) const {
  write_json_file(to_manifest(registry.list_runs()), runs_path());
}

ModelSet Workspace::load_models() const {
  if (!std::filesystem::exists(models_path())) {
    throw Error(Errc::ModelUnavailable, "no trained models in " + dir_ + "; run `burnseer train` first");
  }
  return model_set_from_json(read_json_file(models_path()));
}

void Workspace::save_models(const ModelSet& models) const { write_json_file(to_json(models), models_path()); }

namespace {

json matrix_to_json(const CorrelationMatrix& cm) {
  json values = json::array();
  for (Eigen::Index i = 0; i < cm.values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < cm.values.cols(); ++j) {
      const double v = cm.values(i, j);
      row.push_back(is_absent(v) ? json(nullptr) : json(v));
    }
    values.push_back(std::move(row));
  }
  return json{{"names", cm.names}, {"values", std::move(values)}};
}

std::string env_name(const std::string& long_name) {
  std::string out = "BURNSEER_";
  for (char c : long_name) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string fmt_time(const std::optional<TimestampMs>& t) {
  return t ? format_double(to_seconds(*t)) : "NA";
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

// Everything the command line can set; rebuilt for each parse pass.
struct Cli {
  AppConfig cfg;
  bool json = false;
  std::string config_file;
  std::string schedule_text = "45,300";
  std::string policy_mode = "manual";

  std::vector<std::string> ingest_files;
  std::string manifest_file;
  std::vector<std::string> status_filter;

  std::size_t sim_runs = 900;
  double sim_fail = 0.05;
  std::uint64_t sim_seed = 7;
  double sim_noise = 0.1;
  std::string out_metrics, out_runs, out_truth;

  std::string out_dataset;
  std::string in_dataset;
  std::size_t top = 10;
  std::vector<std::string> targets;
  std::string schedule_features;

  std::string run_id;
  std::optional<double> at;

  std::size_t live_runs = 0;
  std::uint64_t live_seed = 1;
  double tick_period = 1.0;

  CLI::App app{"Resource-usage prediction for ensemble simulation runs", "burnseer"};
  CLI::App* ingest = nullptr;
  CLI::App* runs = nullptr;
  CLI::App* runs_import = nullptr;
  CLI::App* runs_list = nullptr;
  CLI::App* simulate = nullptr;
  CLI::App* build = nullptr;
  CLI::App* correlate = nullptr;
  CLI::App* train = nullptr;
  CLI::App* predict = nullptr;
  CLI::App* serve = nullptr;

  Cli() {
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.add_option("--data-dir", cfg.data_dir, "Directory holding metrics, runs, dataset and models");
    app.add_option("--config", config_file, "TOML config file (flags > BURNSEER_* env > config > defaults)");
    app.add_flag("--json", json, "Machine-readable output");

    ingest = app.add_subcommand("ingest", "Merge JSON metric dumps into the store");
    ingest->add_option("files", ingest_files, "Metric dump files")->required();

    runs = app.add_subcommand("runs", "Run registry");
    runs->require_subcommand(1);
    runs_import = runs->add_subcommand("import", "Import a JSON run manifest");
    runs_import->add_option("file", manifest_file, "Run manifest")->required();
    runs_list = runs->add_subcommand("list", "List runs");
    runs_list->add_option("--status", status_filter, "pending|running|completed|failed")->delimiter(',');

    simulate = app.add_subcommand("simulate", "Generate a synthetic fleet into the data directory");
    simulate->add_option("--runs", sim_runs, "Number of runs");
    simulate->add_option("--fail-fraction", sim_fail, "Probability a run fails");
    simulate->add_option("--seed", sim_seed, "Random seed");
    simulate->add_option("--noise", sim_noise, "Noise sd as a fraction of each law's mean");
    simulate->add_option("--out-metrics", out_metrics, "Also write the metric dump here");
    simulate->add_option("--out-runs", out_runs, "Also write the run manifest here");
    simulate->add_option("--out-truth", out_truth, "Write ground-truth totals (CSV) here");

    build = app.add_subcommand("build-dataset", "Build the tabular dataset from completed runs");
    build->add_option("--schedule", schedule_text, "Refresh offsets in seconds, e.g. 45,300");
    build->add_option("--out", out_dataset, "Output CSV (default <data-dir>/dataset.csv)");

    correlate = app.add_subcommand("correlate", "Pearson correlation matrix of a dataset");
    correlate->add_option("dataset", in_dataset, "Dataset CSV (default <data-dir>/dataset.csv)");
    correlate->add_option("--top", top, "Columns listed per target");

    train = app.add_subcommand("train", "Select features and fit least-squares models");
    train->add_option("dataset", in_dataset, "Dataset CSV (default <data-dir>/dataset.csv)");
    train->add_option("--target", targets, "cpu_usage_total and/or memory_usage_peak");
    train->add_option("--schedule-features", schedule_features, "Refresh offsets to fit, e.g. t1 or t1,t2");
    train->add_option("--threshold", cfg.threshold, "Minimum |r| for a feature (strict)");
    train->add_option("--test-fraction", cfg.test_fraction, "Held-out share of rows");
    train->add_option("--seed", cfg.split_seed, "Split seed");

    predict = app.add_subcommand("predict", "Predict totals for one run");
    predict->add_option("--run", run_id, "Run id")->required();
    predict->add_option("--at", at, "Seconds since run start (replays completed runs)");
    predict->add_option("--warmup", cfg.policy.warmup_seconds, "Warm-up seconds");

    serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--port", cfg.port, "TCP port");
    serve->add_option("--host", cfg.host, "Bind address");
    serve->add_option("--mode", policy_mode, "Default refresh mode: interval|manual|hybrid");
    serve->add_option("--interval", cfg.policy.interval_seconds, "Default refresh interval, seconds");
    serve->add_option("--warmup", cfg.policy.warmup_seconds, "Warm-up seconds");
    serve->add_option("--schedule", schedule_text, "Refresh offsets for POST /train");
    serve->add_option("--threshold", cfg.threshold, "Feature threshold for POST /train");
    serve->add_option("--seed", cfg.split_seed, "Split seed for POST /train");
    serve->add_option("--live", live_runs, "Simulated in-flight runs started with the service");
    serve->add_option("--live-seed", live_seed, "Seed for the simulated in-flight runs");
    serve->add_option("--tick", tick_period, "Auto-refresh tick period, seconds (0 disables)");
  }

  CLI::App* verb() const {
    for (auto* sub : app.get_subcommands()) return sub;
    return nullptr;
  }
};

// CLI11 alone ranks config files above the environment; layer env and config
// values here as extra arguments so the order is flags > env > config.
std::vector<std::string> layered_args(const std::vector<std::string>& args) {
  Cli probe;
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    probe.app.parse(rev);
  } catch (const CLI::ParseError&) {
    return args;  // the real pass reports it
  }

  std::string config_path = probe.config_file;
  if (config_path.empty()) {
    if (const char* e = std::getenv("BURNSEER_CONFIG")) config_path = e;
  }
  std::vector<CLI::ConfigItem> items;
  if (!config_path.empty()) {
    try {
      items = CLI::ConfigTOML().from_file(config_path);
    } catch (const CLI::Error& e) {
      throw Error(Errc::InvalidConfig, "config file " + config_path + ": " + e.what());
    }
  }

  auto extras_for = [&](const CLI::App* cmd, const std::vector<std::string>& section) {
    std::vector<std::string> extra;
    for (const CLI::Option* opt : cmd->get_options()) {
      if (opt->get_positional() || opt->get_lnames().empty() || opt->get_expected_min() == 0) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "config" || name == "help" || opt->count() > 0) continue;
      std::vector<std::string> values;
      if (const char* e = std::getenv(env_name(name).c_str()); e && *e) {
        values.emplace_back(e);
      } else {
        for (const auto& item : items) {
          if (item.parents == section && item.name == name) values = item.inputs;
        }
      }
      if (!values.empty()) {
        std::string joined;
        for (const auto& v : values) joined += (joined.empty() ? "" : ",") + v;
        extra.push_back("--" + name + "=" + joined);
      }
    }
    return extra;
  };

  std::vector<std::string> out = extras_for(&probe.app, {});
  out.insert(out.end(), args.begin(), args.end());
  std::vector<std::string> section;
  for (const CLI::App* cmd = probe.verb(); cmd != nullptr;) {
    section.push_back(cmd->get_name());
    auto extra = extras_for(cmd, section);
    out.insert(out.end(), extra.begin(), extra.end());
    auto subs = cmd->get_subcommands();
    cmd = subs.empty() ? nullptr : subs.front();
  }
  return out;
}

class Output {
 public:
  Output(std::ostream& out, bool json) : out_(out), json_(json) {}
  bool json() const { return json_; }
  void emit(const nlohmann::json& j) { out_ << j.dump() << '\n'; }
  std::ostream& text() { return out_; }

 private:
  std::ostream& out_;
  bool json_;
};

Dataset load_dataset(const Cli& c, const Workspace& ws) {
  return read_csv_file(c.in_dataset.empty() ? ws.dataset_path() : c.in_dataset);
}

int cmd_ingest(const Cli& c, const Workspace& ws, Output& o) {
  MetricStore store = ws.load_store();
  json per_file = json::array();
  std::size_t ingested = 0;
  std::size_t rejected = 0;
  for (const auto& file : c.ingest_files) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::IoError, "cannot open " + file);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    auto report = store.ingest_text(text);
    json rej = json::array();
    for (const auto& r : report.rejected) {
      rej.push_back({{"metric", r.metric}, {"labels", r.labels}, {"code", to_string(r.code)}, {"detail", r.detail}});
      if (!o.json()) o.text() << "rejected " << r.metric << ": " << to_string(r.code) << ": " << r.detail << '\n';
    }
    ingested += report.ingested;
    rejected += report.rejected.size();
    per_file.push_back({{"file", file}, {"ingested", report.ingested}, {"rejected", std::move(rej)}});
  }
  ws.save_store(store);
  if (o.json()) {
    o.emit({{"files", per_file}, {"ingested", ingested}, {"rejected", rejected}, {"series", store.series_count()}});
  } else {
    o.text() << "ingested " << ingested << " series, rejected " << rejected << "; store holds "
             << store.series_count() << " series\n";
  }
  return 0;
}

int cmd_runs_import(const Cli& c, const Workspace& ws, Output& o) {
  RunRegistry registry = ws.load_registry();
  const auto records = parse_manifest(read_json_file(c.manifest_file));
  registry.import_records(records);
  ws.save_registry(registry);
  if (o.json()) {
    o.emit({{"imported", records.size()}, {"runs", registry.size()}});
  } else {
    o.text() << "imported " << records.size() << " runs; registry holds " << registry.size() << '\n';
  }
  return 0;
}

int cmd_runs_list(const Cli& c, const Workspace& ws, Output& o) {
  StatusFilter filter;
  for (const auto& s : c.status_filter) filter.insert(parse_run_status(s));
  if (filter.empty()) filter = kAllStatuses;
  const auto runs = ws.load_registry().list_runs(filter);
  if (o.json()) {
    o.emit(to_manifest(runs));
    return 0;
  }
  o.text() << "run_id\tstatus\tstart\tstop\truntime\tpod\tnode\n";
  for (const auto& r : runs) {
    o.text() << r.run_id << '\t' << to_string(r.status) << '\t' << fmt_time(r.start) << '\t'
             << fmt_time(r.stop) << '\t' << fmt_opt(r.runtime_seconds()) << '\t' << r.pod << '\t' << r.node
             << '\n';
  }
  return 0;
}

int cmd_simulate(const Cli& c, const Workspace& ws, Output& o) {
  GroundTruth truth = GroundTruth::defaults();
  FleetSpec spec = FleetSpec::defaults();
  spec.n_runs = c.sim_runs;
  truth.fail_fraction = c.sim_fail;
  truth.seed = c.sim_seed;
  if (!(c.sim_noise >= 0.0)) throw Error(Errc::InvalidSpec, "noise must be >= 0");
  truth.cpu_noise_sd = c.sim_noise * law_mean(truth.cpu_law, spec);
  truth.mem_noise_sd = c.sim_noise * law_mean(truth.mem_law, spec);
  const Fleet fleet = generate_fleet(truth, spec);

  MetricStore store;
  RunRegistry registry;
  fleet.load_into(store, registry);
  ws.save_store(store);
  ws.save_registry(registry);
  if (!c.out_metrics.empty()) write_json_file(to_dump(fleet.series), c.out_metrics);
  if (!c.out_runs.empty()) write_json_file(to_manifest(fleet.runs), c.out_runs);
  if (!c.out_truth.empty()) {
    std::ofstream out(c.out_truth, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + c.out_truth);
    write_truth_csv(fleet.truth, out);
  }

  const auto completed = fleet.count(RunStatus::Completed);
  const auto failed = fleet.count(RunStatus::Failed);
  if (o.json()) {
    o.emit({{"runs", fleet.runs.size()},
            {"completed", completed},
            {"failed", failed},
            {"series", store.series_count()},
            {"seed", c.sim_seed},
            {"registry_snapshot", registry.snapshot_id()},
            {"store_snapshot", store.snapshot_id()}});
  } else {
    o.text() << "simulated " << fleet.runs.size() << " runs (" << completed << " completed, " << failed
             << " failed), " << store.series_count() << " series\n";
  }
  return 0;
}

int cmd_build(const Cli& c, const Workspace& ws, Output& o) {
  const auto schedule = RefreshSchedule::parse(c.schedule_text);
  const MetricStore store = ws.load_store();
  const RunRegistry registry = ws.load_registry();
  BuildReport report;
  const Dataset ds = DatasetBuilder(store, registry).build_dataset(schedule, {RunStatus::Completed}, &report);
  const std::string path = c.out_dataset.empty() ? ws.dataset_path() : c.out_dataset;
  write_csv_file(ds, path);
  if (o.json()) {
    o.emit({{"path", path},
            {"rows", report.rows},
            {"columns", ds.columns.size()},
            {"total_runs", report.total_runs},
            {"excluded", report.excluded},
            {"schedule", schedule.to_string()},
            {"warnings", report.warnings}});
  } else {
    o.text() << "wrote " << report.rows << " rows x " << ds.columns.size() << " columns to " << path << " ("
             << report.excluded << " of " << report.total_runs << " runs excluded, " << report.warnings.size()
             << " warnings)\n";
  }
  return 0;
}

int cmd_correlate(const Cli& c, const Workspace& ws, Output& o) {
  const Dataset ds = load_dataset(c, ws);
  const auto cm = correlation_matrix(ds);
  if (o.json()) {
    o.emit(matrix_to_json(cm));
    return 0;
  }
  for (auto target : {kCpuTarget, kMemoryTarget}) {
    const auto ti = cm.index_of(target);
    if (!ti) continue;
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t i = 0; i < cm.names.size(); ++i) {
      const double r = cm.values(*ti, static_cast<Eigen::Index>(i));
      if (static_cast<Eigen::Index>(i) != *ti && !is_absent(r)) ranked.emplace_back(r, cm.names[i]);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.first) > std::abs(b.first); });
    o.text() << target << '\n';
    for (std::size_t i = 0; i < std::min(c.top, ranked.size()); ++i) {
      o.text() << "  " << ranked[i].second << '\t' << format_double(ranked[i].first) << '\n';
    }
  }
  return 0;
}

std::set<int> parse_schedule_features(const std::string& text, const RefreshSchedule& schedule) {
  std::set<int> ks;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    int k = 0;
    const bool ok = tok.size() > 1 && tok[0] == 't' &&
                    std::from_chars(tok.data() + 1, tok.data() + tok.size(), k).ptr == tok.data() + tok.size();
    if (!ok || k < 1 || k > static_cast<int>(schedule.size())) {
      throw Error(Errc::InvalidConfig, "--schedule-features \"" + tok + "\" is not one of t1..t" +
                                           std::to_string(schedule.size()));
    }
    ks.insert(k);
  }
  return ks;
}

int cmd_train(const Cli& c, const Workspace& ws, Output& o, std::ostream& err) {
  const Dataset ds = load_dataset(c, ws);
  if (ds.rows() == 0) throw Error(Errc::EmptyDataset, "dataset has no rows");
  const auto ks = parse_schedule_features(c.schedule_features, ds.provenance.schedule);
  std::vector<std::string> targets = c.targets;
  if (targets.empty()) targets = {std::string(kCpuTarget), std::string(kMemoryTarget)};
  for (const auto& t : targets) {
    if (t != kCpuTarget && t != kMemoryTarget) {
      throw Error(Errc::InvalidConfig, "--target must be " + std::string(kCpuTarget) + " or " +
                                           std::string(kMemoryTarget));
    }
  }
  auto training = train_models(ds, c.cfg, ks, targets);

  // Keep the untouched target's models when they share the schedule.
  ModelSet models = training.models;
  try {
    ModelSet previous = ws.load_models();
    if (previous.schedule == models.schedule) {
      if (std::find(targets.begin(), targets.end(), kCpuTarget) == targets.end()) models.cpu = previous.cpu;
      if (std::find(targets.begin(), targets.end(), kMemoryTarget) == targets.end()) models.mem = previous.mem;
    }
  } catch (const Error&) {
  }
  ws.save_models(models);

  for (const auto& w : training.warnings) err << "warning: " << w << '\n';
  if (o.json()) {
    o.emit({{"models", to_json(training.models)}, {"warnings", training.warnings}});
  } else {
    o.text() << to_json(training.models).dump(2) << '\n';
  }
  return 0;
}

int cmd_predict(const Cli& c, const Workspace& ws, Output& o) {
  const MetricStore store = ws.load_store();
  const RunRegistry registry = ws.load_registry();
  const ModelSet models = ws.load_models();
  const RunRecord run = registry.get(c.run_id);
  if (!run.start || run.status == RunStatus::Pending) {
    throw Error(Errc::RunNotRunning, run.run_id + " has not started");
  }
  if (c.at && !(*c.at >= 0.0)) throw Error(Errc::InvalidConfig, "--at must be >= 0");

  // Replay against a scratch registry in which the run is still in flight.
  RunRecord replay = run;
  replay.status = RunStatus::Running;
  replay.stop.reset();
  RunRegistry scratch;
  scratch.import_records({replay});
  Predictor predictor(store, scratch);
  predictor.start_tracking(run.run_id, c.cfg.policy, models.cpu, models.mem);

  TimestampMs now = 0;
  if (c.at) {
    now = *run.start + to_ms(*c.at);
  } else if (run.status == RunStatus::Running) {
    now = system_now();
  } else if (run.status == RunStatus::Completed) {
    now = *run.stop;
  } else {
    throw Error(Errc::RunNotRunning, run.run_id + " failed; pass --at to replay it");
  }
  if (run.status == RunStatus::Completed && now >= *run.stop) scratch.mark_finished(run.run_id, run.stop);

  const PredictionRecord r = predictor.request_refresh(run.run_id, now);
  if (o.json()) {
    o.emit(to_json(r));
  } else {
    o.text() << (r.actual ? "actual" : "predicted") << " totals for " << r.run_id << " at "
             << format_double(r.refresh_time) << " s\n"
             << "  cpu_usage_total\t" << format_double(r.predicted_cpu_total) << " CPU-s\n"
             << "  memory_usage_peak\t" << format_double(r.predicted_memory_peak) << " bytes\n";
    if (!r.actual) {
      o.text() << "  features at\t" << format_double(r.cpu_feature_offset) << " s (cpu), "
               << format_double(r.mem_feature_offset) << " s (memory)\n";
    }
  }
  return 0;
}

int cmd_serve(const Cli& c, const Workspace& ws, Output& o) {
  std::optional<ModelSet> models;
  try {
    models = ws.load_models();
  } catch (const Error& e) {
    if (e.code() != Errc::ModelUnavailable) throw;
  }
  ServiceOptions opts;
  opts.live_runs = c.live_runs;
  opts.live_seed = c.live_seed;
  opts.tick_period_seconds = c.tick_period;

  block_shutdown_signals();
  Service service(c.cfg, ws.load_store(), ws.load_registry(), std::move(models), system_now, opts);
  const int port = service.start(c.cfg.host, c.cfg.port);
  if (o.json()) {
    o.emit({{"listening", true}, {"host", c.cfg.host}, {"port", port}});
  } else {
    o.text() << "listening on http://" << c.cfg.host << ':' << port << '\n';
  }
  o.text().flush();
  wait_for_shutdown_signal();
  service.stop();
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  bool json_errors = std::find(args.begin(), args.end(), "--json") != args.end();
  auto fail = [&](const Error& e, int code) {
    err << "error: " << e.what() << '\n';
    if (json_errors) out << json{{"error", {{"code", to_string(e.code())}, {"message", e.detail()}}}}.dump() << '\n';
    return code;
  };

  Cli c;
  try {
    auto layered = layered_args(args);
    std::vector<std::string> rev(layered.rbegin(), layered.rend());
    c.app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << c.app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << c.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (c.verb() == nullptr) {
      return fail(Error(Errc::UnknownCommand, "expected one of ingest, runs, simulate, build-dataset, correlate, "
                                              "train, predict, serve"),
                  2);
    }
    return fail(Error(Errc::InvalidConfig, e.what()), 2);
  } catch (const Error& e) {
    return fail(e, 2);
  }

  try {
    c.cfg.schedule = RefreshSchedule::parse(c.schedule_text);
    c.cfg.policy.mode = parse_refresh_mode(c.policy_mode);
    c.cfg.validate();
    const Workspace ws(c.cfg.data_dir);
    Output o(out, c.json);
    const CLI::App* verb = c.verb();
    if (verb == c.ingest) return cmd_ingest(c, ws, o);
    if (verb == c.runs) {
      return c.runs_import->parsed() ? cmd_runs_import(c, ws, o) : cmd_runs_list(c, ws, o);
    }
    if (verb == c.simulate) return cmd_simulate(c, ws, o);
    if (verb == c.build) return cmd_build(c, ws, o);
    if (verb == c.correlate) return cmd_correlate(c, ws, o);
    if (verb == c.train) return cmd_train(c, ws, o, err);
    if (verb == c.predict) return cmd_predict(c, ws, o);
    if (verb == c.serve) return cmd_serve(c, ws, o);
    return fail(Error(Errc::UnknownCommand, verb->get_name()), 2);
  } catch (const PredictionNotReady& e) {
    err << "error: " << e.what() << '\n';
    if (json_errors) {
      out << json{{"error", {{"code", "PredictionNotReady"}, {"message", e.detail()},
                             {"remaining_seconds", e.remaining_seconds()}}}}.dump()
          << '\n';
    }
    return 1;
  } catch (const Error& e) {
    return fail(e, 1);
  }
}

}  // namespace burnseer
