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

#include "burnseer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "burnseer/error.hpp"
#include "numfmt.hpp"

namespace burnseer {

double Law::evaluate(const RunInputs& inputs) const {
  const auto v = inputs.values();
  double out = intercept;
  for (std::size_t i = 0; i < v.size(); ++i) out += coefficients[i] * v[i];
  return out;
}

GroundTruth GroundTruth::defaults() {
  GroundTruth t;
  // surface_moisture, wind_moisture, wind_direction, wind_speed,
  // sim_time, timestep, run_max_mem_rss_bytes, area
  // CPU is driven mostly by simulated time and memory by the RSS cap; the
  // negative intercepts keep the laws' spread large next to 10% noise.
  t.cpu_law = {-150.0, {-200.0, 150.0, 0.05, 10.0, 1.6, -40.0, 5e-9, 0.002}};
  t.mem_law = {-5e8, {4e7, 2e7, 1e5, 3e6, 1e5, -3e7, 0.32, 2500.0}};
  return t;
}

FleetSpec FleetSpec::defaults() {
  FleetSpec s;
  s.input_ranges = {Range{0.05, 0.35}, Range{0.05, 0.35},  Range{0.0, 359.0},   Range{1.0, 15.0},
                    Range{300.0, 3600.0}, Range{0.5, 2.0}, Range{2e9, 32e9}, Range{1e4, 2.5e5}};
  return s;
}

double law_mean(const Law& law, const FleetSpec& spec) {
  double out = law.intercept;
  for (std::size_t i = 0; i < RunInputs::kFieldCount; ++i) {
    out += law.coefficients[i] * 0.5 * (spec.input_ranges[i].lo + spec.input_ranges[i].hi);
  }
  return out;
}

void validate(const GroundTruth& truth, const FleetSpec& spec) {
  auto bad = [](const std::string& what) { return Error(Errc::InvalidSpec, what); };
  if (spec.n_runs < 1) throw bad("n_runs must be >= 1");
  if (!(spec.sample_period > 0.0)) throw bad("sample_period must be > 0");
  if (spec.nodes < 1 || spec.ensemble_size < 1) throw bad("pool sizes must be >= 1");
  if (!(spec.start_spacing >= 0.0)) throw bad("start_spacing must be >= 0");
  if (!(spec.runtime_factor.lo >= 1.0 && spec.runtime_factor.hi >= spec.runtime_factor.lo)) {
    throw bad("runtime_factor must satisfy 1 <= lo <= hi");
  }
  if (!(truth.fail_fraction >= 0.0 && truth.fail_fraction < 1.0)) {
    throw bad("fail_fraction must be in [0, 1)");
  }
  if (!(truth.cpu_noise_sd >= 0.0 && truth.mem_noise_sd >= 0.0)) throw bad("noise_sd must be >= 0");

  // Corners of the input box must be valid inputs, and both laws positive
  // on all of them (laws are linear, so corners bound the range).
  const auto n = RunInputs::kFieldCount;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(spec.input_ranges[i].hi >= spec.input_ranges[i].lo)) {
      throw bad("input range " + std::string(RunInputs::field_names()[i]) + " is inverted");
    }
  }
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    std::array<double, RunInputs::kFieldCount> v{};
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (mask >> i) & 1U ? spec.input_ranges[i].hi : spec.input_ranges[i].lo;
    }
    const auto inputs = RunInputs::from_values(v);
    try {
      inputs.validate();
    } catch (const Error& e) {
      throw bad("input range outside valid inputs: " + e.detail());
    }
    if (!(truth.cpu_law.evaluate(inputs) > 0.0) || !(truth.mem_law.evaluate(inputs) > 0.0)) {
      throw bad("resource laws must be positive over the input ranges");
    }
  }
}

namespace {

std::string indexed(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i);
  return buf;
}

MetricSeries make_series(const std::string& metric, const RunRecord& r, SampleKind kind) {
  MetricSeries s;
  s.metric = metric;
  s.labels = {{"pod", r.pod}, {"node", r.node}, {"ensemble", r.ensemble_id}};
  s.kind = kind;
  return s;
}

}  // namespace

GeneratedRun generate_run(const GroundTruth& truth, const FleetSpec& spec, std::mt19937_64& rng,
                          std::size_t index) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](Range r) { return r.lo + (r.hi - r.lo) * unit(rng); };
  // multiplicative jitter, never negative
  auto jitter = [&](double sd) { return std::max(0.0, 1.0 + sd * normal(rng)); };

  GeneratedRun out;
  RunRecord& rec = out.record;
  rec.run_id = indexed("run", index);
  rec.ensemble_id = indexed("ens", index / spec.ensemble_size);
  rec.pod = indexed("fire-pod", index);
  rec.node = indexed("node", index % spec.nodes);

  std::array<double, RunInputs::kFieldCount> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = uniform(spec.input_ranges[i]);
  if (spec.collinear) v[1] = 0.8 * v[0];
  rec.inputs = RunInputs::from_values(v);

  const bool failed = unit(rng) < truth.fail_fraction;
  const double cpu_law = truth.cpu_law.evaluate(rec.inputs);
  const double mem_law = truth.mem_law.evaluate(rec.inputs);
  const double cpu_total = std::max(0.0, cpu_law + truth.cpu_noise_sd * normal(rng));
  const double mem_peak = std::max(0.0, mem_law + truth.mem_noise_sd * normal(rng));
  const double runtime = rec.inputs.sim_time * uniform(spec.runtime_factor);
  const double cpu_shape = uniform({0.6, 1.0});   // u^shape: concave .. linear
  const double mem_ramp = uniform({0.2, 0.8});    // fraction of runtime to reach peak
  const double fail_at = uniform({0.2, 0.9});
  const std::int64_t threads = std::int64_t{4} << static_cast<int>(unit(rng) * 3.0);  // 4, 8, 16

  const double rx_per_cpu = 220.0 * jitter(0.05);
  const double tx_per_cpu = 180.0 * jitter(0.05);
  const double rx_drop = 0.02 * jitter(0.2);
  const double tx_drop = 0.01 * jitter(0.2);
  const double reads_per_cpu = 15.0 * jitter(0.1);
  const double writes_per_cpu = 8.0 * jitter(0.1);
  const double read_bytes_per_io = 65536.0 * uniform({0.5, 1.5});
  const double write_bytes_per_io = 65536.0 * uniform({0.5, 1.5});
  const double cache_fraction = uniform({0.05, 0.15});

  const TimestampMs start = spec.base_start + to_ms(static_cast<double>(index) * spec.start_spacing);
  const TimestampMs stop = start + std::max<TimestampMs>(1, to_ms(runtime));
  rec.start = start;
  rec.threads = threads;
  rec.status = failed ? RunStatus::Failed : RunStatus::Completed;
  if (!failed) rec.stop = stop;

  const TimestampMs last = failed ? start + to_ms(fail_at * to_seconds(stop - start)) : stop;
  std::vector<TimestampMs> times;
  for (std::int64_t i = 0;; ++i) {
    const TimestampMs t = start + to_ms(static_cast<double>(i) * spec.sample_period);
    if (t >= last) break;
    times.push_back(t);
  }
  times.push_back(last);

  const char* counters[] = {"cpu_usage",           "received_packets",         "transmitted_packets",
                            "received_packets_dropped", "transmitted_packets_dropped", "io_reads",
                            "io_writes",           "io_reads_writes",          "throughput_read",
                            "throughput_write",    "throughput_read_write"};
  const char* gauges[] = {"cpu_requests",     "cpu_limits",         "memory_usage",     "memory_requests",
                          "memory_limits",    "memory_usage_rss",   "memory_usage_cache",
                          "receive_bandwidth", "transmit_bandwidth"};
  std::map<std::string, MetricSeries> by_name;
  for (auto m : counters) by_name.emplace(m, make_series(m, rec, SampleKind::Counter));
  for (auto m : gauges) by_name.emplace(m, make_series(m, rec, SampleKind::Gauge));
  auto push = [&by_name](const char* m, TimestampMs t, double value) {
    by_name.at(m).samples.push_back({t, value});
  };

  const double span = static_cast<double>(stop - start);
  double prev_rx_bytes = 0.0;
  double prev_tx_bytes = 0.0;
  TimestampMs prev_t = start;
  for (TimestampMs t : times) {
    const double u = static_cast<double>(t - start) / span;
    const double progress = std::pow(u, cpu_shape);  // exactly 0 at start, 1 at stop
    const double cpu = cpu_total * progress;
    const double mem = u >= mem_ramp ? mem_peak : mem_peak * (0.1 + 0.9 * u / mem_ramp);

    const double rx = std::floor(cpu * rx_per_cpu);
    const double tx = std::floor(cpu * tx_per_cpu);
    const double reads = std::floor(cpu * reads_per_cpu);
    const double writes = std::floor(cpu * writes_per_cpu);
    const double read_bytes = reads * read_bytes_per_io;
    const double write_bytes = writes * write_bytes_per_io;

    push("cpu_usage", t, cpu);
    push("received_packets", t, rx);
    push("transmitted_packets", t, tx);
    push("received_packets_dropped", t, std::floor(rx * rx_drop));
    push("transmitted_packets_dropped", t, std::floor(tx * tx_drop));
    push("io_reads", t, reads);
    push("io_writes", t, writes);
    push("io_reads_writes", t, reads + writes);
    push("throughput_read", t, read_bytes);
    push("throughput_write", t, write_bytes);
    push("throughput_read_write", t, read_bytes + write_bytes);

    push("cpu_requests", t, static_cast<double>(threads));
    push("cpu_limits", t, 2.0 * static_cast<double>(threads));
    push("memory_usage", t, mem);
    push("memory_requests", t, 0.5 * rec.inputs.run_max_mem_rss_bytes);
    push("memory_limits", t, rec.inputs.run_max_mem_rss_bytes);
    push("memory_usage_rss", t, 0.85 * mem);
    push("memory_usage_cache", t, cache_fraction * mem);

    // bytes/s since the previous sample, 1500-byte packets
    const double dt = to_seconds(t - prev_t);
    push("receive_bandwidth", t, dt > 0.0 ? (rx * 1500.0 - prev_rx_bytes) / dt : 0.0);
    push("transmit_bandwidth", t, dt > 0.0 ? (tx * 1500.0 - prev_tx_bytes) / dt : 0.0);
    prev_rx_bytes = rx * 1500.0;
    prev_tx_bytes = tx * 1500.0;
    prev_t = t;
  }

  for (auto& [name, s] : by_name) out.series.push_back(std::move(s));
  out.truth = {rec.run_id, rec.status, cpu_law, mem_law, cpu_total, mem_peak};
  return out;
}

std::size_t Fleet::count(RunStatus status) const {
  return static_cast<std::size_t>(std::count_if(
      runs.begin(), runs.end(), [status](const RunRecord& r) { return r.status == status; }));
}

void Fleet::load_into(MetricStore& store, RunRegistry& registry) const {
  auto report = store.ingest(series);
  if (!report.rejected.empty()) {
    throw Error(report.rejected.front().code, "simulated series rejected: " + report.rejected.front().detail);
  }
  registry.import_records(runs);
}

Fleet generate_fleet(const GroundTruth& truth, const FleetSpec& spec) {
  validate(truth, spec);
  std::mt19937_64 rng(truth.seed);
  Fleet fleet;
  fleet.runs.reserve(spec.n_runs);
  fleet.truth.reserve(spec.n_runs);
  for (std::size_t i = 0; i < spec.n_runs; ++i) {
    auto run = generate_run(truth, spec, rng, i);
    fleet.runs.push_back(std::move(run.record));
    fleet.truth.push_back(run.truth);
    std::move(run.series.begin(), run.series.end(), std::back_inserter(fleet.series));
  }
  return fleet;
}

void write_truth_csv(const std::vector<TruthRow>& rows, std::ostream& out) {
  out << "run_id,status,cpu_law,mem_law,cpu_usage_total,memory_usage_peak\n";
  for (const auto& r : rows) {
    out << r.run_id << ',' << to_string(r.status) << ',' << detail::format_double(r.cpu_law_value) << ','
        << detail::format_double(r.mem_law_value) << ',' << detail::format_double(r.cpu_total) << ','
        << detail::format_double(r.memory_peak) << '\n';
  }
}

}  // namespace burnseer
