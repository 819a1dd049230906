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

#include "burnseer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "burnseer/error.hpp"
#include "numfmt.hpp"

namespace burnseer {

namespace {

using Src = CatalogEntry::Source;

CatalogEntry query(std::string_view column, Aggregator agg, SampleKind kind) {
  return CatalogEntry{.column = column, .source = Src::Query, .metric = column,
                      .aggregator = agg, .kind = kind};
}

CatalogEntry derived(std::string_view column, std::string_view num, std::string_view den,
                     bool per_second) {
  return CatalogEntry{.column = column, .source = Src::Derived, .numerator = num,
                      .denominator = den, .per_second = per_second};
}

}  // namespace

const std::vector<CatalogEntry>& metric_catalog() {
  using A = Aggregator;
  using K = SampleKind;
  static const std::vector<CatalogEntry> catalog{
      // CPU quota
      query("cpu_usage", A::Increase, K::Counter),
      query("cpu_requests", A::Last, K::Gauge),
      derived("cpu_requests_pct", "cpu_usage", "cpu_requests", true),
      query("cpu_limits", A::Last, K::Gauge),
      derived("cpu_limits_pct", "cpu_usage", "cpu_limits", true),
      // memory quota
      query("memory_usage", A::MaxOverTime, K::Gauge),
      query("memory_requests", A::MinOverTime, K::Gauge),
      derived("memory_requests_pct", "memory_usage", "memory_requests", false),
      query("memory_limits", A::Last, K::Gauge),
      derived("memory_limits_pct", "memory_usage", "memory_limits", false),
      query("memory_usage_rss", A::MaxOverTime, K::Gauge),
      query("memory_usage_cache", A::MaxOverTime, K::Gauge),
      // network
      query("receive_bandwidth", A::AvgOverTime, K::Gauge),
      query("transmit_bandwidth", A::AvgOverTime, K::Gauge),
      query("received_packets", A::Increase, K::Counter),
      query("transmitted_packets", A::Increase, K::Counter),
      query("received_packets_dropped", A::Increase, K::Counter),
      query("transmitted_packets_dropped", A::Increase, K::Counter),
      // storage IO
      query("io_reads", A::Increase, K::Counter),
      query("io_writes", A::Increase, K::Counter),
      query("io_reads_writes", A::Increase, K::Counter),
      query("throughput_read", A::Increase, K::Counter),
      query("throughput_write", A::Increase, K::Counter),
      query("throughput_read_write", A::Increase, K::Counter),
  };
  return catalog;
}

std::size_t catalog_position(std::string_view column) {
  const auto& catalog = metric_catalog();
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (catalog[i].column == column) return i;
  }
  throw Error(Errc::SchemaMismatch, "catalog lacks " + std::string(column));
}

const CatalogEntry* find_catalog_entry(std::string_view column) {
  for (const auto& e : metric_catalog()) {
    if (e.column == column) return &e;
  }
  return nullptr;
}

RefreshSchedule::RefreshSchedule(std::vector<double> offsets) : offsets_(std::move(offsets)) {
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    const double t = offsets_[i];
    if (!std::isfinite(t)) throw Error(Errc::InvalidSchedule, "non-finite offset");
    if (i == 0 && t < kWarmupSeconds) {
      throw Error(Errc::InvalidSchedule, "first offset " + detail::format_double(t) +
                                             " s is inside the 45 s warm-up");
    }
    if (i > 0 && t <= offsets_[i - 1]) {
      throw Error(Errc::InvalidSchedule, "offsets must be strictly increasing (" +
                                             detail::format_double(offsets_[i - 1]) + " then " +
                                             detail::format_double(t) + ")");
    }
  }
}

RefreshSchedule RefreshSchedule::parse(std::string_view text) {
  std::vector<double> offsets;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto token = text.substr(0, comma);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    auto v = detail::parse_double(token);
    if (!v) throw Error(Errc::InvalidSchedule, "bad offset \"" + std::string(token) + "\"");
    offsets.push_back(*v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return RefreshSchedule(std::move(offsets));
}

std::string RefreshSchedule::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    if (i) out += ',';
    out += detail::format_double(offsets_[i]);
  }
  return out;
}

std::string partial_column(std::string_view base, int k) {
  return std::string(base) + "_t" + std::to_string(k);
}

std::string ratio_column(std::string_view base, int k) { return partial_column(base, k) + "_ratio"; }

std::string duration_column(int k) { return "duration_t" + std::to_string(k); }

namespace {

// Splits "<base>_t<k>" into base and k; k has no leading zeros.
std::optional<std::pair<std::string_view, int>> split_refresh_suffix(std::string_view name) {
  auto pos = name.rfind("_t");
  if (pos == std::string_view::npos || pos == 0) return std::nullopt;
  auto digits = name.substr(pos + 2);
  if (digits.empty() || digits.size() > 6 || digits.front() == '0') return std::nullopt;
  int k = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    k = k * 10 + (c - '0');
  }
  return std::make_pair(name.substr(0, pos), k);
}

bool is_input_field(std::string_view name) {
  const auto& names = RunInputs::field_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

std::optional<ColumnSpec> try_parse_column(std::string_view name) {
  if (name == "run_id") return ColumnSpec{ColumnKind::RunId, std::string(name)};
  if (name == "runtime") return ColumnSpec{ColumnKind::Runtime, std::string(name)};
  if (name == kCpuTarget || name == kMemoryTarget) {
    return ColumnSpec{ColumnKind::Target, std::string(name)};
  }
  if (is_input_field(name)) return ColumnSpec{ColumnKind::Input, std::string(name)};
  if (find_catalog_entry(name)) return ColumnSpec{ColumnKind::Full, std::string(name)};

  constexpr std::string_view kRatio = "_ratio";
  const bool ratio = name.ends_with(kRatio);
  auto stem = ratio ? name.substr(0, name.size() - kRatio.size()) : name;
  auto split = split_refresh_suffix(stem);
  if (!split) return std::nullopt;
  auto [base, k] = *split;
  if (!ratio && base == "duration") return ColumnSpec{ColumnKind::Duration, "duration", k};
  if (!find_catalog_entry(base)) return std::nullopt;
  return ColumnSpec{ratio ? ColumnKind::Ratio : ColumnKind::Partial, std::string(base), k};
}

ColumnSpec parse_column(std::string_view name) {
  auto spec = try_parse_column(name);
  if (!spec) throw Error(Errc::SchemaMismatch, "unknown column \"" + std::string(name) + "\"");
  return *spec;
}

bool computable_mid_run(const ColumnSpec& spec) {
  switch (spec.kind) {
    case ColumnKind::Input:
    case ColumnKind::Duration:
    case ColumnKind::Partial:
    case ColumnKind::Ratio:
      return true;
    default:
      return false;
  }
}

std::vector<std::string> dataset_schema(const RefreshSchedule& schedule) {
  std::vector<std::string> cols;
  for (auto name : RunInputs::field_names()) cols.emplace_back(name);
  cols.emplace_back("runtime");
  const auto& catalog = metric_catalog();
  for (const auto& e : catalog) cols.emplace_back(e.column);
  for (int k = 1; k <= static_cast<int>(schedule.size()); ++k) {
    cols.push_back(duration_column(k));
    for (const auto& e : catalog) cols.push_back(partial_column(e.column, k));
    for (const auto& e : catalog) cols.push_back(ratio_column(e.column, k));
  }
  cols.emplace_back(kCpuTarget);
  cols.emplace_back(kMemoryTarget);
  return cols;
}

double FeatureRow::at(std::string_view column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) {
    throw Error(Errc::SchemaMismatch, "row has no column \"" + std::string(column) + "\"");
  }
  return values(std::distance(columns.begin(), it));
}

std::optional<Eigen::Index> Dataset::index_of(std::string_view column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) return std::nullopt;
  return static_cast<Eigen::Index>(std::distance(columns.begin(), it));
}

Eigen::Index Dataset::require(std::string_view column) const {
  auto idx = index_of(column);
  if (!idx) throw Error(Errc::SchemaMismatch, "dataset has no column \"" + std::string(column) + "\"");
  return *idx;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.columns != b.columns || a.run_ids != b.run_ids || !(a.provenance == b.provenance)) {
    return false;
  }
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) return false;
  for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
      const double x = a.values(i, j);
      const double y = b.values(i, j);
      if (is_absent(x) != is_absent(y)) return false;
      if (!is_absent(x) && x != y) return false;
    }
  }
  return true;
}

std::vector<double> window_columns(const MetricStore& store, const RunRecord& run,
                                   TimestampMs start, TimestampMs end, bool partial) {
  const auto& catalog = metric_catalog();
  const Labels matchers{{"pod", run.pod}, {"node", run.node}};
  const double seconds = to_seconds(end - start);
  std::vector<double> out(catalog.size(), kAbsent);

  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& e = catalog[i];
    if (e.source != Src::Query) continue;
    auto found = store.find(e.metric, matchers);
    if (found.size() != 1) {
      throw Error(Errc::MissingMetric, std::string(e.column) + " for run " + run.run_id +
                                           (found.empty() ? " (no series)" : " (ambiguous series)"));
    }
    if (found.front().kind != e.kind) {
      throw Error(Errc::MissingMetric, std::string(e.column) + " for run " + run.run_id +
                                           " has the wrong sample kind");
    }
    try {
      out[i] = aggregate(found.front(), start, end, e.aggregator);
    } catch (const Error& err) {
      if (err.code() != Errc::EmptyWindow) throw;
      if (!partial) {
        throw Error(Errc::MissingMetric, std::string(e.column) + " for run " + run.run_id +
                                             " does not cover the run window");
      }
    }
  }

  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& e = catalog[i];
    if (e.source != Src::Derived) continue;
    const double num = out[catalog_position(e.numerator)];
    double den = out[catalog_position(e.denominator)];
    if (e.per_second) den *= seconds;
    if (!is_absent(num) && !is_absent(den) && den != 0.0) out[i] = num / den;
  }
  return out;
}

FeatureRow DatasetBuilder::build_row(const RunRecord& run, const RefreshSchedule& schedule,
                                     std::vector<std::string>* warnings) const {
  if (run.status != RunStatus::Completed || !run.start || !run.stop) {
    throw Error(Errc::RunNotCompleted, run.run_id + " is " + std::string(to_string(run.status)));
  }
  const TimestampMs start = *run.start;
  const TimestampMs stop = *run.stop;
  const double runtime = to_seconds(stop - start);
  const auto& catalog = metric_catalog();

  FeatureRow row;
  row.run_id = run.run_id;
  row.columns = dataset_schema(schedule);
  row.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(row.columns.size()), kAbsent);

  Eigen::Index c = 0;
  for (double v : run.inputs.values()) row.values(c++) = v;
  row.values(c++) = runtime;

  const auto full = window_columns(store_, run, start, stop, /*partial=*/false);
  for (double v : full) row.values(c++) = v;

  for (int k = 1; k <= static_cast<int>(schedule.size()); ++k) {
    const double tk = schedule.offset(k);
    row.values(c++) = tk;
    const auto n = static_cast<Eigen::Index>(catalog.size());
    if (tk >= runtime) {
      if (warnings) {
        warnings->push_back("ScheduleExceedsRuntime: run " + run.run_id + " t" + std::to_string(k) +
                            "=" + detail::format_double(tk) + " s >= runtime " +
                            detail::format_double(runtime) + " s");
      }
      c += 2 * n;
      continue;
    }
    const auto part = window_columns(store_, run, start, start + to_ms(tk), /*partial=*/true);
    for (double v : part) row.values(c++) = v;
    for (double v : part) row.values(c++) = is_absent(v) ? kAbsent : v / tk;
  }

  row.values(c++) = full[catalog_position("cpu_usage")];
  row.values(c++) = full[catalog_position("memory_usage")];
  return row;
}

Dataset DatasetBuilder::build_dataset(const RefreshSchedule& schedule, const StatusFilter& filter,
                                      BuildReport* report) const {
  const auto all = registry_.list_runs();
  Dataset ds;
  ds.columns = dataset_schema(schedule);
  ds.provenance = {registry_.snapshot_id(), store_.snapshot_id(), schedule};

  std::vector<FeatureRow> rows;
  BuildReport local;
  local.total_runs = all.size();
  for (const auto& run : all) {
    if (run.status != RunStatus::Completed || !filter.contains(run.status)) {
      ++local.excluded;
      continue;
    }
    rows.push_back(build_row(run, schedule, &local.warnings));
  }
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no completed runs");

  ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.run_ids.push_back(rows[i].run_id);
    ds.values.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
  }
  local.rows = rows.size();
  if (report) *report = std::move(local);
  return ds;
}

namespace {

constexpr std::string_view kProvenancePrefix = "# burnseer-dataset";

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  for (;;) {
    auto comma = line.find(',', pos);
    cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

std::string field(std::string_view line, std::string_view key) {
  const std::string pat = " " + std::string(key) + "=";
  auto pos = line.find(pat);
  if (pos == std::string_view::npos) return {};
  auto rest = line.substr(pos + pat.size());
  return std::string(rest.substr(0, rest.find(' ')));
}

}  // namespace

std::size_t write_csv(const Dataset& ds, std::ostream& out) {
  if (ds.columns.empty()) throw Error(Errc::SchemaMismatch, "empty schema");
  std::string text;
  text += std::string(kProvenancePrefix) + " registry=" + ds.provenance.registry_snapshot +
          " store=" + ds.provenance.store_snapshot + " schedule=" + ds.provenance.schedule.to_string() +
          "\n";
  text += "run_id";
  for (const auto& c : ds.columns) text += "," + c;
  text += '\n';
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    text += ds.run_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
      text += ',';
      const double v = ds.values(i, j);
      if (!is_absent(v)) text += detail::format_double(v);
    }
    text += '\n';
  }
  out << text;
  if (!out) throw Error(Errc::IoError, "failed to write dataset");
  return text.size();
}

Dataset read_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_provenance = false;
  std::vector<std::vector<double>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with('#')) {
      if (!have_header && line.starts_with(kProvenancePrefix)) {
        ds.provenance.registry_snapshot = field(line, "registry");
        ds.provenance.store_snapshot = field(line, "store");
        ds.provenance.schedule = RefreshSchedule::parse(field(line, "schedule"));
        have_provenance = true;
      }
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      if (cells.front() != "run_id") throw Error(Errc::SchemaMismatch, "first column must be run_id");
      for (std::size_t j = 1; j < cells.size(); ++j) {
        auto spec = parse_column(cells[j]);
        if (spec.kind == ColumnKind::RunId) throw Error(Errc::SchemaMismatch, "duplicate run_id column");
        std::string name(cells[j]);
        if (std::find(ds.columns.begin(), ds.columns.end(), name) != ds.columns.end()) {
          throw Error(Errc::SchemaMismatch, "duplicate column \"" + name + "\"");
        }
        ds.columns.push_back(std::move(name));
      }
      have_header = true;
      continue;
    }
    if (cells.size() != ds.columns.size() + 1) {
      throw Error(Errc::SchemaMismatch, "line " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(ds.columns.size() + 1));
    }
    ds.run_ids.emplace_back(cells[0]);
    std::vector<double> row(ds.columns.size(), kAbsent);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j].empty()) continue;
      auto v = detail::parse_double(cells[j]);
      if (!v) {
        throw Error(Errc::MalformedCell, "line " + std::to_string(line_no) + ", column \"" +
                                             ds.columns[j - 1] + "\": \"" + std::string(cells[j]) + "\"");
      }
      row[j - 1] = *v;
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(Errc::SchemaMismatch, "missing header line");

  ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < ds.columns.size(); ++j) {
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }

  if (!have_provenance) {
    // Recover the schedule from the duration columns of the first row.
    std::vector<double> offsets;
    for (int k = 1;; ++k) {
      auto idx = ds.index_of(duration_column(k));
      if (!idx || ds.rows() == 0) break;
      offsets.push_back(ds.values(0, *idx));
    }
    ds.provenance.schedule = RefreshSchedule(std::move(offsets));
  }
  return ds;
}

void write_csv_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path + " for writing");
  write_csv(ds, out);
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  return read_csv(in);
}

}  // namespace burnseer
