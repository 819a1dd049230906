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

#include "burnseer/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "burnseer/hash.hpp"

namespace burnseer {

using nlohmann::json;

std::optional<Eigen::Index> CorrelationMatrix::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<Eigen::Index>(std::distance(names.begin(), it));
}

std::optional<double> CorrelationMatrix::at(std::string_view a, std::string_view b) const {
  auto i = index_of(a);
  auto j = index_of(b);
  if (!i || !j) return std::nullopt;
  const double v = values(*i, *j);
  if (is_absent(v)) return std::nullopt;
  return v;
}

CorrelationMatrix correlation_matrix(const Dataset& ds, const std::vector<std::string>& columns) {
  if (ds.rows() < 2) throw Error(Errc::InsufficientRows, std::to_string(ds.rows()) + " rows");
  CorrelationMatrix cm;
  cm.names = columns.empty() ? ds.columns : columns;
  std::vector<Eigen::Index> idx;
  idx.reserve(cm.names.size());
  for (const auto& name : cm.names) idx.push_back(ds.require(name));

  const auto m = static_cast<Eigen::Index>(cm.names.size());
  cm.values = Eigen::MatrixXd::Constant(m, m, kAbsent);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) {
      std::optional<double> r;
      try {
        r = pearson(ds.values.col(idx[static_cast<std::size_t>(a)]),
                    ds.values.col(idx[static_cast<std::size_t>(b)]));
      } catch (const Error& e) {
        if (e.code() != Errc::InsufficientPairs) throw;
      }
      if (!r) continue;
      // exact 1 on the diagonal of any non-constant column
      const double v = (a == b) ? 1.0 : *r;
      cm.values(a, b) = v;
      cm.values(b, a) = v;
    }
  }
  return cm;
}

bool FeaturePool::admits(const ColumnSpec& spec) const {
  switch (spec.kind) {
    case ColumnKind::RunId:
    case ColumnKind::Target:
      return false;
    case ColumnKind::Input:
      return true;
    case ColumnKind::Runtime:
    case ColumnKind::Full:
      return !mid_run_only;
    case ColumnKind::Duration:
    case ColumnKind::Partial:
    case ColumnKind::Ratio:
      return !mid_run_only || refresh_indices.empty() || refresh_indices.contains(spec.k);
  }
  return false;
}

namespace {

// Full-window column that measures the same quantity as a target
// (the target's source metric, or a quota ratio with it as numerator).
bool measures_target(const ColumnSpec& spec, const std::vector<std::string>& targets) {
  if (spec.kind != ColumnKind::Full) return false;
  const auto* entry = find_catalog_entry(spec.base);
  if (!entry) return false;
  auto source_of = [](std::string_view target) -> std::string_view {
    if (target == kCpuTarget) return "cpu_usage";
    if (target == kMemoryTarget) return "memory_usage";
    return {};
  };
  for (const auto& t : targets) {
    const auto src = source_of(t);
    if (src.empty()) continue;
    if (entry->column == src) return true;
    if (entry->source == CatalogEntry::Source::Derived && entry->numerator == src) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> select_features(const CorrelationMatrix& cm,
                                         const std::vector<std::string>& targets, double threshold,
                                         const FeaturePool& pool) {
  std::vector<Eigen::Index> target_idx;
  for (const auto& t : targets) {
    auto i = cm.index_of(t);
    if (!i) throw Error(Errc::TargetMissing, t);
    target_idx.push_back(*i);
  }
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(cm.names.size()); ++j) {
    const auto& name = cm.names[static_cast<std::size_t>(j)];
    if (std::find(targets.begin(), targets.end(), name) != targets.end()) continue;
    auto spec = try_parse_column(name);
    // Columns outside the dataset grammar are only judged by correlation.
    if (spec && (!pool.admits(*spec) || measures_target(*spec, targets))) continue;
    for (auto t : target_idx) {
      const double r = cm.values(j, t);
      if (!is_absent(r) && std::abs(r) > threshold) {
        out.push_back(name);
        break;
      }
    }
  }
  if (out.empty()) throw Error(Errc::NoFeaturesSelected, "no column has |r| above threshold");
  return out;
}

std::string LinearModel::compute_version(const std::vector<std::string>& features,
                                         const Eigen::VectorXd& coefficients, double intercept) {
  Fnv1a h;
  h.update_u64(features.size());
  for (const auto& f : features) h.update(f);
  for (Eigen::Index i = 0; i < coefficients.size(); ++i) h.update(coefficients(i));
  h.update(intercept);
  return h.hex();
}

bool operator==(const LinearModel& a, const LinearModel& b) {
  return a.target == b.target && a.features == b.features &&
         a.coefficients.size() == b.coefficients.size() && a.coefficients == b.coefficients &&
         a.intercept == b.intercept && a.training_stats == b.training_stats &&
         a.schedule == b.schedule && a.version == b.version;
}

FitResult fit_ols(const Dataset& ds, std::string_view target, const std::vector<std::string>& features,
                  const SplitSpec& split) {
  if (!(split.test_fraction >= 0.0 && split.test_fraction < 1.0)) {
    throw Error(Errc::InvalidSplit, "test_fraction must be in [0, 1)");
  }
  const Eigen::Index target_col = ds.require(target);
  std::vector<Eigen::Index> feature_cols;
  for (const auto& f : features) feature_cols.push_back(ds.require(f));

  // listwise deletion
  std::vector<Eigen::Index> complete;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    bool ok = !is_absent(ds.values(i, target_col));
    for (auto c : feature_cols) ok = ok && !is_absent(ds.values(i, c));
    if (ok) complete.push_back(i);
  }

  std::vector<Eigen::Index> train = complete;
  std::vector<Eigen::Index> test;
  if (split.test_fraction > 0.0) {
    if (complete.size() < 2) {
      throw Error(Errc::InvalidSplit, "need at least 2 complete rows to split");
    }
    std::mt19937_64 rng(split.seed);
    std::shuffle(train.begin(), train.end(), rng);
    const auto n = train.size();
    auto n_test = static_cast<std::size_t>(std::llround(split.test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    test.assign(train.end() - static_cast<std::ptrdiff_t>(n_test), train.end());
    train.resize(n - n_test);
  }

  const auto p = static_cast<Eigen::Index>(features.size());
  auto gather = [&](const std::vector<Eigen::Index>& rows, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
    X.resize(static_cast<Eigen::Index>(rows.size()), p);
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = ds.values(rows[r], feature_cols[static_cast<std::size_t>(j)]);
      y(i) = ds.values(rows[r], target_col);
    }
  };
  Eigen::MatrixXd X_train;
  Eigen::VectorXd y_train;
  gather(train, X_train, y_train);
  if (X_train.rows() <= p) {
    throw Error(Errc::Underdetermined, std::to_string(X_train.rows()) + " training rows for " +
                                           std::to_string(p) + " features");
  }
  const auto sol = ols_fit(X_train, y_train);

  FitResult result;
  LinearModel& m = result.model;
  m.target = std::string(target);
  m.features = features;
  m.coefficients = sol.coefficients;
  m.intercept = sol.intercept;
  m.schedule = ds.provenance.schedule;
  for (auto j : sol.dropped) m.training_stats.dropped_features.push_back(features[static_cast<std::size_t>(j)]);

  auto fitted = [&m](const Eigen::MatrixXd& X) -> Eigen::VectorXd {
    return (X * m.coefficients).array() + m.intercept;
  };
  m.training_stats.n_train = train.size();
  try {
    m.training_stats.r_squared_train = r_squared(y_train, fitted(X_train));
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroVariance) throw;
    // constant target: perfect if every residual vanished
    m.training_stats.r_squared_train = (y_train - fitted(X_train)).isZero(0.0) ? 1.0 : 0.0;
  }

  if (!test.empty()) {
    Eigen::MatrixXd X_test;
    Eigen::VectorXd y_test;
    gather(test, X_test, y_test);
    m.training_stats.n_test = test.size();
    try {
      result.test_r_squared = r_squared(y_test, fitted(X_test));
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroVariance && e.code() != Errc::InsufficientRows) throw;
    }
    m.training_stats.r_squared_test = result.test_r_squared;
  }
  m.version = LinearModel::compute_version(m.features, m.coefficients, m.intercept);
  return result;
}

Prediction predict(const LinearModel& model, const std::map<std::string, double, std::less<>>& row) {
  double raw = model.intercept;
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    auto it = row.find(model.features[j]);
    if (it == row.end() || is_absent(it->second)) throw Error(Errc::MissingFeature, model.features[j]);
    raw += model.coefficients(static_cast<Eigen::Index>(j)) * it->second;
  }
  Prediction p;
  p.raw = raw;
  p.clamped = raw < 0.0;
  p.value = p.clamped ? 0.0 : raw;
  return p;
}

Prediction predict(const LinearModel& model, const FeatureRow& row) {
  std::map<std::string, double, std::less<>> cells;
  for (const auto& f : model.features) {
    auto it = std::find(row.columns.begin(), row.columns.end(), f);
    if (it == row.columns.end()) throw Error(Errc::MissingFeature, f);
    cells.emplace(f, row.values(std::distance(row.columns.begin(), it)));
  }
  return predict(model, cells);
}

json to_json(const LinearModel& model) {
  const auto& s = model.training_stats;
  json stats{{"n_train", s.n_train},
             {"r_squared_train", s.r_squared_train},
             {"n_test", s.n_test},
             {"r_squared_test", s.r_squared_test ? json(*s.r_squared_test) : json(nullptr)},
             {"dropped_features", s.dropped_features}};
  return json{{"target", model.target},
              {"features", model.features},
              {"coefficients", std::vector<double>(model.coefficients.data(),
                                                   model.coefficients.data() + model.coefficients.size())},
              {"intercept", model.intercept},
              {"version", model.version},
              {"schedule", model.schedule.offsets()},
              {"training_stats", std::move(stats)}};
}

LinearModel linear_model_from_json(const json& j) {
  try {
    LinearModel m;
    m.target = j.at("target").get<std::string>();
    m.features = j.at("features").get<std::vector<std::string>>();
    const auto coefs = j.at("coefficients").get<std::vector<double>>();
    if (coefs.size() != m.features.size()) {
      throw Error(Errc::MalformedModel, "coefficient count differs from feature count");
    }
    m.coefficients = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    m.intercept = j.at("intercept").get<double>();
    if (auto s = j.find("schedule"); s != j.end()) {
      m.schedule = RefreshSchedule(s->get<std::vector<double>>());
    }
    if (auto s = j.find("training_stats"); s != j.end()) {
      auto& st = m.training_stats;
      st.n_train = s->value("n_train", std::size_t{0});
      st.r_squared_train = s->value("r_squared_train", 0.0);
      st.n_test = s->value("n_test", std::size_t{0});
      if (auto t = s->find("r_squared_test"); t != s->end() && !t->is_null()) st.r_squared_test = t->get<double>();
      if (auto d = s->find("dropped_features"); d != s->end()) {
        st.dropped_features = d->get<std::vector<std::string>>();
      }
    }
    m.version = LinearModel::compute_version(m.features, m.coefficients, m.intercept);
    if (auto v = j.find("version"); v != j.end() && v->get<std::string>() != m.version) {
      throw Error(Errc::MalformedModel, "version does not match model content");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedModel, e.what());
  }
}

TrainResult train_target(const Dataset& ds, std::string_view target, const TrainOptions& options) {
  TrainResult result;
  const std::vector<std::string> targets{std::string(kCpuTarget), std::string(kMemoryTarget)};

  std::vector<std::string> columns;
  for (const auto& c : ds.columns) {
    auto spec = try_parse_column(c);
    if (!spec) continue;
    if (spec->kind == ColumnKind::Target || options.pool.admits(*spec)) columns.push_back(c);
  }
  result.correlations = correlation_matrix(ds, columns);
  result.selected = select_features(result.correlations, targets, options.threshold, options.pool);

  // Strongest correlates first, for trimming an underdetermined selection.
  auto strength = [&](const std::string& name) {
    double best = 0.0;
    for (const auto& t : targets) {
      if (auto r = result.correlations.at(name, t)) best = std::max(best, std::abs(*r));
    }
    return best;
  };
  std::vector<std::string> ranked = result.selected;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const auto& a, const auto& b) { return strength(a) > strength(b); });

  std::vector<std::string> features = result.selected;
  for (;;) {
    try {
      result.fit = fit_ols(ds, target, features, options.split);
      break;
    } catch (const Error& e) {
      if (e.code() != Errc::Underdetermined || features.empty()) throw;
    }
    const auto weakest = ranked.back();
    ranked.pop_back();
    features.erase(std::find(features.begin(), features.end(), weakest));
    result.warnings.push_back("Underdetermined: dropped weakly ranked feature " + weakest);
  }
  if (result.fit.model.degenerate()) {
    std::string names;
    for (const auto& d : result.fit.model.training_stats.dropped_features) names += " " + d;
    result.warnings.push_back("DegenerateDesign: zero coefficient for dependent columns:" + names);
  }
  return result;
}

}  // namespace burnseer
