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

#include <cmath>

#include <nlohmann/json.hpp>

#include "burnseer/analysis.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace burnseer;
using nlohmann::json;

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

Eigen::VectorXd vec(std::initializer_list<double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

Dataset table(const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(cols.front().second.size());
  ds.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    ds.columns.push_back(cols[j].first);
    for (Eigen::Index i = 0; i < n; ++i) ds.values(i, static_cast<Eigen::Index>(j)) = cols[j].second[static_cast<std::size_t>(i)];
  }
  for (Eigen::Index i = 0; i < n; ++i) ds.run_ids.push_back("r" + std::to_string(i));
  return ds;
}

using Cells = std::map<std::string, double, std::less<>>;

oracle::Mat rows_of(const Eigen::MatrixXd& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  }
  return out;
}

}  // namespace

TEST_CASE("pearson on hand-checked columns") {
  const auto x = vec({1, 2, 3, 4, 5});
  CHECK(*pearson(x, vec({2, 4, 6, 8, 10})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*pearson(x, vec({10, 8, 6, 4, 2})) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(*pearson(x, vec({1, 3, 2, 5, 4})) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(!pearson(x, vec({3, 3, 3, 3, 3})));
  CHECK(error_of([&] { pearson(x, vec({1, 2})); }).code() == Errc::LengthMismatch);
  CHECK(error_of([] { pearson(vec({1}), vec({2})); }).code() == Errc::InsufficientPairs);
  const double nan = kAbsent;
  // absent cells drop the pair; what is left is {(1,2),(3,6),(5,10)}
  CHECK(*pearson(x, vec({2, nan, 6, nan, 10})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(error_of([&] { pearson(x, vec({nan, nan, nan, nan, 1})); }).code() == Errc::InsufficientPairs);
}

TEST_CASE("property: pearson matches the textbook oracle") {
  gen::for_all(11, 300, [](gen::Gen& g, int c) {
    CAPTURE(c);
    const auto n = g.integer(2, 200);
    Eigen::VectorXd x(n), y(n);
    const double slope = g.uniform(-3, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i) = g.normal(g.uniform(-5, 5), 2.0);
      y(i) = slope * x(i) + g.normal(0, g.uniform(0.01, 5));
      if (g.coin(0.05)) x(i) = kAbsent;
    }
    std::optional<double> r;
    try {
      r = pearson(x, y);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InsufficientPairs);
      return;
    }
    const auto o = oracle::pearson({x.data(), x.data() + n}, {y.data(), y.data() + n});
    REQUIRE(r.has_value() == o.has_value());
    if (r) {
      CHECK(std::fabs(*r - static_cast<double>(*o)) <= 1e-12);
      CHECK(std::fabs(*r) <= 1.0);
      CHECK(*pearson(y, x) == doctest::Approx(*r).epsilon(1e-14));
      // invariant under positive affine maps, sign flips under negation
      const Eigen::VectorXd x2 = 3.5 * x.array() + 7.0;
      CHECK(*pearson(x2, y) == doctest::Approx(*r).epsilon(1e-12));
      CHECK(*pearson(-x, y) == doctest::Approx(-*r).epsilon(1e-12));
    }
  });
}

TEST_CASE("correlation matrix") {
  std::vector<double> a, b, k, u, v;
  gen::Gen g(5);
  for (int i = 0; i < 1000; ++i) {
    a.push_back(g.normal());
    b.push_back(2 * a.back());
    k.push_back(4.0);
    u.push_back(g.normal());
    v.push_back(g.normal());
  }
  const auto ds = table({{"a", a}, {"b", b}, {"k", k}, {"u", u}, {"v", v}});
  const auto cm = correlation_matrix(ds);
  CHECK(*cm.at("a", "b") == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(!cm.at("a", "k"));
  CHECK(!cm.at("k", "k"));
  CHECK(std::fabs(*cm.at("u", "v")) < 0.15);
  for (Eigen::Index i = 0; i < 5; ++i) {
    if (i != 2) CHECK(cm.values(i, i) == 1.0);
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double x = cm.values(i, j);
      CHECK((is_absent(x) ? is_absent(cm.values(j, i)) : x == cm.values(j, i)));
      if (!is_absent(x)) CHECK(std::fabs(x) <= 1.0);
    }
  }
  const auto sub = correlation_matrix(ds, {"v", "a"});
  CHECK(sub.names == std::vector<std::string>{"v", "a"});
  CHECK(error_of([&] { correlation_matrix(ds, {"missing"}); }).code() == Errc::SchemaMismatch);
  CHECK(error_of([] { correlation_matrix(table({{"a", {1.0}}})); }).code() == Errc::InsufficientRows);
}

TEST_CASE("feature selection uses a strict threshold on |r|") {
  CorrelationMatrix cm;
  cm.names = {"f_pos", "f_edge", "f_neg", "f_weak", "cpu_usage_total"};
  cm.values = Eigen::MatrixXd::Identity(5, 5);
  const double r[] = {0.6, 0.5, -0.7, 0.1};
  for (int j = 0; j < 4; ++j) cm.values(j, 4) = cm.values(4, j) = r[j];
  CHECK(select_features(cm, {"cpu_usage_total"}) == std::vector<std::string>{"f_pos", "f_neg"});
  CHECK(select_features(cm, {"cpu_usage_total"}, 0.65) == std::vector<std::string>{"f_neg"});
  CHECK(error_of([&] { select_features(cm, {"cpu_usage_total"}, 0.9); }).code() == Errc::NoFeaturesSelected);
  CHECK(error_of([&] { select_features(cm, {"memory_usage_peak"}); }).code() == Errc::TargetMissing);
}

TEST_CASE("feature selection never returns targets or full-window target measures") {
  gen::Gen g(9);
  std::vector<double> cpu, mem, full_cpu, pct, t1, area;
  for (int i = 0; i < 100; ++i) {
    area.push_back(g.uniform(1, 10));
    cpu.push_back(10 * area.back() + g.normal());
    mem.push_back(3 * area.back() + g.normal());
    full_cpu.push_back(cpu.back());
    pct.push_back(cpu.back() / 4.0);
    t1.push_back(0.1 * cpu.back() + g.normal(0, 0.1));
  }
  const auto ds = table({{"area", area}, {"cpu_usage", full_cpu}, {"cpu_requests_pct", pct}, {"cpu_usage_t1", t1},
                         {"cpu_usage_total", cpu}, {"memory_usage_peak", mem}});
  const auto cm = correlation_matrix(ds);
  const std::vector<std::string> targets{"cpu_usage_total", "memory_usage_peak"};
  const auto all = select_features(cm, targets);
  CHECK(all == std::vector<std::string>{"area", "cpu_usage_t1"});
  CHECK(select_features(cm, targets, 0.5, FeaturePool::mid_run({2})) == std::vector<std::string>{"area"});

  // rescaling a feature column leaves the selection unchanged
  auto scaled = ds;
  scaled.values.col(0) *= 1e6;
  scaled.values.col(3) = scaled.values.col(3).array() * 0.001 + 5.0;
  CHECK(select_features(correlation_matrix(scaled), targets) == all);
}

TEST_CASE("OLS kernel examples") {
  Eigen::MatrixXd X(2, 1);
  X << 1, 3;
  auto s = ols_fit(X, vec({2, 6}));
  CHECK(s.coefficients(0) == doctest::Approx(2.0));
  CHECK(s.intercept == doctest::Approx(0.0));

  Eigen::MatrixXd X3(4, 1);
  X3 << 1, 2, 3, 4;
  s = ols_fit(X3, vec({5, 5, 5, 5}));
  CHECK(s.intercept == doctest::Approx(5.0));
  CHECK(s.coefficients(0) == doctest::Approx(0.0));

  CHECK(error_of([] { ols_fit(Eigen::MatrixXd(2, 2), vec({1, 2})); }).code() == Errc::Underdetermined);
  CHECK(error_of([] { ols_fit(Eigen::MatrixXd(3, 1), vec({1, 2})); }).code() == Errc::LengthMismatch);
}

TEST_CASE("OLS recovers an exact linear law and matches the normal-equation oracle") {
  gen::Gen g(17);
  Eigen::MatrixXd X(30, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = g.uniform(-10, 10);
    X(i, 1) = g.uniform(0, 100);
    y(i) = 2 * X(i, 0) + 3 * X(i, 1) + 1;
  }
  const auto s = ols_fit(X, y);
  CHECK(s.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.coefficients(1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.intercept == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(!s.degenerate());
}

TEST_CASE("property: OLS agrees with the oracle, residuals are orthogonal, R^2 in [0, 1]") {
  gen::for_all(23, 100, [](gen::Gen& g, int c) {
    CAPTURE(c);
    const auto p = g.integer(1, 5);
    const auto n = g.integer(p + 2, 120);
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = g.normal(0, 3);
      for (Eigen::Index j = 0; j < p; ++j) {
        X(i, j) = g.normal(g.uniform(-50, 50), g.uniform(0.5, 20));
        y(i) += (j + 1) * 0.5 * X(i, j);
      }
    }
    const auto s = ols_fit(X, y);
    const auto o = oracle::ols_normal_equations(rows_of(X), {y.data(), y.data() + n});
    for (Eigen::Index j = 0; j < p; ++j) {
      CHECK(oracle::close_rel(s.coefficients(j), o.coefficients[static_cast<std::size_t>(j)], 1e-9));
    }
    CHECK(std::fabs(s.intercept - static_cast<double>(o.intercept)) <= 1e-9 * std::max(1.0L, std::fabs(o.intercept)));

    const Eigen::VectorXd fitted = (X * s.coefficients).array() + s.intercept;
    const Eigen::VectorXd resid = y - fitted;
    const double scale = y.cwiseAbs().maxCoeff() * static_cast<double>(n);
    CHECK(std::fabs(resid.sum()) <= 1e-9 * scale);
    for (Eigen::Index j = 0; j < p; ++j) {
      CHECK(std::fabs(resid.dot(X.col(j))) <= 1e-9 * scale * X.col(j).cwiseAbs().maxCoeff());
    }
    const double r2 = r_squared(y, fitted);
    CHECK(r2 >= 0.0);
    CHECK(r2 <= 1.0);
    CHECK(std::fabs(r2 - static_cast<double>(oracle::r_squared({y.data(), y.data() + n},
                                                               {fitted.data(), fitted.data() + n}))) <= 1e-12);
    // identical inputs give bit-identical coefficients
    const auto again = ols_fit(X, y);
    CHECK(again.coefficients == s.coefficients);
    CHECK(again.intercept == s.intercept);
  });
}

TEST_CASE("collinear columns are dropped, not fatal") {
  gen::Gen g(29);
  std::vector<double> a, b, y;
  for (int i = 0; i < 40; ++i) {
    a.push_back(g.uniform(0, 10));
    b.push_back(2 * a.back());
    y.push_back(3 * a.back() + 1 + g.normal(0, 0.01));
  }
  const auto ds = table({{"a", a}, {"b", b}, {"y", y}});
  const auto fit = fit_ols(ds, "y", {"a", "b"}, SplitSpec::none());
  REQUIRE(fit.model.degenerate());
  CHECK(fit.model.training_stats.dropped_features.size() == 1);
  // the fitted response is still the law
  const double slope = fit.model.coefficients(0) + 2 * fit.model.coefficients(1);
  CHECK(slope == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(fit.model.training_stats.r_squared_train > 0.999);
}

TEST_CASE("fit_ols deletes incomplete rows and holds out a seeded test share") {
  gen::Gen g(31);
  std::vector<double> a, y;
  for (int i = 0; i < 50; ++i) {
    a.push_back(i % 10 == 0 ? kAbsent : g.uniform(0, 10));
    y.push_back(4 * (is_absent(a.back()) ? 0 : a.back()) + g.normal(0, 0.5));
  }
  const auto ds = table({{"a", a}, {"y", y}});
  const auto fit = fit_ols(ds, "y", {"a"}, {0.2, 42});
  CHECK(fit.model.training_stats.n_train + fit.model.training_stats.n_test == 45);
  CHECK(fit.model.training_stats.n_test == 9);
  REQUIRE(fit.test_r_squared);
  CHECK(*fit.test_r_squared > 0.9);
  CHECK(fit_ols(ds, "y", {"a"}, {0.2, 42}).model == fit.model);
  CHECK(fit_ols(ds, "y", {"a"}, {0.2, 43}).model.version != fit.model.version);
  CHECK(error_of([&] { fit_ols(ds, "y", {"a"}, {1.0, 0}); }).code() == Errc::InvalidSplit);
  CHECK(error_of([&] { fit_ols(ds, "nope", {"a"}); }).code() == Errc::SchemaMismatch);
}

TEST_CASE("r_squared examples") {
  const auto a = vec({1, 2, 3, 4, 5});
  CHECK(r_squared(a, a) == 1.0);
  CHECK(r_squared(a, vec({3, 3, 3, 3, 3})) == 0.0);
  CHECK(r_squared(a, vec({2, 1, 3, 4, 5})) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(error_of([] { r_squared(vec({2, 2, 2}), vec({1, 2, 3})); }).code() == Errc::ZeroVariance);
  CHECK(error_of([&] { r_squared(a, vec({1})); }).code() == Errc::LengthMismatch);
}

TEST_CASE("predict applies the model and clamps at zero") {
  LinearModel m;
  m.target = std::string(kCpuTarget);
  m.features = {"a", "b"};
  m.coefficients = vec({2, 3});
  m.intercept = 1;
  auto p = predict(m, {{"a", 1.0}, {"b", 2.0}});
  CHECK(p.value == 9.0);
  CHECK(!p.clamped);
  m.intercept = -10;
  p = predict(m, {{"a", 1.0}, {"b", 2.0}});
  CHECK(p.value == 0.0);
  CHECK(p.raw == -2.0);
  CHECK(p.clamped);
  m.intercept = 0;
  CHECK(predict(m, {{"a", 0.0}, {"b", 2.0}, {"extra", 99.0}}).value == 6.0);
  auto e = error_of([&] { predict(m, Cells{{"a", 1.0}}); });
  CHECK(e.code() == Errc::MissingFeature);
  CHECK(e.detail() == "b");
  CHECK(error_of([&] { predict(m, {{"a", 1.0}, {"b", kAbsent}}); }).code() == Errc::MissingFeature);
}

TEST_CASE("model JSON round trip") {
  gen::Gen g(37);
  std::vector<double> a, b, y;
  for (int i = 0; i < 30; ++i) {
    a.push_back(g.uniform(0, 1));
    b.push_back(g.uniform(0, 1));
    y.push_back(a.back() - b.back() + g.normal(0, 0.1));
  }
  auto ds = table({{"a", a}, {"b", b}, {"y", y}});
  ds.provenance.schedule = RefreshSchedule({45, 300});
  const auto m = fit_ols(ds, "y", {"a", "b"}, {0.25, 3}).model;
  const auto back = linear_model_from_json(json::parse(to_json(m).dump()));
  CHECK(back == m);

  auto doc = to_json(m);
  doc["coefficients"] = {1.0};
  CHECK(error_of([&] { linear_model_from_json(doc); }).code() == Errc::MalformedModel);
  doc = to_json(m);
  doc["intercept"] = m.intercept + 1;
  CHECK(error_of([&] { linear_model_from_json(doc); }).code() == Errc::MalformedModel);
  doc.erase("features");
  CHECK(error_of([&] { linear_model_from_json(doc); }).code() == Errc::MalformedModel);
}

TEST_CASE("train_target trims an underdetermined selection by weakest correlation") {
  gen::Gen g(41);
  std::vector<std::pair<std::string, std::vector<double>>> cols{{"area", {}}, {"sim_time", {}}, {"timestep", {}},
                                                                {"cpu_usage_total", {}}, {"memory_usage_peak", {}}};
  for (int i = 0; i < 3; ++i) {
    const double x = g.uniform(0, 10);
    cols[0].second.push_back(x);
    cols[1].second.push_back(x + g.normal(0, 0.5));
    cols[2].second.push_back(x + g.normal(0, 2));
    cols[3].second.push_back(5 * x);
    cols[4].second.push_back(7 * x);
  }
  const auto ds = table(cols);
  TrainOptions opt;
  opt.threshold = 0.0;
  opt.split = SplitSpec::none();
  const auto res = train_target(ds, kCpuTarget, opt);
  CHECK(res.fit.model.features.size() == 2);
  CHECK(!res.warnings.empty());
  CHECK(res.warnings.front().starts_with("Underdetermined"));
}
