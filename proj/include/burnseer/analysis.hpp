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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <nlohmann/json_fwd.hpp>

#include "burnseer/dataset.hpp"
#include "burnseer/error.hpp"

namespace burnseer {

// ---------------------------------------------------------------------------
// Dense kernels, templated on the scalar type. NaN entries mark absent cells.
// ---------------------------------------------------------------------------

/// Sample Pearson coefficient of two columns. Pairs where either side is
/// absent are dropped. Returns nullopt when either retained column is
/// constant.
template <typename DerivedX, typename DerivedY>
std::optional<typename DerivedX::Scalar> pearson(const Eigen::DenseBase<DerivedX>& x,
                                                 const Eigen::DenseBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) {
    throw Error(Errc::LengthMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> pairs(x.size(), 2);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar xi = x.derived().coeff(i);
    const Scalar yi = static_cast<Scalar>(y.derived().coeff(i));
    if (std::isnan(xi) || std::isnan(yi)) continue;
    pairs(n, 0) = xi;
    pairs(n, 1) = yi;
    ++n;
  }
  if (n < 2) throw Error(Errc::InsufficientPairs, std::to_string(n) + " complete pairs");
  auto kept = pairs.topRows(n);

  if ((kept.col(0).array() == kept(0, 0)).all() || (kept.col(1).array() == kept(0, 1)).all()) {
    return std::nullopt;
  }
  const auto mean = kept.colwise().mean();
  const auto centered = (kept.rowwise() - mean).eval();
  const Scalar sxy = centered.col(0).dot(centered.col(1));
  const Scalar sxx = centered.col(0).squaredNorm();
  const Scalar syy = centered.col(1).squaredNorm();
  const Scalar r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Coefficient of determination, 1 - SS_res / SS_tot.
template <typename DerivedA, typename DerivedP>
typename DerivedA::Scalar r_squared(const Eigen::DenseBase<DerivedA>& actual,
                                    const Eigen::DenseBase<DerivedP>& predicted) {
  using Scalar = typename DerivedA::Scalar;
  if (actual.size() != predicted.size()) {
    throw Error(Errc::LengthMismatch,
                std::to_string(actual.size()) + " vs " + std::to_string(predicted.size()));
  }
  if (actual.size() < 2) throw Error(Errc::InsufficientRows, "r_squared needs >= 2 values");
  const auto a = actual.derived().template cast<Scalar>().array();
  const auto p = predicted.derived().template cast<Scalar>().array();
  const Scalar ss_tot = (a - a.mean()).square().sum();
  if (ss_tot == Scalar(0)) throw Error(Errc::ZeroVariance, "actual values are constant");
  const Scalar ss_res = (a - p).square().sum();
  return Scalar(1) - ss_res / ss_tot;
}

template <typename Scalar>
struct OlsSolution {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;
  Scalar intercept = 0;
  Eigen::Index rank = 0;
  /// Indices of columns dropped as linearly dependent (coefficient 0).
  std::vector<Eigen::Index> dropped;
  bool degenerate() const { return !dropped.empty(); }
};

/// Least squares with intercept. Columns are centred and scaled to unit norm,
/// then solved with a column-pivoted Householder QR; columns beyond the
/// numerical rank get a zero coefficient. Requires rows > cols.
template <typename DerivedX, typename DerivedY>
OlsSolution<typename DerivedX::Scalar> ols_fit(const Eigen::MatrixBase<DerivedX>& X,
                                               const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw Error(Errc::LengthMismatch, "design and target row counts differ");
  if (n <= p) {
    throw Error(Errc::Underdetermined,
                std::to_string(n) + " rows for " + std::to_string(p) + " features");
  }

  OlsSolution<Scalar> sol;
  const Scalar y_mean = y.mean();
  const Vector yc = y.array() - y_mean;
  if (p == 0) {
    sol.coefficients = Vector(0);
    sol.intercept = y_mean;
    return sol;
  }

  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> x_mean = X.colwise().mean();
  Matrix xs = X.rowwise() - x_mean;
  Vector scale = xs.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (scale(j) > Scalar(0)) xs.col(j) /= scale(j);
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(xs);
  const Eigen::Index rank = qr.rank();
  sol.rank = rank;

  Vector beta_perm = Vector::Zero(p);
  if (rank > 0) {
    const Vector qty = qr.householderQ().transpose() * yc;
    beta_perm.head(rank) = qr.matrixR()
                               .topLeftCorner(rank, rank)
                               .template triangularView<Eigen::Upper>()
                               .solve(qty.head(rank));
  }
  const auto& perm = qr.colsPermutation().indices();
  Vector beta = Vector::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index col = perm(i);
    if (i >= rank) {
      sol.dropped.push_back(col);
      continue;
    }
    beta(col) = beta_perm(i) / scale(col);
  }
  std::sort(sol.dropped.begin(), sol.dropped.end());
  sol.coefficients = beta;
  sol.intercept = y_mean - x_mean.dot(beta);
  return sol;
}

// ---------------------------------------------------------------------------
// Dataset-level operations
// ---------------------------------------------------------------------------

/// Symmetric Pearson matrix; NaN where undefined (constant column or fewer
/// than two complete pairs).
struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  std::optional<Eigen::Index> index_of(std::string_view name) const;
  std::optional<double> at(std::string_view a, std::string_view b) const;
};

/// Empty `columns` means every dataset column.
CorrelationMatrix correlation_matrix(const Dataset& ds, const std::vector<std::string>& columns = {});

/// Which columns may be used as regressors.
struct FeaturePool {
  bool mid_run_only = false;
  /// With mid_run_only, restricts refresh columns to these k (empty = any).
  std::set<int> refresh_indices;

  static FeaturePool all() { return {}; }
  static FeaturePool mid_run(std::set<int> ks = {}) { return {true, std::move(ks)}; }

  bool admits(const ColumnSpec& spec) const;
};

/// Union over targets of columns with |r| > threshold (strict), in matrix
/// order. Targets, and full-window columns measuring a target quantity, are
/// never selected.
std::vector<std::string> select_features(const CorrelationMatrix& cm,
                                         const std::vector<std::string>& targets,
                                         double threshold = 0.5,
                                         const FeaturePool& pool = FeaturePool::all());

/// Seeded shuffle, then the first (1 - test_fraction) share trains.
/// test_fraction == 0 trains on every row.
struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  static SplitSpec none() { return {0.0, 0}; }
};

struct TrainingStats {
  std::size_t n_train = 0;
  double r_squared_train = 0.0;
  std::size_t n_test = 0;
  std::optional<double> r_squared_test;
  std::vector<std::string> dropped_features;  // rank-deficient columns

  friend bool operator==(const TrainingStats&, const TrainingStats&) = default;
};

struct LinearModel {
  std::string target;
  std::vector<std::string> features;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  TrainingStats training_stats;
  /// Refresh offsets of the training dataset; maps `_t<k>` features to seconds.
  RefreshSchedule schedule;
  std::string version;

  bool degenerate() const { return !training_stats.dropped_features.empty(); }

  /// Content hash of (features, coefficients, intercept).
  static std::string compute_version(const std::vector<std::string>& features,
                                     const Eigen::VectorXd& coefficients, double intercept);

  friend bool operator==(const LinearModel& a, const LinearModel& b);
};

struct FitResult {
  LinearModel model;
  std::optional<double> test_r_squared;
};

/// Listwise deletion of incomplete rows, split, then OLS on the train part.
FitResult fit_ols(const Dataset& ds, std::string_view target, const std::vector<std::string>& features,
                  const SplitSpec& split = {});

struct Prediction {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
};

/// intercept + coefficients . features, clamped at zero from below.
Prediction predict(const LinearModel& model, const std::map<std::string, double, std::less<>>& row);
Prediction predict(const LinearModel& model, const FeatureRow& row);

nlohmann::json to_json(const LinearModel& model);
LinearModel linear_model_from_json(const nlohmann::json& j);

/// Correlate, select, and fit one target; drops the weakest selected
/// features while the fit would be underdetermined.
struct TrainOptions {
  double threshold = 0.5;
  SplitSpec split;
  FeaturePool pool;
};

struct TrainResult {
  CorrelationMatrix correlations;
  std::vector<std::string> selected;
  FitResult fit;
  std::vector<std::string> warnings;
};

TrainResult train_target(const Dataset& ds, std::string_view target, const TrainOptions& options);

}  // namespace burnseer
