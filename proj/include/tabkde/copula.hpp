#pragma once

#include "tabkde/core.hpp"
#include "tabkde/error.hpp"
#include "tabkde/table.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace tabkde {

/// Rounding rule for discrete columns when a quantile falls strictly between
/// two stored values.
enum class DiscreteRounding {
  Nearer,   // the bracket closer in ECDF is more likely
  Literal,  // the farther bracket is more likely (pseudocode as printed)
};

/// Empirical copula of an encoded matrix: per column, the sorted training
/// values and their ECDF, F(x) = #{values <= x} / n.
class CopulaModel {
 public:
  struct ColumnSteps {
    std::vector<double> values;  // distinct, increasing
    std::vector<double> ecdf;    // strictly increasing, back() == 1
  };

  CopulaModel() = default;

  static CopulaModel fit(const Matrix& encoded) {
    const auto n = encoded.rows();
    if (n == 0) throw Error(ErrorKind::NoRows, "cannot fit a copula on zero rows");
    CopulaModel model;
    model.rows_ = static_cast<std::size_t>(n);
    model.columns_.resize(static_cast<std::size_t>(encoded.cols()));
    std::vector<double> sorted(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < encoded.cols(); ++j) {
      for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = encoded(i, j);
      std::sort(sorted.begin(), sorted.end());
      auto& steps = model.columns_[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const bool last_of_run = i + 1 == sorted.size() || sorted[i + 1] != sorted[i];
        if (!last_of_run) continue;
        steps.values.push_back(sorted[i]);
        steps.ecdf.push_back(ratio(i + 1, model.rows_));
      }
    }
    return model;
  }

  /// Rebuilds from stored steps (model loading).
  CopulaModel(std::size_t rows, std::vector<ColumnSteps> columns) : rows_(rows), columns_(std::move(columns)) {
    for (const auto& c : columns_) {
      if (c.values.empty() || c.values.size() != c.ecdf.size()) {
        throw Error(ErrorKind::ModelFormat, "malformed copula column");
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dims() const noexcept { return columns_.size(); }
  const std::vector<ColumnSteps>& columns() const noexcept { return columns_; }

  /// ECDF of column j at x. Below the minimum gives 0, at or above the maximum 1.
  double cdf(std::size_t j, double x) const {
    const auto& steps = columns_[j];
    auto it = std::upper_bound(steps.values.begin(), steps.values.end(), x);
    if (it == steps.values.begin()) return 0.0;
    return steps.ecdf[static_cast<std::size_t>(it - steps.values.begin()) - 1];
  }

  Matrix forward(const Matrix& encoded) const {
    check_dims(static_cast<std::size_t>(encoded.cols()));
    Matrix z(encoded.rows(), encoded.cols());
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
      for (Eigen::Index j = 0; j < encoded.cols(); ++j) z(i, j) = cdf(static_cast<std::size_t>(j), encoded(i, j));
    }
    return z;
  }

  /// Inverse ECDF of one latent coordinate. Quantiles at or beyond the extreme
  /// ECDF steps clamp to the column min/max. Inside, Numerical columns
  /// interpolate linearly between the bracketing values and discrete columns
  /// pick one of them at random.
  double inverse(std::size_t j, double p, Kind kind, Rng& rng,
                 DiscreteRounding rounding = DiscreteRounding::Nearer) const {
    const auto& steps = columns_[j];
    if (p <= steps.ecdf.front()) return steps.values.front();
    if (p >= steps.ecdf.back()) return steps.values.back();
    const auto hi = static_cast<std::size_t>(
        std::lower_bound(steps.ecdf.begin(), steps.ecdf.end(), p) - steps.ecdf.begin());
    if (steps.ecdf[hi] == p) return steps.values[hi];
    const std::size_t lo = hi - 1;
    const double z1 = steps.ecdf[lo];
    const double z2 = steps.ecdf[hi];
    const double x1 = steps.values[lo];
    const double x2 = steps.values[hi];
    if (kind == Kind::Numerical) return x2 + (std::abs(p - z2) / std::abs(z1 - z2)) * (x1 - x2);
    const double p_lower = rounding == DiscreteRounding::Nearer ? std::abs(p - z2) / std::abs(z1 - z2)
                                                                : std::abs(p - z1) / std::abs(z1 - z2);
    return uniform01(rng) < p_lower ? x1 : x2;
  }

  Vector inverse_row(std::span<const double> z, const TableSchema& schema, Rng& rng,
                     DiscreteRounding rounding = DiscreteRounding::Nearer) const {
    check_dims(z.size());
    Vector e(static_cast<Eigen::Index>(z.size()));
    for (std::size_t j = 0; j < z.size(); ++j) {
      e(static_cast<Eigen::Index>(j)) = inverse(j, z[j], schema.column(j).kind(), rng, rounding);
    }
    return e;
  }

 private:
  static double ratio(std::size_t count, std::size_t n) {
    return static_cast<double>(count) / static_cast<double>(n);
  }

  void check_dims(std::size_t d) const {
    if (d != columns_.size()) throw Error(ErrorKind::SchemaMismatch, "dimension differs from copula model");
  }

  std::size_t rows_ = 0;
  std::vector<ColumnSteps> columns_;
};

}  // namespace tabkde
