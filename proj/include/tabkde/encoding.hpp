#pragma once

#include "tabkde/core.hpp"
#include "tabkde/error.hpp"
#include "tabkde/table.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

namespace tabkde {

/// How categorical columns are mapped to a single real coordinate.
enum class CategoricalEncoding {
  PrincipalGuided,  // mean first-principal-component score of the rows holding the category
  Frequency,        // relative training frequency
  Uniform,          // midpoint of the category's cumulative-frequency interval
};

constexpr std::string_view to_string(CategoricalEncoding e) noexcept {
  switch (e) {
    case CategoricalEncoding::PrincipalGuided: return "pge";
    case CategoricalEncoding::Frequency: return "frequency";
    case CategoricalEncoding::Uniform: return "uniform";
  }
  return "?";
}

inline std::optional<CategoricalEncoding> parse_categorical_encoding(std::string_view s) {
  if (s == "pge") return CategoricalEncoding::PrincipalGuided;
  if (s == "frequency") return CategoricalEncoding::Frequency;
  if (s == "uniform") return CategoricalEncoding::Uniform;
  return std::nullopt;
}

/// Leading eigenvector of the sample covariance of `x` (rows are samples),
/// i.e. the unit v maximizing the variance of x·v. The sign is fixed so that
/// the entry of largest magnitude is positive.
inline Vector top_principal_direction(const Matrix& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (d == 0) throw Error(ErrorKind::DegenerateMatrix, "matrix has no columns");
  if (n < 2) throw Error(ErrorKind::TooFewRows, "principal direction needs at least 2 rows");

  bool identical = true;
  for (Eigen::Index i = 1; i < n && identical; ++i) identical = (x.row(i) == x.row(0));
  if (identical) throw Error(ErrorKind::DegenerateMatrix, "all rows are identical");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success || solver.eigenvalues()(d - 1) <= 0.0) {
    throw Error(ErrorKind::DegenerateMatrix, "covariance has no positive eigenvalue");
  }
  Vector v = solver.eigenvectors().col(d - 1);
  v.normalize();
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
  return v;
}

/// Fitted per-column codec. Numerical columns are z-scored; Ordinal levels map
/// to ranks 1, 2, ...; Categorical labels map to a learned scalar code.
class Encoder {
 public:
  struct ColumnCodec {
    Kind kind = Kind::Numerical;
    double mean = 0.0;    // Numerical only
    double stddev = 1.0;  // Numerical only, always > 0
    /// Per level: its code, or NaN for a categorical label never seen in
    /// training. Ordinal codes are the ranks.
    std::vector<double> codes;
    /// Per level: training occurrence count.
    std::vector<std::size_t> counts;
  };

  Encoder() = default;

  /// Rebuilds an encoder from stored parts (model loading).
  Encoder(TableSchema schema, std::vector<ColumnCodec> columns, Vector principal_direction,
          CategoricalEncoding categorical)
      : schema_(std::move(schema)),
        columns_(std::move(columns)),
        direction_(std::move(principal_direction)),
        categorical_(categorical) {
    if (columns_.size() != schema_.size()) throw Error(ErrorKind::ModelFormat, "encoder/schema size mismatch");
    build_groups();
  }

  static Encoder fit(const Table& train, CategoricalEncoding categorical = CategoricalEncoding::PrincipalGuided) {
    const std::size_t n = train.rows();
    if (n == 0) throw Error(ErrorKind::NoRows, "cannot fit encoder on an empty table");
    if (n < 2) throw Error(ErrorKind::TooFewRows, "encoder needs at least 2 rows");
    const auto& schema = train.schema();
    const std::size_t d = schema.size();

    std::vector<ColumnCodec> columns(d);
    std::vector<std::size_t> numeric;
    for (std::size_t j = 0; j < d; ++j) {
      const Column& c = schema.column(j);
      ColumnCodec& codec = columns[j];
      codec.kind = c.kind();
      if (c.is_numerical()) {
        numeric.push_back(j);
        auto col = train.column(j);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
        if (*lo == *hi) {
          codec.mean = *lo;
          codec.stddev = 1.0;
        } else {
          double ss = 0.0;
          for (double v : col) ss += (v - mean) * (v - mean);
          codec.mean = mean;
          codec.stddev = std::sqrt(ss / static_cast<double>(n));
        }
        continue;
      }
      codec.counts.assign(c.levels().size(), 0);
      for (std::size_t i = 0; i < n; ++i) ++codec.counts[train.level(i, j)];
      if (c.kind() == Kind::Ordinal) {
        codec.codes.resize(c.levels().size());
        for (std::size_t l = 0; l < codec.codes.size(); ++l) codec.codes[l] = static_cast<double>(l + 1);
      }
    }

    Vector direction;
    Vector scores;
    if (numeric.empty() && categorical == CategoricalEncoding::PrincipalGuided) {
      categorical = CategoricalEncoding::Frequency;
    }
    if (categorical == CategoricalEncoding::PrincipalGuided) {
      Matrix block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(numeric.size()));
      for (std::size_t k = 0; k < numeric.size(); ++k) {
        const ColumnCodec& codec = columns[numeric[k]];
        auto col = train.column(numeric[k]);
        for (std::size_t i = 0; i < n; ++i) {
          block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (col[i] - codec.mean) / codec.stddev;
        }
      }
      direction = top_principal_direction(block);
      scores = block * direction;
    }

    for (std::size_t j = 0; j < d; ++j) {
      ColumnCodec& codec = columns[j];
      if (codec.kind != Kind::Categorical) continue;
      const std::size_t levels = codec.counts.size();
      codec.codes.assign(levels, std::numeric_limits<double>::quiet_NaN());
      switch (categorical) {
        case CategoricalEncoding::PrincipalGuided: {
          std::vector<double> sums(levels, 0.0);
          for (std::size_t i = 0; i < n; ++i) sums[train.level(i, j)] += scores(static_cast<Eigen::Index>(i));
          for (std::size_t l = 0; l < levels; ++l) {
            if (codec.counts[l]) codec.codes[l] = sums[l] / static_cast<double>(codec.counts[l]);
          }
          break;
        }
        case CategoricalEncoding::Frequency:
          for (std::size_t l = 0; l < levels; ++l) {
            if (codec.counts[l]) codec.codes[l] = static_cast<double>(codec.counts[l]) / static_cast<double>(n);
          }
          break;
        case CategoricalEncoding::Uniform: {
          std::size_t before = 0;
          for (std::size_t l = 0; l < levels; ++l) {
            if (!codec.counts[l]) continue;
            codec.codes[l] = (static_cast<double>(before) + 0.5 * static_cast<double>(codec.counts[l])) /
                             static_cast<double>(n);
            before += codec.counts[l];
          }
          break;
        }
      }
    }
    return Encoder(schema, std::move(columns), std::move(direction), categorical);
  }

  const TableSchema& schema() const noexcept { return schema_; }
  const std::vector<ColumnCodec>& columns() const noexcept { return columns_; }
  const ColumnCodec& column(std::size_t j) const { return columns_.at(j); }
  /// Empty unless principal-guided encoding was used.
  const Vector& principal_direction() const noexcept { return direction_; }
  CategoricalEncoding categorical_encoding() const noexcept { return categorical_; }

  double encode_cell(std::size_t j, double cell) const {
    const ColumnCodec& codec = columns_[j];
    if (codec.kind == Kind::Numerical) return (cell - codec.mean) / codec.stddev;
    const double code = codec.codes[static_cast<std::size_t>(cell)];
    if (std::isnan(code)) {
      throw Error(ErrorKind::UnknownCategory, "label '" + schema_.column(j).levels()[static_cast<std::size_t>(cell)] +
                                                  "' of column '" + schema_.column(j).name() +
                                                  "' was not seen in training");
    }
    return code;
  }

  Matrix encode(const Table& table) const {
    if (!(table.schema() == schema_)) throw Error(ErrorKind::SchemaMismatch, "table schema differs from encoder schema");
    Matrix e(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(table.cols()));
    for (std::size_t j = 0; j < table.cols(); ++j) {
      auto col = table.column(j);
      for (std::size_t i = 0; i < table.rows(); ++i) {
        e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = encode_cell(j, col[i]);
      }
    }
    return e;
  }

  /// Maps one encoded coordinate back to a cell. Discrete columns round
  /// randomly between the two nearest codes, favouring the nearer one;
  /// out-of-range values clamp to the extreme label.
  double decode_cell(std::size_t j, double value, Rng& rng) const {
    const ColumnCodec& codec = columns_[j];
    if (codec.kind == Kind::Numerical) return value * codec.stddev + codec.mean;
    const auto& groups = groups_[j];
    auto pick = [&](const CodeGroup& g) -> double {
      if (g.levels.size() == 1) return static_cast<double>(g.levels.front());
      double total = 0.0;
      for (std::size_t w : g.weights) total += static_cast<double>(w);
      double u = uniform01(rng) * total;
      for (std::size_t k = 0; k < g.levels.size(); ++k) {
        u -= static_cast<double>(g.weights[k]);
        if (u < 0.0) return static_cast<double>(g.levels[k]);
      }
      return static_cast<double>(g.levels.back());
    };
    if (value <= groups.front().code) return pick(groups.front());
    if (value >= groups.back().code) return pick(groups.back());
    auto upper = std::lower_bound(groups.begin(), groups.end(), value,
                                  [](const CodeGroup& g, double v) { return g.code < v; });
    if (upper->code == value) return pick(*upper);
    const CodeGroup& lower = *(upper - 1);
    const double p_lower = (upper->code - value) / (upper->code - lower.code);
    return uniform01(rng) < p_lower ? pick(lower) : pick(*upper);
  }

  std::vector<double> decode(std::span<const double> row, Rng& rng) const {
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = decode_cell(j, row[j], rng);
    return out;
  }

 private:
  struct CodeGroup {
    double code;
    std::vector<std::size_t> levels;
    std::vector<std::size_t> weights;  // training counts, used only to break exact ties
  };

  void build_groups() {
    groups_.assign(columns_.size(), {});
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const ColumnCodec& codec = columns_[j];
      if (codec.kind == Kind::Numerical) continue;
      std::vector<std::size_t> order;
      for (std::size_t l = 0; l < codec.codes.size(); ++l) {
        if (!std::isnan(codec.codes[l])) order.push_back(l);
      }
      if (order.empty()) throw Error(ErrorKind::ModelFormat, "column '" + schema_.column(j).name() + "' has no codes");
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return codec.codes[a] < codec.codes[b]; });
      auto& groups = groups_[j];
      for (std::size_t l : order) {
        const std::size_t weight = codec.kind == Kind::Ordinal ? 1 : codec.counts[l];
        if (groups.empty() || groups.back().code != codec.codes[l]) groups.push_back({codec.codes[l], {}, {}});
        groups.back().levels.push_back(l);
        groups.back().weights.push_back(weight);
      }
    }
  }

  TableSchema schema_;
  std::vector<ColumnCodec> columns_;
  Vector direction_;
  CategoricalEncoding categorical_ = CategoricalEncoding::PrincipalGuided;
  std::vector<std::vector<CodeGroup>> groups_;
};

}  // namespace tabkde
