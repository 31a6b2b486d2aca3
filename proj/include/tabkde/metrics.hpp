#pragma once

#include "tabkde/core.hpp"
#include "tabkde/dcr.hpp"
#include "tabkde/error.hpp"
#include "tabkde/model.hpp"
#include "tabkde/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

namespace tabkde {

namespace detail {

inline void require_same_schema(const Table& a, const Table& b) {
  if (!(a.schema() == b.schema())) throw Error(ErrorKind::SchemaMismatch, "tables have different schemas");
}

inline void require_rows(const Table& t, const char* what) {
  if (t.rows() == 0) throw Error(ErrorKind::EmptyTable, std::string(what) + " table is empty");
}

inline std::vector<double> level_frequencies(const Table& t, std::size_t j) {
  std::vector<double> p(t.schema().column(j).levels().size(), 0.0);
  for (std::size_t i = 0; i < t.rows(); ++i) p[t.level(i, j)] += 1.0;
  for (double& v : p) v /= static_cast<double>(t.rows());
  return p;
}

}  // namespace detail

/// sup_x |F_a(x) - F_b(x)| over the two empirical CDFs.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    const double x = (j == b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

/// Half the L1 distance between two probability vectors of equal length.
inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

struct MarginalReport {
  std::vector<double> per_column;  // each in [0, 1]
  double average = 0.0;            // in [0, 1]
};

/// KS statistic for Numerical columns, total variation of the label
/// frequencies for Ordinal and Categorical columns.
inline MarginalReport marginal_error(const Table& real, const Table& synth) {
  detail::require_same_schema(real, synth);
  detail::require_rows(real, "real");
  detail::require_rows(synth, "synthetic");
  MarginalReport out;
  for (std::size_t j = 0; j < real.cols(); ++j) {
    if (real.schema().column(j).is_numerical()) {
      auto a = real.column(j);
      auto b = synth.column(j);
      out.per_column.push_back(ks_statistic({a.begin(), a.end()}, {b.begin(), b.end()}));
    } else {
      out.per_column.push_back(total_variation(detail::level_frequencies(real, j), detail::level_frequencies(synth, j)));
    }
  }
  out.average = std::accumulate(out.per_column.begin(), out.per_column.end(), 0.0) /
                static_cast<double>(out.per_column.size());
  return out;
}

/// Pearson correlation; 0 when either side is constant.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Decile edges of a numerical column of the reference table.
inline std::vector<double> decile_edges(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int k = 1; k <= 9; ++k) {
    const auto idx = static_cast<std::size_t>(std::floor(k / 10.0 * static_cast<double>(sorted.size() - 1)));
    edges.push_back(sorted[idx]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

namespace detail {

/// Discrete codes of column j: label index, or decile bin for Numerical.
struct Discretized {
  std::vector<std::size_t> codes;
  std::size_t cardinality;
};

inline Discretized discretize(const Table& t, std::size_t j, const std::vector<double>& edges) {
  Discretized out;
  const Column& c = t.schema().column(j);
  out.codes.resize(t.rows());
  if (c.is_numerical()) {
    out.cardinality = edges.size() + 1;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      out.codes[i] = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), t.value(i, j)) - edges.begin());
    }
  } else {
    out.cardinality = c.levels().size();
    for (std::size_t i = 0; i < t.rows(); ++i) out.codes[i] = t.level(i, j);
  }
  return out;
}

inline std::vector<double> contingency(const Discretized& a, const Discretized& b) {
  std::vector<double> p(a.cardinality * b.cardinality, 0.0);
  for (std::size_t i = 0; i < a.codes.size(); ++i) p[a.codes[i] * b.cardinality + b.codes[i]] += 1.0;
  for (double& v : p) v /= static_cast<double>(a.codes.size());
  return p;
}

}  // namespace detail

struct PairError {
  std::size_t first;
  std::size_t second;
  double value;  // in [0, 1]
};

struct PairwiseReport {
  std::vector<PairError> pairs;
  double average = 0.0;
};

/// Numerical pairs: |rho_real - rho_synth| / 2. Pairs with a discrete member:
/// total variation between the joint contingency tables, numerical members
/// binned by the deciles of the real column.
inline PairwiseReport pairwise_error(const Table& real, const Table& synth) {
  detail::require_same_schema(real, synth);
  detail::require_rows(real, "real");
  detail::require_rows(synth, "synthetic");
  const std::size_t d = real.cols();
  if (d < 2) throw Error(ErrorKind::SchemaMismatch, "pairwise error needs at least two columns");

  std::vector<std::vector<double>> edges(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (real.schema().column(j).is_numerical()) edges[j] = decile_edges(real.column(j));
  }
  PairwiseReport out;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      const bool both_numeric = real.schema().column(a).is_numerical() && real.schema().column(b).is_numerical();
      double value;
      if (both_numeric) {
        value = std::abs(pearson(real.column(a), real.column(b)) - pearson(synth.column(a), synth.column(b))) / 2.0;
      } else {
        const auto ra = detail::discretize(real, a, edges[a]);
        const auto rb = detail::discretize(real, b, edges[b]);
        const auto sa = detail::discretize(synth, a, edges[a]);
        const auto sb = detail::discretize(synth, b, edges[b]);
        value = total_variation(detail::contingency(ra, rb), detail::contingency(sa, sb));
      }
      out.pairs.push_back({a, b, value});
    }
  }
  double total = 0.0;
  for (const auto& p : out.pairs) total += p.value;
  out.average = total / static_cast<double>(out.pairs.size());
  return out;
}

/// Area under the ROC curve (Mann-Whitney, ties share their average rank).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) return 0.5;
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

struct LogisticOptions {
  double l2 = 1e-4;
  std::size_t iterations = 1000;
};

/// L2-regularized logistic regression by full-batch gradient descent with a
/// step of 1 / (Lipschitz bound). Returns weights with the bias last.
inline Vector fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, const LogisticOptions& opt = {}) {
  const auto n = x.rows();
  const auto p = x.cols();
  Eigen::MatrixXd xb(n, p + 1);
  xb << x, Eigen::VectorXd::Ones(n);
  const double mean_sq = xb.rowwise().squaredNorm().mean();
  const double step = 1.0 / (0.25 * mean_sq + opt.l2);
  Vector w = Vector::Zero(p + 1);
  Vector target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = y[static_cast<std::size_t>(i)];
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    const Vector margin = xb * w;
    const Vector prob = margin.unaryExpr([](double m) { return 1.0 / (1.0 + std::exp(-m)); });
    Vector grad = xb.transpose() * (prob - target) / static_cast<double>(n);
    grad.head(p) += opt.l2 * w.head(p);
    w -= step * grad;
  }
  return w;
}

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

/// Numerical columns z-scored over both tables, discrete columns one-hot.
inline Eigen::MatrixXd c2st_features(const Table& a, const Table& b) {
  const auto& schema = a.schema();
  std::size_t width = 0;
  for (const auto& c : schema.columns()) width += c.is_numerical() ? 1 : c.levels().size();
  const std::size_t n = a.rows() + b.rows();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  std::size_t offset = 0;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const Column& c = schema.column(j);
    auto cell = [&](std::size_t i) { return i < a.rows() ? a.value(i, j) : b.value(i - a.rows(), j); };
    if (c.is_numerical()) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += cell(i);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (cell(i) - mean) * (cell(i) - mean);
      const double sd = var > 0.0 ? std::sqrt(var / static_cast<double>(n)) : 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offset)) = (cell(i) - mean) / sd;
      }
      offset += 1;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offset + static_cast<std::size_t>(cell(i)))) = 1.0;
      }
      offset += c.levels().size();
    }
  }
  return x;
}

}  // namespace detail

struct C2stResult {
  double score = 1.0;  // 1 - 2 * (max(AUC, 0.5) - 0.5)
  double mean_auc = 0.5;
  std::vector<double> fold_auc;
};

/// Classifier two-sample test: logistic regression separating synthetic (1)
/// from holdout (0) rows under 3-fold cross-validation. Folds are assigned by
/// a hash of the row contents and seed, so row order does not matter.
inline C2stResult c2st(const Table& synth, const Table& holdout, std::uint64_t seed = 0,
                       const LogisticOptions& options = {}) {
  detail::require_same_schema(synth, holdout);
  detail::require_rows(synth, "synthetic");
  detail::require_rows(holdout, "holdout");
  constexpr std::size_t kFolds = 3;
  const Eigen::MatrixXd x = detail::c2st_features(synth, holdout);
  const std::size_t n = synth.rows() + holdout.rows();
  std::vector<int> labels(n);
  std::vector<std::size_t> fold(n);
  std::unordered_map<std::uint64_t, std::uint64_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i < synth.rows() ? 1 : 0;
    const Table& t = i < synth.rows() ? synth : holdout;
    const std::size_t r = i < synth.rows() ? i : i - synth.rows();
    std::uint64_t h = detail::fnv1a(&seed, sizeof seed);
    h = detail::fnv1a(&labels[i], sizeof(int), h);
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const double v = t.value(r, j);
      h = detail::fnv1a(&v, sizeof v, h);
    }
    // duplicates are spread by their occurrence number
    const std::uint64_t occurrence = seen[h]++;
    h = detail::fnv1a(&occurrence, sizeof occurrence, h);
    fold[i] = h % kFolds;
  }

  C2stResult out;
  for (std::size_t f = 0; f < kFolds; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    std::vector<int> y_train, y_test;
    for (auto i : train_rows) y_train.push_back(labels[static_cast<std::size_t>(i)]);
    for (auto i : test_rows) y_test.push_back(labels[static_cast<std::size_t>(i)]);
    const auto has_both = [](const std::vector<int>& y) {
      return std::find(y.begin(), y.end(), 0) != y.end() && std::find(y.begin(), y.end(), 1) != y.end();
    };
    if (!has_both(y_train) || !has_both(y_test)) continue;
    const Vector w = fit_logistic(x(train_rows, Eigen::all), y_train, options);
    std::vector<double> scores;
    for (auto i : test_rows) scores.push_back(x.row(i).dot(w.head(x.cols())) + w(x.cols()));
    out.fold_auc.push_back(roc_auc(scores, y_test));
  }
  if (!out.fold_auc.empty()) {
    out.mean_auc = std::accumulate(out.fold_auc.begin(), out.fold_auc.end(), 0.0) / static_cast<double>(out.fold_auc.size());
  }
  out.score = 1.0 - 2.0 * (std::max(out.mean_auc, 0.5) - 0.5);
  return out;
}

/// Distances from each row of `queries` to its nearest row of `reference`.
inline std::vector<double> nearest_distances(const Matrix& queries, const Matrix& reference, unsigned threads = 1) {
  std::vector<std::size_t> all(static_cast<std::size_t>(reference.rows()));
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = nearest_distance(reference, all, queries.row(static_cast<Eigen::Index>(i)).data());
  });
  return out;
}

struct DcrComparison {
  std::vector<double> to_train;
  std::vector<double> to_holdout;
  double score_percent = 50.0;
};

/// Distances to closest record in latent space from every synthetic row to the
/// train and holdout tables, and the share of rows closer to train (ties
/// count one half), in percent.
inline DcrComparison dcr_histogram(const Table& synth, const Table& train, const Table& holdout,
                                   const TabKdeModel& model, unsigned threads = 1) {
  detail::require_rows(synth, "synthetic");
  detail::require_rows(train, "train");
  detail::require_rows(holdout, "holdout");
  const Matrix s = model.to_latent(synth);
  DcrComparison out;
  out.to_train = nearest_distances(s, model.to_latent(train), threads);
  out.to_holdout = nearest_distances(s, model.to_latent(holdout), threads);
  double closer = 0.0;
  for (std::size_t i = 0; i < out.to_train.size(); ++i) {
    if (out.to_train[i] < out.to_holdout[i]) closer += 1.0;
    else if (out.to_train[i] == out.to_holdout[i]) closer += 0.5;
  }
  out.score_percent = 100.0 * closer / static_cast<double>(out.to_train.size());
  return out;
}

inline double dcr_score(const Table& synth, const Table& train, const Table& holdout, const TabKdeModel& model,
                        unsigned threads = 1) {
  return dcr_histogram(synth, train, holdout, model, threads).score_percent;
}

/// Nearest-neighbour odds p / (100 - p); infinity at p = 100.
inline double nno(double percent) {
  if (percent >= 100.0) return std::numeric_limits<double>::infinity();
  return percent / (100.0 - percent);
}

struct MetricsReport {
  MarginalReport marginal;
  PairwiseReport pairwise;
  C2stResult c2st;
  double dcr_score_percent = 50.0;
  double nno = 1.0;
};

inline MetricsReport evaluate(const Table& synth, const Table& train, const Table& holdout, const TabKdeModel& model,
                              std::uint64_t seed = 0, unsigned threads = 1) {
  MetricsReport r;
  r.marginal = marginal_error(train, synth);
  r.pairwise = pairwise_error(train, synth);
  r.c2st = c2st(synth, holdout, seed);
  r.dcr_score_percent = dcr_score(synth, train, holdout, model, threads);
  r.nno = nno(r.dcr_score_percent);
  return r;
}

}  // namespace tabkde
