#pragma once

#include "tabkde/core.hpp"
#include "tabkde/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace tabkde {

/// Weighted support set whose Gaussian KDE approximates the KDE of the full
/// latent matrix.
struct CoresetModel {
  Matrix points;                // m x d, inside [0, 1]^d
  std::vector<double> weights;  // m, nonnegative, sum to 1
  double bandwidth = 0.2;

  std::size_t size() const noexcept { return weights.size(); }

  void validate() const {
    if (weights.size() != static_cast<std::size_t>(points.rows()) || weights.empty()) {
      throw Error(ErrorKind::ModelFormat, "coreset weights/points mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(ErrorKind::ModelFormat, "negative coreset weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::ModelFormat, "coreset weights do not sum to 1");
    if (!(bandwidth > 0.0)) throw Error(ErrorKind::ModelFormat, "coreset bandwidth must be positive");
  }
};

/// sum_i w_i exp(-|z - q_i|^2 / h^2)
inline double kde_density(const Matrix& points, std::span<const double> weights, double h, const double* z) {
  const double inv_h2 = 1.0 / (h * h);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double* q = points.row(i).data();
    double d2 = 0.0;
    for (Eigen::Index k = 0; k < points.cols(); ++k) d2 += (z[k] - q[k]) * (z[k] - q[k]);
    sum += weights[static_cast<std::size_t>(i)] * std::exp(-d2 * inv_h2);
  }
  return sum;
}

inline double kde_density(const Matrix& points, std::span<const double> weights, double h, const Vector& z) {
  return kde_density(points, weights, h, z.data());
}

/// Uniform-weight KDE of all rows of `data`.
inline double full_kde_density(const Matrix& data, double h, const double* z) {
  const double inv_h2 = 1.0 / (h * h);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double* q = data.row(i).data();
    double d2 = 0.0;
    for (Eigen::Index k = 0; k < data.cols(); ++k) d2 += (z[k] - q[k]) * (z[k] - q[k]);
    sum += std::exp(-d2 * inv_h2);
  }
  return sum / static_cast<double>(data.rows());
}

/// m rows drawn uniformly without replacement, each with weight 1/m.
inline CoresetModel random_coreset(const Matrix& z, std::size_t m, std::uint64_t seed, double bandwidth = 0.2) {
  const auto n = static_cast<std::size_t>(z.rows());
  if (m == 0) throw Error(ErrorKind::Config, "coreset size must be positive");
  if (m > n) {
    throw Error(ErrorKind::CoresetTooLarge,
                "coreset size " + std::to_string(m) + " exceeds " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  CoresetModel out;
  out.points.resize(static_cast<Eigen::Index>(m), z.cols());
  for (std::size_t i = 0; i < m; ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(order[i]));
  }
  out.weights.assign(m, 1.0 / static_cast<double>(m));
  out.bandwidth = bandwidth;
  return out;
}

inline std::vector<double> softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(logits.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) total += (w[static_cast<std::size_t>(i)] = std::exp(logits(i) - top));
  for (double& v : w) v /= total;
  return w;
}

/// Trainable coreset state: support points and unconstrained weight logits
/// (weights = softmax(logits)).
struct CoresetParams {
  Matrix points;
  Vector logits;
};

struct CoresetGradient {
  double loss = 0.0;
  Matrix points;
  Vector logits;
};

/// Mean squared error between the coreset KDE and `targets` at the probe
/// rows, with its gradient with respect to points and logits.
inline CoresetGradient coreset_loss_gradient(const CoresetParams& params, double h, const Matrix& probes,
                                             std::span<const double> targets, unsigned threads = 1) {
  const auto m = params.points.rows();
  const auto d = params.points.cols();
  const auto b = probes.rows();
  const std::vector<double> w = softmax(params.logits);
  const double inv_h2 = 1.0 / (h * h);

  // kernel(p, i) and residual(p)
  Eigen::MatrixXd kernel(b, m);
  std::vector<double> residual(static_cast<std::size_t>(b));
  parallel_for(static_cast<std::size_t>(b), threads, [&](std::size_t p) {
    const auto pi = static_cast<Eigen::Index>(p);
    double approx = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = probes(pi, k) - params.points(i, k);
        d2 += t * t;
      }
      kernel(pi, i) = std::exp(-d2 * inv_h2);
      approx += w[static_cast<std::size_t>(i)] * kernel(pi, i);
    }
    residual[p] = approx - targets[p];
  });

  CoresetGradient g;
  for (double r : residual) g.loss += r * r;
  g.loss /= static_cast<double>(b);

  const double scale = 2.0 / static_cast<double>(b);
  Vector grad_w(m);
  g.points = Matrix::Zero(m, d);
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    double gw = 0.0;
    for (Eigen::Index p = 0; p < b; ++p) {
      const double rk = residual[static_cast<std::size_t>(p)] * kernel(p, i);
      gw += rk;
      const double c = scale * w[iu] * rk * 2.0 * inv_h2;
      for (Eigen::Index k = 0; k < d; ++k) g.points(i, k) += c * (probes(p, k) - params.points(i, k));
    }
    grad_w(i) = scale * gw;
  });
  double mean_gw = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) mean_gw += w[static_cast<std::size_t>(i)] * grad_w(i);
  g.logits.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) g.logits(i) = w[static_cast<std::size_t>(i)] * (grad_w(i) - mean_gw);
  return g;
}

inline double coreset_loss(const CoresetParams& params, double h, const Matrix& probes,
                           std::span<const double> targets) {
  const std::vector<double> w = softmax(params.logits);
  double loss = 0.0;
  for (Eigen::Index p = 0; p < probes.rows(); ++p) {
    const double r = kde_density(params.points, w, h, probes.row(p).data()) - targets[static_cast<std::size_t>(p)];
    loss += r * r;
  }
  return loss / static_cast<double>(probes.rows());
}

/// Probe rows uniform on [0, 1]^d.
inline Matrix uniform_probes(Eigen::Index count, Eigen::Index d, Rng& rng) {
  Matrix probes(count, d);
  for (Eigen::Index p = 0; p < count; ++p) {
    for (Eigen::Index k = 0; k < d; ++k) probes(p, k) = uniform01(rng);
  }
  return probes;
}

inline std::vector<double> full_kde_targets(const Matrix& data, double h, const Matrix& probes, unsigned threads) {
  std::vector<double> out(static_cast<std::size_t>(probes.rows()));
  parallel_for(out.size(), threads, [&](std::size_t p) {
    out[p] = full_kde_density(data, h, probes.row(static_cast<Eigen::Index>(p)).data());
  });
  return out;
}

struct CoresetTrainOptions {
  std::size_t epochs = 30;
  double learning_rate = 0.01;
  std::size_t batch = 256;
  /// Minibatch steps per epoch; 0 means ceil(n / batch).
  std::size_t steps_per_epoch = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CoresetTraining {
  CoresetModel model;
  std::vector<double> step_loss;   // minibatch loss before each update
  std::vector<double> epoch_loss;  // mean of step_loss per epoch

  /// Mean loss over the last 10% of steps is no larger than over the first 10%.
  bool loss_decreased() const {
    if (step_loss.empty()) return true;
    const std::size_t span = std::max<std::size_t>(1, step_loss.size() / 10);
    const double first = std::accumulate(step_loss.begin(), step_loss.begin() + static_cast<std::ptrdiff_t>(span), 0.0);
    const double last = std::accumulate(step_loss.end() - static_cast<std::ptrdiff_t>(span), step_loss.end(), 0.0);
    return last <= first;
  }
};

/// Minibatch SGD on E_{z ~ U[0,1]^d}[(coreset KDE(z) - full KDE(z))^2] over
/// support points and weight logits, starting from a random coreset.
/// Support points are clamped to [0, 1]^d after each step.
inline CoresetTraining train_coreset(const Matrix& z, std::size_t m, double h, const CoresetTrainOptions& options,
                                     const std::function<void(std::size_t, double)>& on_epoch = {}) {
  if (!(h > 0.0)) throw Error(ErrorKind::Config, "bandwidth must be positive");
  CoresetModel init = random_coreset(z, m, options.seed, h);
  CoresetParams params{std::move(init.points), Vector::Zero(static_cast<Eigen::Index>(m))};

  const auto n = static_cast<std::size_t>(z.rows());
  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  const std::size_t steps = options.steps_per_epoch ? options.steps_per_epoch : (n + batch - 1) / batch;
  Rng rng = make_stream(options.seed, 0xC0DE, 0);

  CoresetTraining out;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double epoch_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const Matrix probes = uniform_probes(static_cast<Eigen::Index>(batch), z.cols(), rng);
      const std::vector<double> targets = full_kde_targets(z, h, probes, options.threads);
      const CoresetGradient g = coreset_loss_gradient(params, h, probes, targets, options.threads);
      out.step_loss.push_back(g.loss);
      epoch_sum += g.loss;
      params.points -= options.learning_rate * g.points;
      params.logits -= options.learning_rate * g.logits;
      params.points = params.points.cwiseMax(0.0).cwiseMin(1.0);
    }
    out.epoch_loss.push_back(epoch_sum / static_cast<double>(steps));
    if (on_epoch) on_epoch(epoch + 1, out.epoch_loss.back());
  }
  out.model.points = std::move(params.points);
  out.model.weights = softmax(params.logits);
  out.model.bandwidth = h;
  return out;
}

struct BandwidthScore {
  double bandwidth;
  double initial_loss;
  double final_loss;
  std::optional<double> relative_decrease;  // empty when the initial loss is zero
};

struct BandwidthSelection {
  double bandwidth;
  std::vector<BandwidthScore> scores;
};

inline std::vector<double> default_bandwidth_candidates() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

/// Trains a short probe run per candidate bandwidth and scores each by the
/// relative drop of the loss on a fixed uniform probe set. Returns the
/// smallest bandwidth whose score is within 5% of the best.
inline BandwidthSelection select_bandwidth(const Matrix& z, std::size_t m, std::vector<double> candidates,
                                           CoresetTrainOptions options, std::size_t probe_count = 1024) {
  if (candidates.empty()) throw Error(ErrorKind::Config, "no candidate bandwidths");
  std::sort(candidates.begin(), candidates.end());
  BandwidthSelection out{candidates.front(), {}};
  if (candidates.size() == 1) return out;

  Rng rng = make_stream(options.seed, 0xB4D, 0);
  const Matrix probes = uniform_probes(static_cast<Eigen::Index>(probe_count), z.cols(), rng);
  for (double h : candidates) {
    const std::vector<double> targets = full_kde_targets(z, h, probes, options.threads);
    const CoresetModel start = random_coreset(z, m, options.seed, h);
    const CoresetParams start_params{start.points, Vector::Zero(static_cast<Eigen::Index>(m))};
    const double initial = coreset_loss(start_params, h, probes, targets);
    BandwidthScore score{h, initial, initial, std::nullopt};
    // loss at rounding level (an exact copy summed in another order) counts as zero
    double scale = 0.0;
    for (double t : targets) scale += t * t;
    scale /= static_cast<double>(targets.size());
    if (initial > 1e-20 * scale && initial > std::numeric_limits<double>::min()) {
      const CoresetTraining trained = train_coreset(z, m, h, options);
      Vector logits(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) logits(static_cast<Eigen::Index>(i)) = std::log(trained.model.weights[i]);
      score.final_loss = coreset_loss(CoresetParams{trained.model.points, logits}, h, probes, targets);
      score.relative_decrease = (initial - score.final_loss) / initial;
    }
    out.scores.push_back(score);
  }
  std::optional<double> best;
  for (const auto& s : out.scores) {
    if (s.relative_decrease && (!best || *s.relative_decrease > *best)) best = s.relative_decrease;
  }
  if (!best) return out;
  for (const auto& s : out.scores) {
    if (s.relative_decrease && *s.relative_decrease >= *best - 0.05 * std::abs(*best)) {
      out.bandwidth = s.bandwidth;
      break;
    }
  }
  return out;
}

}  // namespace tabkde
