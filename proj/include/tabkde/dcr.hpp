#pragma once

#include "tabkde/core.hpp"
#include "tabkde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace tabkde {

/// One-dimensional Gaussian mixture over nearest-neighbour distances. Used as
/// the radial kernel of the latent-space sampler.
struct DcrMixture {
  struct Component {
    double weight;
    double mean;
    double variance;
  };
  std::vector<Component> components;

  std::size_t k() const noexcept { return components.size(); }

  double mean() const noexcept {
    double m = 0.0;
    for (const auto& c : components) m += c.weight * c.mean;
    return m;
  }

  double log_pdf(double x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(components.size());
    for (const auto& c : components) {
      const double t = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance) -
                       0.5 * (x - c.mean) * (x - c.mean) / c.variance;
      terms.push_back(t);
      best = std::max(best, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
  }

  void validate() const {
    if (components.empty()) throw Error(ErrorKind::ModelFormat, "mixture has no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0) || !(c.variance > 0.0) || !std::isfinite(c.mean)) {
        throw Error(ErrorKind::ModelFormat, "invalid mixture component");
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::ModelFormat, "mixture weights do not sum to 1");
  }
};

inline double squared_distance(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

/// Distance from `query` to its nearest row among `rows` of `points`.
inline double nearest_distance(const Matrix& points, std::span<const std::size_t> rows, const double* query) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r : rows) {
    best = std::min(best, squared_distance(points.row(static_cast<Eigen::Index>(r)).data(), query, points.cols()));
  }
  return std::sqrt(best);
}

/// Nearest-record distances between random halves of `z`. Each repetition
/// shuffles the rows, measures every row of the smaller half (floor(n/2)
/// rows) against the larger half, and appends the distances.
inline std::vector<double> empirical_dcr(const Matrix& z, std::size_t repetitions, std::uint64_t seed,
                                         unsigned threads = 1) {
  const auto n = static_cast<std::size_t>(z.rows());
  if (n < 2) throw Error(ErrorKind::TooFewRows, "empirical DCR needs at least 2 rows");
  const std::size_t half = n / 2;
  std::vector<double> out(repetitions * half);
  std::vector<std::size_t> order(n);
  Rng rng(seed);
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::span<const std::size_t> queries(order.data(), half);
    std::span<const std::size_t> reference(order.data() + half, n - half);
    parallel_for(half, threads, [&](std::size_t q) {
      out[rep * half + q] = nearest_distance(z, reference, z.row(static_cast<Eigen::Index>(queries[q])).data());
    });
  }
  return out;
}

struct GmmCandidate {
  DcrMixture mixture;
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;  // log-likelihood after every E-step
};

struct GmmSelection {
  DcrMixture mixture;
  std::size_t best_index = 0;
  std::vector<GmmCandidate> candidates;  // candidates[i] has k = i + 1
};

struct EmOptions {
  std::size_t max_iterations = 500;
  double tolerance = 1e-6;  // on the mean per-sample log-likelihood
  double variance_floor = 1e-10;
};

namespace detail {

inline double log_sum_exp(const double* v, std::size_t k) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) m = std::max(m, v[c]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) s += std::exp(v[c] - m);
  return m + std::log(s);
}

/// EM from the given starting means; weights start uniform and variances at
/// the pooled variance.
inline GmmCandidate run_em(const std::vector<double>& x, std::vector<double> means, const EmOptions& opt) {
  const std::size_t n = x.size();
  const std::size_t k = means.size();
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double pooled = 0.0;
  for (double v : x) pooled += (v - mu) * (v - mu);
  pooled = std::max(pooled / static_cast<double>(n), opt.variance_floor);

  std::vector<double> weights(k, 1.0 / static_cast<double>(k));
  std::vector<double> vars(k, pooled);
  std::vector<double> logp(n * k);
  GmmCandidate out;
  double previous = -std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    // E-step
    std::vector<double> log_norm(k);
    for (std::size_t c = 0; c < k; ++c) {
      log_norm[c] = std::log(weights[c]) - 0.5 * std::log(2.0 * std::numbers::pi * vars[c]);
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &logp[i * k];
      for (std::size_t c = 0; c < k; ++c) {
        const double t = x[i] - means[c];
        row[c] = log_norm[c] - 0.5 * t * t / vars[c];
      }
      const double lse = log_sum_exp(row, k);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) row[c] = std::exp(row[c] - lse);
    }
    out.trace.push_back(ll);
    out.iterations = it + 1;
    const bool converged = std::abs(ll - previous) / static_cast<double>(n) < opt.tolerance;
    previous = ll;
    out.log_likelihood = ll;
    if (converged || it + 1 == opt.max_iterations) break;

    // M-step
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += logp[i * k + c];
        sx += logp[i * k + c] * x[i];
      }
      if (nk <= 0.0) {
        weights[c] = std::numeric_limits<double>::min();
        continue;
      }
      const double m = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) sv += logp[i * k + c] * (x[i] - m) * (x[i] - m);
      weights[c] = nk / static_cast<double>(n);
      means[c] = m;
      vars[c] = std::max(sv / nk, opt.variance_floor);
    }
  }

  for (std::size_t c = 0; c < k; ++c) out.mixture.components.push_back({weights[c], means[c], vars[c]});
  return out;
}

inline bool collapsed(const DcrMixture& m, std::size_t n) {
  for (const auto& c : m.components) {
    if (c.weight * static_cast<double>(n) < 1.0) return true;
  }
  return false;
}

inline DcrMixture normalized(const DcrMixture& m) {
  DcrMixture out;
  double total = 0.0;
  for (const auto& c : m.components) {
    if (c.weight > 0.0) total += c.weight;
  }
  for (const auto& c : m.components) {
    if (c.weight > 0.0) out.components.push_back({c.weight / total, c.mean, c.variance});
  }
  std::stable_sort(out.components.begin(), out.components.end(),
                   [](const auto& a, const auto& b) { return a.mean < b.mean; });
  return out;
}

}  // namespace detail

/// Fits one mixture per k in 1..k_max by EM and keeps the k with the lowest
/// BIC = (3k - 1) ln N - 2 ln L.
inline GmmSelection fit_gmm(const std::vector<double>& samples, std::size_t k_max = 10, std::uint64_t seed = 0,
                            unsigned threads = 1, const EmOptions& options = {}) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error(ErrorKind::DegenerateSamples, "need at least 2 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw Error(ErrorKind::DegenerateSamples, "all samples are identical");
  k_max = std::max<std::size_t>(1, k_max);

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());

  GmmSelection selection;
  selection.candidates.resize(k_max);
  parallel_for(k_max, threads, [&](std::size_t index) {
    const std::size_t k = index + 1;
    std::vector<double> means(k);
    for (std::size_t c = 0; c < k; ++c) {
      const double q = (static_cast<double>(c) + 0.5) / static_cast<double>(k);
      means[c] = sorted[std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)))];
    }
    GmmCandidate best = detail::run_em(samples, means, options);
    // Restart from seeded random means while a component has collapsed.
    Rng rng = make_stream(seed, 0x9e11, k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int attempt = 0; attempt < 3 && detail::collapsed(best.mixture, n); ++attempt) {
      for (auto& m : means) m = samples[pick(rng)];
      std::sort(means.begin(), means.end());
      GmmCandidate retry = detail::run_em(samples, means, options);
      if (retry.log_likelihood > best.log_likelihood) best = std::move(retry);
    }
    best.mixture = detail::normalized(best.mixture);
    const double params = 3.0 * static_cast<double>(k) - 1.0;
    best.bic = params * std::log(static_cast<double>(n)) - 2.0 * best.log_likelihood;
    selection.candidates[index] = std::move(best);
  });

  for (std::size_t i = 1; i < k_max; ++i) {
    if (selection.candidates[i].bic < selection.candidates[selection.best_index].bic) selection.best_index = i;
  }
  selection.mixture = selection.candidates[selection.best_index].mixture;
  return selection;
}

/// Draws a strictly positive radius: component by weight, then a Gaussian
/// draw, rejecting non-positive values (up to 1000 tries, then |draw|).
inline double sample_radius(const DcrMixture& mixture, Rng& rng) {
  double last = 0.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double u = uniform01(rng);
    const DcrMixture::Component* chosen = &mixture.components.back();
    for (const auto& c : mixture.components) {
      if (u < c.weight) {
        chosen = &c;
        break;
      }
      u -= c.weight;
    }
    last = chosen->mean + std::sqrt(chosen->variance) * standard_normal(rng);
    if (last > 0.0) return last;
  }
  last = std::abs(last);
  return last > 0.0 ? last : std::numeric_limits<double>::min();
}

}  // namespace tabkde
