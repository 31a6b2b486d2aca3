#pragma once

#include "tabkde/core.hpp"
#include "tabkde/dcr.hpp"
#include "tabkde/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace tabkde {

/// Sample covariance of the latent rows and a Cholesky factor of
/// sigma + ridge * I used to draw correlated directions.
struct LatentCovariance {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd cholesky;  // lower triangular
  double ridge = 0.0;

  std::size_t dims() const noexcept { return static_cast<std::size_t>(sigma.rows()); }

  /// Factorizes sigma + eps * I, starting from eps = 1e-8 * trace / d and
  /// growing by decades until the factorization succeeds.
  static LatentCovariance from_sigma(Eigen::MatrixXd sigma) {
    const auto d = sigma.rows();
    if (d == 0) throw Error(ErrorKind::DegenerateMatrix, "covariance has no dimensions");
    LatentCovariance out;
    out.sigma = std::move(sigma);
    double eps = 1e-8 * out.sigma.trace() / static_cast<double>(d);
    if (!(eps > 0.0)) eps = 1e-8;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    for (int attempt = 0; attempt < 40; ++attempt, eps *= 10.0) {
      Eigen::LLT<Eigen::MatrixXd> llt(out.sigma + eps * identity);
      if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
        out.cholesky = llt.matrixL();
        out.ridge = eps;
        return out;
      }
    }
    throw Error(ErrorKind::DegenerateMatrix, "covariance could not be factorized");
  }
};

/// Unbiased sample covariance (n - 1 denominator) of the rows of z.
inline LatentCovariance covariance(const Matrix& z) {
  const auto n = z.rows();
  if (n < 2) throw Error(ErrorKind::TooFewRows, "covariance needs at least 2 rows");
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mean;
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return LatentCovariance::from_sigma(std::move(sigma));
}

/// Unit direction v / |v| with v ~ N(0, sigma).
inline Vector sample_direction(const LatentCovariance& cov, Rng& rng) {
  const auto d = cov.cholesky.rows();
  Vector g(d);
  for (;;) {
    for (Eigen::Index k = 0; k < d; ++k) g(k) = standard_normal(rng);
    Vector v = cov.cholesky.triangularView<Eigen::Lower>() * g;
    const double norm = v.norm();
    if (norm >= 1e-12) return v / norm;
  }
}

inline bool in_unit_cube(const Vector& z) {
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!(z(k) >= 0.0 && z(k) <= 1.0)) return false;
  }
  return true;
}

enum class BoundaryPolicy {
  Iterative,   // resample only the violating coordinates of the direction
  KeepSeed,    // redraw radius and direction for the same seed
  ChangeSeed,  // one attempt per seed
  None,        // no boundary handling
};

constexpr std::string_view to_string(BoundaryPolicy p) noexcept {
  switch (p) {
    case BoundaryPolicy::Iterative: return "iterative";
    case BoundaryPolicy::KeepSeed: return "keep_seed";
    case BoundaryPolicy::ChangeSeed: return "change_seed";
    case BoundaryPolicy::None: return "none";
  }
  return "?";
}

inline std::optional<BoundaryPolicy> parse_boundary_policy(std::string_view s) {
  if (s == "iterative") return BoundaryPolicy::Iterative;
  if (s == "keep_seed" || s == "keep-seed") return BoundaryPolicy::KeepSeed;
  if (s == "change_seed" || s == "change-seed") return BoundaryPolicy::ChangeSeed;
  if (s == "none") return BoundaryPolicy::None;
  return std::nullopt;
}

/// One pass of the coordinate-correction loop, reported to observers.
struct CorrectionStep {
  std::size_t iteration;          // 1-based
  std::vector<Eigen::Index> violating;
  double subvector_norm_before;   // |u_J| before the substitution
  double subvector_norm_after;    // |u_J| after it
};

struct NoObserver {
  void operator()(const CorrectionStep&) const noexcept {}
};

struct PerturbedSample {
  Vector point;
  std::size_t iterations = 0;
};

/// Coordinate correction: starting from z' = seed + r * u, while some
/// coordinates leave [0, 1], replace just those entries of u by a rescaled
/// slice of a fresh direction w so that |u_J| is unchanged. Returns nullopt
/// if the point is still outside after `max_iterations` corrections.
template <class Observer = NoObserver>
std::optional<PerturbedSample> correct_to_unit_cube(const Vector& seed, double radius, Vector u,
                                                    const LatentCovariance& cov, Rng& rng,
                                                    std::size_t max_iterations, Observer&& observe = {}) {
  Vector z = seed + radius * u;
  std::vector<Eigen::Index> violating;
  for (std::size_t it = 0;; ++it) {
    violating.clear();
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      if (!(z(k) >= 0.0 && z(k) <= 1.0)) violating.push_back(k);
    }
    if (violating.empty()) return PerturbedSample{std::move(z), it};
    if (it == max_iterations) return std::nullopt;

    double u_norm = 0.0;
    for (Eigen::Index k : violating) u_norm += u(k) * u(k);
    u_norm = std::sqrt(u_norm);
    Vector w;
    double w_norm = 0.0;
    do {
      w = sample_direction(cov, rng);
      w_norm = 0.0;
      for (Eigen::Index k : violating) w_norm += w(k) * w(k);
      w_norm = std::sqrt(w_norm);
    } while (w_norm < 1e-12);
    const double s = u_norm / w_norm;
    double after = 0.0;
    for (Eigen::Index k : violating) {
      u(k) = s * w(k);
      after += u(k) * u(k);
      z(k) = seed(k) + radius * u(k);
    }
    observe(CorrectionStep{it + 1, violating, u_norm, std::sqrt(after)});
  }
}

/// Plain KDE perturbation of a given seed point (no boundary handling).
inline Vector perturb(const Vector& seed, const DcrMixture& f, const LatentCovariance& cov, Rng& rng) {
  const double r = sample_radius(f, rng);
  return seed + r * sample_direction(cov, rng);
}

template <class Observer = NoObserver>
std::optional<PerturbedSample> perturb_iterative(const Vector& seed, const DcrMixture& f,
                                                 const LatentCovariance& cov, Rng& rng,
                                                 std::size_t max_iterations, Observer&& observe = {}) {
  const double r = sample_radius(f, rng);
  Vector u = sample_direction(cov, rng);
  return correct_to_unit_cube(seed, r, std::move(u), cov, rng, max_iterations, std::forward<Observer>(observe));
}

/// Whole-perturbation rejection for a fixed seed: up to `max_attempts` draws
/// of (radius, direction). `iterations` counts the retries before success.
inline std::optional<PerturbedSample> perturb_keep_seed(const Vector& seed, const DcrMixture& f,
                                                        const LatentCovariance& cov, Rng& rng,
                                                        std::size_t max_attempts) {
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    Vector z = perturb(seed, f, cov, rng);
    if (in_unit_cube(z)) return PerturbedSample{std::move(z), attempt};
  }
  return std::nullopt;
}

inline std::optional<PerturbedSample> perturb_change_seed(const Vector& seed, const DcrMixture& f,
                                                          const LatentCovariance& cov, Rng& rng) {
  return perturb_keep_seed(seed, f, cov, rng, 1);
}

inline std::size_t default_max_attempts(std::size_t d) { return 10 * d; }

/// Uniformly chosen training row.
inline Vector uniform_seed(const Matrix& z, Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, z.rows() - 1);
  return z.row(pick(rng)).transpose();
}

inline Vector sample_kde(const Matrix& z, const DcrMixture& f, const LatentCovariance& cov, Rng& rng) {
  const Vector seed = uniform_seed(z, rng);
  return perturb(seed, f, cov, rng);
}

inline std::optional<PerturbedSample> sample_kde_iterative(const Matrix& z, const DcrMixture& f,
                                                           const LatentCovariance& cov, Rng& rng,
                                                           std::optional<std::size_t> max_attempts = {}) {
  const Vector seed = uniform_seed(z, rng);
  return perturb_iterative(seed, f, cov, rng, max_attempts.value_or(default_max_attempts(cov.dims())));
}

inline std::optional<PerturbedSample> sample_keep_seed(const Matrix& z, const DcrMixture& f,
                                                       const LatentCovariance& cov, Rng& rng,
                                                       std::optional<std::size_t> max_attempts = {}) {
  const Vector seed = uniform_seed(z, rng);
  return perturb_keep_seed(seed, f, cov, rng, max_attempts.value_or(default_max_attempts(cov.dims())));
}

inline std::optional<Vector> sample_change_seed(const Matrix& z, const DcrMixture& f, const LatentCovariance& cov,
                                                Rng& rng) {
  const Vector seed = uniform_seed(z, rng);
  auto s = perturb_change_seed(seed, f, cov, rng);
  if (!s) return std::nullopt;
  return std::move(s->point);
}

/// Picks seed rows from a support set, either uniformly or by weight.
class SeedPicker {
 public:
  explicit SeedPicker(const Matrix& points) : points_(&points) {}

  SeedPicker(const Matrix& points, std::span<const double> weights) : points_(&points) {
    if (weights.size() != static_cast<std::size_t>(points.rows())) {
      throw Error(ErrorKind::SchemaMismatch, "one weight per support point required");
    }
    cumulative_.resize(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) cumulative_[i] = (total += weights[i]);
    for (double& c : cumulative_) c /= total;
  }

  Eigen::Index pick_index(Rng& rng) const {
    if (cumulative_.empty()) {
      std::uniform_int_distribution<Eigen::Index> pick(0, points_->rows() - 1);
      return pick(rng);
    }
    const double u = uniform01(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<Eigen::Index>(it - cumulative_.begin());
  }

  Vector pick(Rng& rng) const { return points_->row(pick_index(rng)).transpose(); }

 private:
  const Matrix* points_;
  std::vector<double> cumulative_;
};

struct LatentDraw {
  Vector point;
  std::size_t iterations = 0;  // corrections (iterative) or retries (keep-seed) of the accepted seed
  std::size_t failures = 0;    // seeds discarded before acceptance
};

inline constexpr std::size_t kStallWindow = 10000;

/// Draws one accepted latent point under `policy`, restarting with a fresh
/// seed whenever a seed is discarded.
inline LatentDraw draw_latent(const SeedPicker& seeds, BoundaryPolicy policy, const DcrMixture& f,
                              const LatentCovariance& cov, Rng& rng, std::size_t max_attempts) {
  LatentDraw out;
  for (std::size_t attempt = 0; attempt < kStallWindow; ++attempt) {
    const Vector seed = seeds.pick(rng);
    std::optional<PerturbedSample> s;
    switch (policy) {
      case BoundaryPolicy::None:
        out.point = perturb(seed, f, cov, rng);
        return out;
      case BoundaryPolicy::Iterative: s = perturb_iterative(seed, f, cov, rng, max_attempts); break;
      case BoundaryPolicy::KeepSeed: s = perturb_keep_seed(seed, f, cov, rng, max_attempts); break;
      case BoundaryPolicy::ChangeSeed: s = perturb_change_seed(seed, f, cov, rng); break;
    }
    if (s) {
      out.point = std::move(s->point);
      out.iterations = s->iterations;
      return out;
    }
    ++out.failures;
  }
  throw Error(ErrorKind::GenerationStalled, "no sample accepted in " + std::to_string(kStallWindow) +
                                                " consecutive seeds under policy " + std::string(to_string(policy)));
}

/// Boundary-handling statistics over a generation run.
struct SampleStats {
  std::vector<std::size_t> iterations;  // per accepted sample
  std::size_t failures = 0;

  std::size_t max_iterations() const {
    return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
  }
  double mean_iterations() const {
    if (iterations.empty()) return 0.0;
    double s = 0.0;
    for (auto v : iterations) s += static_cast<double>(v);
    return s / static_cast<double>(iterations.size());
  }
  double stddev_iterations() const {
    if (iterations.size() < 2) return 0.0;
    const double m = mean_iterations();
    double s = 0.0;
    for (auto v : iterations) s += (static_cast<double>(v) - m) * (static_cast<double>(v) - m);
    return std::sqrt(s / static_cast<double>(iterations.size() - 1));
  }
  double failure_percent() const {
    return iterations.empty() ? 0.0 : 100.0 * static_cast<double>(failures) / static_cast<double>(iterations.size());
  }
};

}  // namespace tabkde
