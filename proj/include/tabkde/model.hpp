#pragma once

#include "tabkde/copula.hpp"
#include "tabkde/core.hpp"
#include "tabkde/coreset.hpp"
#include "tabkde/dcr.hpp"
#include "tabkde/encoding.hpp"
#include "tabkde/kde_sampler.hpp"
#include "tabkde/table.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tabkde {

struct FitOptions {
  std::uint64_t seed = 0;
  BoundaryPolicy policy = BoundaryPolicy::Iterative;
  std::size_t dcr_repetitions = 5;
  std::size_t max_components = 10;
  CategoricalEncoding categorical = CategoricalEncoding::PrincipalGuided;
  DiscreteRounding rounding = DiscreteRounding::Nearer;
  unsigned threads = 1;
};

/// Everything needed to generate rows: the table codec, the empirical copula,
/// the latent training rows (or a coreset standing in for them), the latent
/// covariance and the radius mixture.
struct TabKdeModel {
  Encoder encoder;
  CopulaModel copula;
  Matrix latent;  // empty when a coreset replaces it
  LatentCovariance covariance;
  DcrMixture radius;
  std::optional<CoresetModel> coreset;
  FitOptions config;

  std::size_t dims() const noexcept { return encoder.schema().size(); }
  const TableSchema& schema() const noexcept { return encoder.schema(); }

  Matrix to_latent(const Table& table) const { return copula.forward(encoder.encode(table)); }

  SeedPicker seeds() const {
    if (coreset) {
      const auto& w = coreset->weights;
      const bool uniform = std::all_of(w.begin(), w.end(), [&](double v) { return v == w.front(); });
      return uniform ? SeedPicker(coreset->points) : SeedPicker(coreset->points, w);
    }
    if (latent.rows() == 0) throw Error(ErrorKind::ModelFormat, "model has neither latent rows nor a coreset");
    return SeedPicker(latent);
  }
};

struct StageTiming {
  std::string stage;
  double seconds;
};

using StageCallback = std::function<void(const StageTiming&)>;

namespace detail {

template <class F>
auto timed(const char* stage, const StageCallback& report, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  auto result = [&] {
    try {
      return f();
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(stage) + ": " + e.what());
    }
  }();
  if (report) {
    report({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  }
  return result;
}

}  // namespace detail

inline TabKdeModel fit_model(const Table& train, const FitOptions& options = {}, const StageCallback& report = {}) {
  if (train.rows() == 0) throw Error(ErrorKind::NoRows, "training table is empty");
  TabKdeModel model;
  model.config = options;
  model.encoder = detail::timed("encode", report, [&] { return Encoder::fit(train, options.categorical); });
  const Matrix encoded = model.encoder.encode(train);
  model.copula = detail::timed("copula", report, [&] { return CopulaModel::fit(encoded); });
  model.latent = model.copula.forward(encoded);
  model.covariance = detail::timed("covariance", report, [&] { return covariance(model.latent); });
  const std::vector<double> distances = detail::timed("dcr", report, [&] {
    return empirical_dcr(model.latent, options.dcr_repetitions, options.seed, options.threads);
  });
  model.radius = detail::timed("gmm", report, [&] {
    return fit_gmm(distances, options.max_components, options.seed, options.threads).mixture;
  });
  return model;
}

struct GenerateOptions {
  std::uint64_t seed = 0;
  BoundaryPolicy policy = BoundaryPolicy::Iterative;
  unsigned threads = 1;
  std::optional<std::size_t> max_attempts;  // defaults to 10 * d
};

inline GenerateOptions generate_options(const TabKdeModel& model) {
  return {model.config.seed, model.config.policy, model.config.threads, std::nullopt};
}

struct LatentBatch {
  Matrix points;
  SampleStats stats;
};

inline constexpr std::uint64_t kGenerateStream = 1;

/// Draws m accepted latent points. Row i uses its own random stream derived
/// from (seed, i), so the result does not depend on the thread count.
inline LatentBatch generate_latent(const TabKdeModel& model, std::size_t m, const GenerateOptions& options) {
  const std::size_t d = model.dims();
  const SeedPicker seeds = model.seeds();
  const std::size_t attempts = options.max_attempts.value_or(default_max_attempts(d));
  LatentBatch out;
  out.points.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  out.stats.iterations.assign(m, 0);
  std::vector<std::size_t> failures(m, 0);
  parallel_for(m, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(options.seed, kGenerateStream, i);
    LatentDraw draw = draw_latent(seeds, options.policy, model.radius, model.covariance, rng, attempts);
    out.points.row(static_cast<Eigen::Index>(i)) = draw.point.transpose();
    out.stats.iterations[i] = draw.iterations;
    failures[i] = draw.failures;
  });
  for (auto f : failures) out.stats.failures += f;
  return out;
}

struct Generated {
  Table table;
  SampleStats stats;
};

/// Generates m synthetic rows: latent draw, inverse copula, decode.
inline Generated generate(const TabKdeModel& model, std::size_t m, const GenerateOptions& options) {
  const std::size_t d = model.dims();
  const SeedPicker seeds = model.seeds();
  const std::size_t attempts = options.max_attempts.value_or(default_max_attempts(d));
  const auto& schema = model.schema();

  std::vector<std::vector<double>> rows(m);
  std::vector<std::size_t> iterations(m, 0);
  std::vector<std::size_t> failures(m, 0);
  parallel_for(m, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(options.seed, kGenerateStream, i);
    LatentDraw draw = draw_latent(seeds, options.policy, model.radius, model.covariance, rng, attempts);
    const Vector encoded =
        model.copula.inverse_row({draw.point.data(), d}, schema, rng, model.config.rounding);
    rows[i] = model.encoder.decode({encoded.data(), d}, rng);
    iterations[i] = draw.iterations;
    failures[i] = draw.failures;
  });

  Generated out{Table(schema), {}};
  out.table.reserve(m);
  for (const auto& r : rows) out.table.append_row(r);
  out.stats.iterations = std::move(iterations);
  for (auto f : failures) out.stats.failures += f;
  return out;
}

inline Generated generate(const TabKdeModel& model, std::size_t m) { return generate(model, m, generate_options(model)); }

}  // namespace tabkde
