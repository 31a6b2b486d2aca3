#pragma once

#include "tabkde/core.hpp"
#include "tabkde/table.hpp"

#include <array>
#include <cmath>

namespace tabkde::fixtures {

/// Ground-truth mixed-type table with known structure: three numerical
/// columns drawn from a correlated two-component Gaussian mixture, two
/// categorical columns whose label frequencies depend on the numerical
/// values, and one ordinal column thresholded from them.
inline TableSchema desk_schema() {
  return TableSchema({
      Column("x1", Kind::Numerical),
      Column("x2", Kind::Numerical),
      Column("x3", Kind::Numerical),
      Column("color", Kind::Categorical, {"red", "green", "blue", "yellow"}),
      Column("region", Kind::Categorical, {"north", "south", "east", "west", "central"}),
      Column("grade", Kind::Ordinal, {"low", "mid", "high"}),
  });
}

inline Table desk_table(std::size_t rows, std::uint64_t seed) {
  Table table(desk_schema());
  table.reserve(rows);
  Rng rng(seed);
  auto categorical = [&](const double* logits, std::size_t k) {
    double top = logits[0];
    for (std::size_t c = 1; c < k; ++c) top = std::max(top, logits[c]);
    double total = 0.0;
    std::array<double, 8> p{};
    for (std::size_t c = 0; c < k; ++c) total += (p[c] = std::exp(logits[c] - top));
    double u = uniform01(rng) * total;
    for (std::size_t c = 0; c < k; ++c) {
      if ((u -= p[c]) < 0.0) return static_cast<double>(c);
    }
    return static_cast<double>(k - 1);
  };
  auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };

  for (std::size_t i = 0; i < rows; ++i) {
    const bool second = uniform01(rng) < 0.4;
    const double g1 = standard_normal(rng), g2 = standard_normal(rng), g3 = standard_normal(rng);
    // correlated normal: L * g, component-specific mean
    const double a = g1;
    const double b = 0.6 * g1 + 0.8 * g2;
    const double c = -0.3 * g1 + 0.2 * g2 + 0.93 * g3;
    const double x1 = round3((second ? 3.0 : 0.0) + a);
    const double x2 = round3((second ? 2.0 : 0.0) + 1.5 * b);
    const double x3 = round3(std::exp(0.5 * ((second ? -1.0 : 0.0) + c)) * 10.0);

    const double color_logits[4] = {0.8 * x1, 0.3, -0.6 * x1, 0.4 * x2};
    const double region_logits[5] = {second ? 1.0 : 0.0, 0.5 * x2, 0.2, second ? -0.5 : 0.5, -0.3 * x2};
    const double latent = 0.5 * x1 + 0.3 * x2 + 0.5 * standard_normal(rng);
    const double grade = latent < 0.3 ? 0.0 : (latent < 1.5 ? 1.0 : 2.0);

    const std::array<double, 6> row{x1, x2, x3, categorical(color_logits, 4), categorical(region_logits, 5), grade};
    table.append_row(row);
  }
  return table;
}

}  // namespace tabkde::fixtures
