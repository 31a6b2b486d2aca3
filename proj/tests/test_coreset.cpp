#include "oracles.hpp"
#include "tabkde/coreset.hpp"
#include "tabkde/fixtures.hpp"
#include "tabkde/model.hpp"

#include <gtest/gtest.h>

using namespace tabkde;

namespace {

Matrix bimodal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix z(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const bool second = uniform01(rng) < 0.5;
    for (int k = 0; k < 2; ++k) z(i, k) = std::clamp((second ? 0.7 : 0.3) + 0.08 * standard_normal(rng), 0.0, 1.0);
  }
  return z;
}

struct GridError {
  double sup = 0.0;
  double l2 = 0.0;
};

GridError grid_error(const Matrix& z, const CoresetModel& c, double h, int g = 40) {
  GridError e;
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      const double p[2] = {(a + 0.5) / g, (b + 0.5) / g};
      const double diff = kde_density(c.points, c.weights, h, p) - full_kde_density(z, h, p);
      e.sup = std::max(e.sup, std::abs(diff));
      e.l2 += diff * diff;
    }
  }
  e.l2 = std::sqrt(e.l2 / (g * g));
  return e;
}

oracle::Rows rows_of(const Matrix& m) {
  oracle::Rows r;
  for (Eigen::Index i = 0; i < m.rows(); ++i) r.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
  return r;
}

}  // namespace

TEST(KdeDensity, SinglePointCases) {
  Matrix q(1, 3);
  q << 0.2, 0.4, 0.6;
  const std::vector<double> w{1.0};
  const double z[3] = {0.2, 0.4, 0.6};
  EXPECT_EQ(kde_density(q, w, 0.3, z), 1.0);
  const double at_h[3] = {0.2 + 0.3, 0.4, 0.6};
  EXPECT_NEAR(kde_density(q, w, 0.3, at_h), std::exp(-1.0), 1e-15);
}

TEST(KdeDensity, MatchesNaiveSum) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix q(3, 4);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (int k = 0; k < 4; ++k) q(i, k) = uniform01(rng);
    std::vector<double> w{0.2, 0.5, 0.3};
    std::vector<double> z(4);
    for (auto& v : z) v = uniform01(rng);
    const double h = 0.1 + uniform01(rng);
    EXPECT_NEAR(kde_density(q, w, h, z.data()), oracle::naive_kde(rows_of(q), w, h, z), 1e-12);
  }
}

TEST(KdeDensity, PermutationSymmetric) {
  Rng rng(2);
  Matrix q(5, 2), p(5, 2);
  std::vector<double> w{0.1, 0.3, 0.2, 0.15, 0.25}, pw(5);
  for (Eigen::Index i = 0; i < 5; ++i) q(i, 0) = uniform01(rng), q(i, 1) = uniform01(rng);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) p.row(i) = q.row(perm[i]), pw[i] = w[perm[i]];
  const double z[2] = {0.4, 0.7};
  EXPECT_NEAR(kde_density(q, w, 0.2, z), kde_density(p, pw, 0.2, z), 1e-15);
}

TEST(RandomCoreset, FullSizeIsPermutation) {
  const Matrix z = bimodal(64, 3);
  const auto c = random_coreset(z, 64, 7);
  c.validate();
  std::vector<std::pair<double, double>> a, b;
  for (Eigen::Index i = 0; i < 64; ++i) a.emplace_back(z(i, 0), z(i, 1)), b.emplace_back(c.points(i, 0), c.points(i, 1));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  for (double w : c.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 64);
}

TEST(RandomCoreset, SingleRowAndErrors) {
  const Matrix z = bimodal(10, 4);
  const auto c = random_coreset(z, 1, 0);
  EXPECT_EQ(c.points.rows(), 1);
  EXPECT_EQ(c.weights[0], 1.0);
  try {
    random_coreset(z, 11, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CoresetTooLarge);
  }
}

TEST(RandomCoreset, SupErrorShrinksWithSize) {
  const Matrix z = bimodal(6000, 5);
  const double h = 0.1;
  double previous = INFINITY;
  for (std::size_t m : {100u, 400u, 1600u}) {
    double mean_sup = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) mean_sup += grid_error(z, random_coreset(z, m, seed, h), h).sup / 3;
    EXPECT_LE(mean_sup, 0.8 * previous) << "m = " << m;
    previous = mean_sup;
  }
}

TEST(TrainCoreset, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const Eigen::Index m = 6, d = 3, b = 40;
  CoresetParams params{Matrix(m, d), Vector(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    params.logits(i) = standard_normal(rng);
    for (Eigen::Index k = 0; k < d; ++k) params.points(i, k) = uniform01(rng);
  }
  const Matrix probes = uniform_probes(b, d, rng);
  std::vector<double> targets(b);
  for (auto& t : targets) t = uniform01(rng);
  const double h = 0.4;
  const auto g = coreset_loss_gradient(params, h, probes, targets, 2);
  EXPECT_NEAR(g.loss, coreset_loss(params, h, probes, targets), 1e-14);

  const double step = 1e-5;
  auto check = [&](double analytic, double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = coreset_loss(params, h, probes, targets);
    slot = saved - step;
    const double down = coreset_loss(params, h, probes, targets);
    slot = saved;
    const double numeric = (up - down) / (2 * step);
    EXPECT_LE(std::abs(analytic - numeric), 1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-11)
        << analytic << " vs " << numeric;
  };
  for (Eigen::Index i = 0; i < m; ++i) {
    check(g.logits(i), params.logits(i));
    for (Eigen::Index k = 0; k < d; ++k) check(g.points(i, k), params.points(i, k));
  }
}

TEST(TrainCoreset, IdentityFitHasZeroLoss) {
  const Matrix z = bimodal(80, 7);
  CoresetTrainOptions o;
  o.epochs = 3;
  o.batch = 32;
  o.learning_rate = 0.01;
  const auto t = train_coreset(z, 80, 0.2, o);
  for (double l : t.step_loss) EXPECT_LT(l, 1e-28);
  const auto start = random_coreset(z, 80, o.seed, 0.2);
  EXPECT_LE((t.model.points - start.points).cwiseAbs().maxCoeff(), o.learning_rate * 1e-9);
  for (double w : t.model.weights) EXPECT_NEAR(w, 1.0 / 80, o.learning_rate * 1e-9);
}

TEST(TrainCoreset, InvariantsAndDeterminism) {
  const Matrix z = bimodal(300, 8);
  CoresetTrainOptions o;
  o.epochs = 5;
  o.learning_rate = 5.0;  // large steps push points against the box
  o.seed = 3;
  std::vector<double> logged;
  const auto a = train_coreset(z, 30, 0.15, o, [&](std::size_t, double l) { logged.push_back(l); });
  a.model.validate();
  EXPECT_GE(a.model.points.minCoeff(), 0.0);
  EXPECT_LE(a.model.points.maxCoeff(), 1.0);
  EXPECT_EQ(logged, a.epoch_loss);
  EXPECT_EQ(a.step_loss.size(), 5u * 2u);
  EXPECT_TRUE(a.loss_decreased());
  o.threads = 3;
  const auto b = train_coreset(z, 30, 0.15, o);
  EXPECT_EQ(a.model.points, b.model.points);
  EXPECT_EQ(a.model.weights, b.model.weights);
}

TEST(TrainCoreset, BeatsRandomCoresetOnBimodalData) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix z = bimodal(1000, 100 + seed);
    CoresetTrainOptions o;
    o.seed = seed;
    const auto random = random_coreset(z, 50, seed, 0.1);
    const auto trained = train_coreset(z, 50, 0.1, o);
    wins += grid_error(z, trained.model, 0.1).l2 <= grid_error(z, random, 0.1).l2;
  }
  EXPECT_GE(wins, 8);
}

TEST(SelectBandwidth, SingleCandidate) {
  const Matrix z = bimodal(100, 9);
  EXPECT_EQ(select_bandwidth(z, 10, {0.35}, {}).bandwidth, 0.35);
}

TEST(SelectBandwidth, ZeroInitialLossIsSkipped) {
  // With m = n the coreset starts as an exact copy, so every candidate
  // starts at zero loss and none can be scored; the smallest is returned.
  const Matrix z = bimodal(40, 10);
  CoresetTrainOptions o;
  o.epochs = 2;
  const auto sel = select_bandwidth(z, 40, {0.5, 0.2, 0.3}, o, 64);
  for (const auto& s : sel.scores) EXPECT_FALSE(s.relative_decrease.has_value());
  EXPECT_EQ(sel.bandwidth, 0.2);
}

TEST(SelectBandwidth, PicksSmallestWithinFivePercentOfBest) {
  const Matrix z = bimodal(400, 11);
  CoresetTrainOptions o;
  o.epochs = 4;
  o.learning_rate = 2.0;
  const auto sel = select_bandwidth(z, 20, {0.1, 0.2, 0.3, 0.4}, o, 256);
  ASSERT_EQ(sel.scores.size(), 4u);
  double best = -INFINITY;
  for (const auto& s : sel.scores) best = std::max(best, s.relative_decrease.value_or(-INFINITY));
  double expect = 0.0;
  for (const auto& s : sel.scores) {
    if (s.relative_decrease && *s.relative_decrease >= best - 0.05 * std::abs(best)) {
      expect = s.bandwidth;
      break;
    }
  }
  EXPECT_EQ(sel.bandwidth, expect);
}

TEST(CoresetGenerate, UniformFullCoresetReproducesPlainGeneration) {
  const Table t = fixtures::desk_table(300, 12);
  TabKdeModel model = fit_model(t);
  TabKdeModel with = model;
  with.coreset = CoresetModel{model.latent, std::vector<double>(300, 1.0 / 300), 0.2};
  with.latent.resize(0, 6);
  const auto a = generate(model, 200);
  const auto b = generate(with, 200);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(a.table.row(i), b.table.row(i));
}

TEST(CoresetGenerate, ConcentratedWeightPinsTheSeed) {
  const Table t = fixtures::desk_table(200, 13);
  TabKdeModel model = fit_model(t);
  model.radius = DcrMixture{{{1.0, 1e-9, 1e-30}}};
  Matrix q = model.latent.topRows(3);
  model.coreset = CoresetModel{q, {0.0, 1.0, 0.0}, 0.2};
  model.latent.resize(0, 6);
  const auto batch = generate_latent(model, 100, generate_options(model));
  for (Eigen::Index i = 0; i < 100; ++i) EXPECT_LT((batch.points.row(i) - q.row(1)).norm(), 1e-6);
}
