#include "oracles.hpp"
#include "tabkde/encoding.hpp"
#include "tabkde/fixtures.hpp"

#include <gtest/gtest.h>

using namespace tabkde;

namespace {

Matrix to_matrix(const oracle::Rows& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[0].size(); ++k) m(i, k) = rows[i][k];
  return m;
}

Table num_cat_table(const std::vector<double>& x, const std::vector<std::size_t>& cat) {
  Table t(TableSchema({Column("x", Kind::Numerical), Column("c", Kind::Categorical, {"A", "B", "C"})}));
  for (std::size_t i = 0; i < x.size(); ++i) t.append_row(std::vector<double>{x[i], double(cat[i])});
  return t;
}

}  // namespace

TEST(PrincipalDirection, SingleColumn) {
  Matrix x(4, 1);
  x << -1, 0.5, 2, -1.5;
  Vector v = top_principal_direction(x);
  ASSERT_EQ(v.size(), 1);
  EXPECT_DOUBLE_EQ(v(0), 1.0);
}

TEST(PrincipalDirection, DiagonalLine) {
  Matrix x(5, 2);
  for (int i = 0; i < 5; ++i) x(i, 0) = x(i, 1) = i - 2.0;
  Vector v = top_principal_direction(x);
  EXPECT_NEAR(v(0), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(v(1), 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(PrincipalDirection, MatchesJacobiOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    oracle::Rows rows(5, std::vector<double>(3));
    for (auto& r : rows)
      for (auto& v : r) v = standard_normal(rng);
    const Vector v = top_principal_direction(to_matrix(rows));
    const auto ref = oracle::leading_eigenvector(oracle::sample_covariance(rows));
    const double sign = (v(0) * ref[0] + v(1) * ref[1] + v(2) * ref[2]) < 0 ? -1.0 : 1.0;
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(v(k), sign * ref[k], 1e-8) << "seed " << seed;
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(v(arg), 0.0);
  }
}

TEST(PrincipalDirection, Errors) {
  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  try {
    top_principal_direction(same);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMatrix);
  }
  Matrix one(1, 2);
  one << 1, 2;
  EXPECT_THROW(top_principal_direction(one), Error);
}

TEST(Encoder, PgeCodesMatchHandZScores) {
  // population z-scores of [1, 3, 10]: mean 14/3, sd sqrt(98/9)
  const double mean = 14.0 / 3.0, sd = std::sqrt(((1 - mean) * (1 - mean) + (3 - mean) * (3 - mean) +
                                                   (10 - mean) * (10 - mean)) / 3.0);
  const double z1 = (1 - mean) / sd, z2 = (3 - mean) / sd, z3 = (10 - mean) / sd;
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10}, {0, 0, 1}));
  EXPECT_NEAR(enc.column(0).mean, mean, 1e-12);
  EXPECT_NEAR(enc.column(0).stddev, sd, 1e-12);
  EXPECT_NEAR(enc.column(1).codes[0], (z1 + z2) / 2.0, 1e-12);
  EXPECT_NEAR(enc.column(1).codes[1], z3, 1e-12);
  EXPECT_TRUE(std::isnan(enc.column(1).codes[2]));
  EXPECT_NEAR(enc.column(1).codes[0], -0.6911, 1e-4);
  EXPECT_NEAR(enc.column(1).codes[1], 1.3822, 1e-4);
}

TEST(Encoder, SingleCategoryHasZeroCode) {
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10, -2, 7}, {2, 2, 2, 2, 2}));
  EXPECT_NEAR(enc.column(1).codes[2], 0.0, 1e-9);
}

TEST(Encoder, FrequencyFallbackWithoutNumericals) {
  Table t(TableSchema({Column("c", Kind::Categorical, {"A", "B", "C"}), Column("o", Kind::Ordinal, {"l", "h"})}));
  const std::vector<std::size_t> labels{0, 1, 1, 2, 1, 0, 1, 1};
  for (auto l : labels) t.append_row(std::vector<double>{double(l), 0.0});
  const Encoder enc = Encoder::fit(t);
  EXPECT_EQ(enc.categorical_encoding(), CategoricalEncoding::Frequency);
  for (std::size_t c = 0; c < 3; ++c) {
    const double freq = double(std::count(labels.begin(), labels.end(), c)) / double(labels.size());
    EXPECT_DOUBLE_EQ(enc.column(0).codes[c], freq);
  }
}

TEST(Encoder, UniformAlternative) {
  const Encoder enc = Encoder::fit(num_cat_table({1, 2, 3, 4}, {0, 0, 0, 2}), CategoricalEncoding::Uniform);
  EXPECT_DOUBLE_EQ(enc.column(1).codes[0], 0.375);
  EXPECT_DOUBLE_EQ(enc.column(1).codes[2], 0.875);
}

TEST(Encoder, EncodeCells) {
  const Table t = fixtures::desk_table(400, 3);
  const Encoder enc = Encoder::fit(t);
  EXPECT_DOUBLE_EQ(enc.encode_cell(0, enc.column(0).mean), 0.0);
  EXPECT_DOUBLE_EQ(enc.encode_cell(5, 1.0), 2.0);  // second ordinal level
  EXPECT_DOUBLE_EQ(enc.encode_cell(3, 2.0), enc.column(3).codes[2]);
  for (const auto& codec : enc.columns()) {
    if (codec.kind == Kind::Numerical) {
      EXPECT_GT(codec.stddev, 0.0);
    }
  }
  EXPECT_NEAR(enc.principal_direction().norm(), 1.0, 1e-12);
}

TEST(Encoder, ZeroVarianceColumnKeepsUnitStddev) {
  Table t(TableSchema({Column("k", Kind::Numerical), Column("x", Kind::Numerical)}));
  for (int i = 0; i < 5; ++i) t.append_row(std::vector<double>{4.0, double(i)});
  const Encoder enc = Encoder::fit(t);
  EXPECT_EQ(enc.column(0).stddev, 1.0);
  EXPECT_EQ(enc.encode_cell(0, 4.0), 0.0);
}

TEST(Encoder, Errors) {
  Table empty(TableSchema({Column("x", Kind::Numerical)}));
  try {
    Encoder::fit(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoRows);
  }
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10}, {0, 0, 1}));
  try {
    enc.encode(num_cat_table({1}, {2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownCategory);
  }
}

TEST(Decode, ExactCodeIsDeterministic) {
  const Encoder enc = Encoder::fit(fixtures::desk_table(400, 3));
  Rng rng(1);
  for (std::size_t l = 0; l < 4; ++l) {
    for (int k = 0; k < 50; ++k) EXPECT_EQ(enc.decode_cell(3, enc.column(3).codes[l], rng), double(l));
  }
}

TEST(Decode, MidpointSplitsEvenly) {
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10}, {0, 0, 1}));
  const double mid = 0.5 * (enc.column(1).codes[0] + enc.column(1).codes[1]);
  Rng rng(2);
  int a = 0;
  for (int k = 0; k < 10000; ++k) a += enc.decode_cell(1, mid, rng) == 0.0;
  EXPECT_NEAR(a / 10000.0, 0.5, 0.05);
}

TEST(Decode, NearerCodeIsLikelier) {
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10}, {0, 0, 1}));
  const double lo = enc.column(1).codes[0], hi = enc.column(1).codes[1];
  const double p = lo + 0.2 * (hi - lo);
  Rng rng(3);
  int a = 0;
  for (int k = 0; k < 20000; ++k) a += enc.decode_cell(1, p, rng) == 0.0;
  EXPECT_NEAR(a / 20000.0, 0.8, 0.015);
}

TEST(Decode, ClampsOutOfRange) {
  const Encoder enc = Encoder::fit(num_cat_table({1, 3, 10}, {0, 0, 1}));
  Rng rng(4);
  EXPECT_EQ(enc.decode_cell(1, -100.0, rng), 0.0);
  EXPECT_EQ(enc.decode_cell(1, 100.0, rng), 1.0);
}

TEST(Decode, TiedCodesFollowTrainingFrequency) {
  // A and B share every numeric value pattern, so their codes coincide.
  const Encoder enc = Encoder::fit(num_cat_table({0, 0, 0, 0, 0, 5}, {0, 1, 1, 1, 1, 2}));
  ASSERT_EQ(enc.column(1).codes[0], enc.column(1).codes[1]);
  Rng rng(5);
  int b = 0;
  for (int k = 0; k < 20000; ++k) b += enc.decode_cell(1, enc.column(1).codes[0], rng) == 1.0;
  EXPECT_NEAR(b / 20000.0, 0.8, 0.015);
}

TEST(Encoder, RoundTripOnTrainingRows) {
  const Table t = fixtures::desk_table(500, 9);
  const Encoder enc = Encoder::fit(t);
  const Matrix e = enc.encode(t);
  Rng rng(6);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto row = enc.decode({e.row(i).data(), t.cols()}, rng);
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (t.schema().column(j).is_numerical())
        EXPECT_LE(std::abs(row[j] - t.value(i, j)), 1e-9 * std::max(1.0, std::abs(t.value(i, j))));
      else
        EXPECT_EQ(row[j], t.value(i, j));
    }
  }
}

TEST(Encoder, AffineRescalingInvariance) {
  const Table t = fixtures::desk_table(300, 10);
  Table scaled(t.schema());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto r = t.row(i);
    r[0] = -7.5 * r[0] + 1e3;
    r[1] = 0.001 * r[1] - 4.0;
    scaled.append_row(r);
  }
  const Encoder a = Encoder::fit(t), b = Encoder::fit(scaled);
  const Matrix ea = a.encode(t), eb = b.encode(scaled);
  // column 0 flips sign under the negative scale; its magnitude is unchanged
  for (std::size_t i = 0; i < t.rows(); ++i) {
    EXPECT_NEAR(ea(i, 0), -eb(i, 0), 1e-9);
    EXPECT_NEAR(ea(i, 1), eb(i, 1), 1e-9);
    EXPECT_NEAR(ea(i, 2), eb(i, 2), 1e-9);
  }
  const Table pos = [&] {
    Table p(t.schema());
    for (std::size_t i = 0; i < t.rows(); ++i) {
      auto r = t.row(i);
      r[0] = 3.0 * r[0] + 2.0;
      r[2] = 0.5 * r[2] - 1.0;
      p.append_row(r);
    }
    return p;
  }();
  const Encoder c = Encoder::fit(pos);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.principal_direction()(k), c.principal_direction()(k), 1e-9);
}
