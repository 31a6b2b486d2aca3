#include "oracles.hpp"
#include "tabkde/fixtures.hpp"
#include "tabkde/table.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace tabkde;

namespace {

TableSchema ab_schema() { return TableSchema({Column("a", Kind::Numerical), Column("b", Kind::Categorical, {"X", "Y"})}); }

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(LoadTable, ParsesSmallCsv) {
  Table t = parse_table("a,b\n1.5,X\n2.0,Y", ab_schema());
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.value(0, 0), 1.5);
  EXPECT_EQ(t.label(1, 1), "Y");
}

TEST(LoadTable, UnknownCategoryCarriesCell) {
  try {
    parse_table("a,b\n1.5,X\n2.0,Z\n", ab_schema());
    FAIL();
  } catch (const CellError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownCategory);
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 1u);
  }
}

TEST(LoadTable, ParseAndMissingErrors) {
  EXPECT_EQ(kind_of([] { parse_table("a,b\nabc,X\n", ab_schema()); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_table("a,b\n,X\n", ab_schema()); }), ErrorKind::MissingValue);
  EXPECT_EQ(kind_of([] { parse_table("a,b\n1,\n", ab_schema()); }), ErrorKind::MissingValue);
  EXPECT_EQ(kind_of([] { parse_table("b,a\n1,X\n", ab_schema()); }), ErrorKind::SchemaMismatch);
}

TEST(LoadTable, HeaderOnlyGivesEmptyTable) {
  Table t = parse_table("a,b\n", ab_schema());
  EXPECT_EQ(t.rows(), 0u);
}

TEST(LoadTable, QuotedFieldsAndMissingFile) {
  TableSchema s({Column("name", Kind::Categorical, {"x,y", "q\"z"}), Column("v", Kind::Numerical)});
  Table t = parse_table("name,v\n\"x,y\",1\n\"q\"\"z\",2\n", s);
  EXPECT_EQ(t.label(0, 0), "x,y");
  EXPECT_EQ(t.label(1, 0), "q\"z");
  EXPECT_EQ(kind_of([] { load_table("/nonexistent/file.csv", TableSchema({Column("a", Kind::Numerical)})); }),
            ErrorKind::Io);
}

TEST(LoadTable, WriteThenLoadRoundTrips) {
  const Table t = fixtures::desk_table(300, 5);
  std::ostringstream out;
  write_table(out, t);
  const Table back = parse_table(out.str(), t.schema());
  ASSERT_EQ(back.rows(), t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const double a = t.value(i, j), b = back.value(i, j);
      EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(LoadTable, ArbitraryDoublesSurviveTextRoundTrip) {
  TableSchema s({Column("v", Kind::Numerical)});
  Table t(s);
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double v = std::ldexp(standard_normal(rng), static_cast<int>(uniform01(rng) * 80) - 40);
    t.append_row(std::vector<double>{v});
  }
  std::ostringstream out;
  write_table(out, t);
  const Table back = parse_table(out.str(), s);
  for (std::size_t i = 0; i < t.rows(); ++i) EXPECT_EQ(back.value(i, 0), t.value(i, 0));
}

TEST(InferSchema, NumericalCategoricalOrdinal) {
  const std::string text = "n,c,o\n1,A,lo\n2.5,B,hi\n-3,A,lo\n";
  TableSchema s = infer_schema_from_text(text);
  EXPECT_EQ(s.column(0).kind(), Kind::Numerical);
  EXPECT_EQ(s.column(1).kind(), Kind::Categorical);
  EXPECT_EQ(s.column(1).levels(), (std::vector<std::string>{"A", "B"}));

  TableSchema h = infer_schema_from_text(text, {{"o", {"lo", "hi"}}, {"c", {"B", "A"}}});
  EXPECT_EQ(h.column(2).kind(), Kind::Ordinal);
  EXPECT_EQ(h.column(2).levels(), (std::vector<std::string>{"lo", "hi"}));
  EXPECT_EQ(h.column(1).kind(), Kind::Ordinal);
  EXPECT_EQ(h.column(1).levels(), (std::vector<std::string>{"B", "A"}));
}

TEST(InferSchema, Errors) {
  EXPECT_EQ(kind_of([] { infer_schema_from_text(""); }), ErrorKind::EmptyFile);
  EXPECT_EQ(kind_of([] { infer_schema("/nonexistent/x.csv"); }), ErrorKind::Io);
  EXPECT_EQ(kind_of([] { infer_schema_from_text("o\nlo\nmid\n", {{"o", {"lo"}}}); }), ErrorKind::Config);
}

TEST(Schema, RejectsDuplicates) {
  EXPECT_EQ(kind_of([] { Column("c", Kind::Categorical, {"A", "A"}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { TableSchema({Column("a", Kind::Numerical), Column("a", Kind::Numerical)}); }),
            ErrorKind::Config);
}

TEST(SchemaFile, RoundTripAndLineNumbers) {
  const TableSchema s = fixtures::desk_schema();
  std::ostringstream out;
  write_schema(out, s);
  EXPECT_EQ(parse_schema(out.str()), s);

  try {
    parse_schema("# comment\nx,numerical\ny,bogus\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([] { parse_schema("c,categorical\n"); }), ErrorKind::Config);
}

TEST(Split, EvenSizesAndDeterminism) {
  const Table t = fixtures::desk_table(100, 1);
  const auto a = split(t, 0.5, 42);
  const auto b = split(t, 0.5, 42);
  EXPECT_EQ(a.train_rows, b.train_rows);
  EXPECT_EQ(a.holdout_rows, b.holdout_rows);
  EXPECT_EQ(a.train.rows() + a.holdout.rows(), 100u);
  // the desk table covers every label many times over, so no repair happens
  EXPECT_EQ(a.train.rows(), 50u);
  std::set<std::size_t> all(a.train_rows.begin(), a.train_rows.end());
  for (auto i : a.holdout_rows) EXPECT_TRUE(all.insert(i).second) << "row " << i << " on both sides";
  EXPECT_EQ(all.size(), 100u);
  const auto c = split(t, 0.5, 43);
  EXPECT_NE(a.train_rows, c.train_rows);
}

TEST(Split, SingletonCategoryLandsInTrain) {
  TableSchema s({Column("v", Kind::Numerical), Column("c", Kind::Categorical, {"common", "rare"})});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Table t(s);
    for (int i = 0; i < 40; ++i) t.append_row(std::vector<double>{double(i), i == 17 ? 1.0 : 0.0});
    const auto parts = split(t, 0.5, seed);
    EXPECT_NE(std::find(parts.train_rows.begin(), parts.train_rows.end(), 17u), parts.train_rows.end());
    for (std::size_t i = 0; i < parts.holdout.rows(); ++i) EXPECT_EQ(parts.holdout.level(i, 1), 0u);
  }
}

TEST(Split, TooFewRows) {
  Table t(ab_schema());
  t.append_row(std::vector<double>{1.0, 0.0});
  EXPECT_EQ(kind_of([&] { split(t, 0.5, 0); }), ErrorKind::TooFewRows);
}

TEST(Split, PartitionProperty) {
  for (std::size_t n : {2u, 3u, 17u, 250u}) {
    const Table t = fixtures::desk_table(n, n);
    for (double f : {0.1, 0.5, 0.9}) {
      const auto p = split(t, f, n * 7);
      std::vector<std::size_t> all = p.train_rows;
      all.insert(all.end(), p.holdout_rows.begin(), p.holdout_rows.end());
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all.size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
      EXPECT_GE(p.train.rows(), 1u);
    }
  }
}
