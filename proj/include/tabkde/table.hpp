#pragma once

#include "tabkde/core.hpp"
#include "tabkde/csv.hpp"
#include "tabkde/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tabkde {

enum class Kind { Numerical, Ordinal, Categorical };

constexpr std::string_view to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::Numerical: return "numerical";
    case Kind::Ordinal: return "ordinal";
    case Kind::Categorical: return "categorical";
  }
  return "?";
}

inline std::optional<Kind> parse_kind(std::string_view text) {
  if (text == "numerical" || text == "num") return Kind::Numerical;
  if (text == "ordinal" || text == "ord") return Kind::Ordinal;
  if (text == "categorical" || text == "cat") return Kind::Categorical;
  return std::nullopt;
}

/// One column of a schema. For Ordinal columns `levels` is the rank order
/// (lowest first); for Categorical columns it is the vocabulary, whose order
/// carries no meaning.
class Column {
 public:
  Column(std::string name, Kind kind, std::vector<std::string> levels = {})
      : name_(std::move(name)), kind_(kind), levels_(std::move(levels)) {
    if (kind_ == Kind::Numerical && !levels_.empty()) {
      throw Error(ErrorKind::Config, "numerical column '" + name_ + "' cannot have levels");
    }
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (!index_.emplace(levels_[i], i).second) {
        throw Error(ErrorKind::Config,
                    "duplicate label '" + levels_[i] + "' in column '" + name_ + "'");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  Kind kind() const noexcept { return kind_; }
  bool is_numerical() const noexcept { return kind_ == Kind::Numerical; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }

  std::optional<std::size_t> find_level(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Column& a, const Column& b) {
    return a.name_ == b.name_ && a.kind_ == b.kind_ && a.levels_ == b.levels_;
  }

 private:
  std::string name_;
  Kind kind_;
  std::vector<std::string> levels_;
  std::unordered_map<std::string, std::size_t> index_;
};

class TableSchema {
 public:
  TableSchema() = default;
  explicit TableSchema(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> names;
    for (const auto& c : columns_) {
      if (!names.insert(c.name()).second) {
        throw Error(ErrorKind::Config, "duplicate column name '" + c.name() + "'");
      }
    }
  }

  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  std::size_t size() const noexcept { return columns_.size(); }

  std::size_t numerical_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(columns_.begin(), columns_.end(), [](const Column& c) { return c.is_numerical(); }));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) out.push_back(c.name());
    return out;
  }

  friend bool operator==(const TableSchema& a, const TableSchema& b) { return a.columns_ == b.columns_; }

 private:
  std::vector<Column> columns_;
};

/// Column-major table. Each cell is stored as a double: the value itself for
/// Numerical columns, the level index (into Column::levels) otherwise.
class Table {
 public:
  Table() = default;
  explicit Table(TableSchema schema) : schema_(std::move(schema)), data_(schema_.size()) {}

  const TableSchema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return data_.empty() ? 0 : data_.front().size(); }
  std::size_t cols() const noexcept { return schema_.size(); }
  bool empty() const noexcept { return rows() == 0; }

  double value(std::size_t i, std::size_t j) const { return data_[j][i]; }
  std::size_t level(std::size_t i, std::size_t j) const { return static_cast<std::size_t>(data_[j][i]); }
  const std::string& label(std::size_t i, std::size_t j) const {
    return schema_.column(j).levels()[level(i, j)];
  }
  std::span<const double> column(std::size_t j) const { return data_[j]; }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> out(cols());
    for (std::size_t j = 0; j < cols(); ++j) out[j] = data_[j][i];
    return out;
  }

  /// Appends one record in cell-storage form (value or level index per column).
  void append_row(std::span<const double> cells) {
    if (cells.size() != cols()) {
      throw Error(ErrorKind::SchemaMismatch, "row has " + std::to_string(cells.size()) +
                                                 " cells, schema has " + std::to_string(cols()));
    }
    for (std::size_t j = 0; j < cols(); ++j) {
      const Column& c = schema_.column(j);
      const double v = cells[j];
      if (c.is_numerical()) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Parse, "non-finite value in '" + c.name() + "'");
      } else if (v < 0 || v != std::floor(v) || v >= static_cast<double>(c.levels().size())) {
        throw Error(ErrorKind::UnknownCategory, "level index out of range in '" + c.name() + "'");
      }
    }
    for (std::size_t j = 0; j < cols(); ++j) data_[j].push_back(cells[j]);
  }

  void reserve(std::size_t n) {
    for (auto& col : data_) col.reserve(n);
  }

  Table select(std::span<const std::size_t> indices) const {
    Table out(schema_);
    out.reserve(indices.size());
    for (std::size_t j = 0; j < cols(); ++j) {
      for (std::size_t i : indices) out.data_[j].push_back(data_[j][i]);
    }
    return out;
  }

 private:
  TableSchema schema_;
  std::vector<std::vector<double>> data_;
};

namespace detail {

inline void check_header(const csv::Record& header, const TableSchema& schema) {
  if (header.fields != schema.names()) {
    std::string got;
    for (std::size_t i = 0; i < header.fields.size(); ++i) got += (i ? "," : "") + header.fields[i];
    throw Error(ErrorKind::SchemaMismatch, "CSV header '" + got + "' does not match schema columns");
  }
}

}  // namespace detail

/// Parses CSV text whose header matches `schema` exactly (names, order).
inline Table parse_table(std::string_view text, const TableSchema& schema) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorKind::EmptyFile, "CSV has no header row");
  detail::check_header(records.front(), schema);

  Table table(schema);
  table.reserve(records.size() - 1);
  std::vector<double> cells(schema.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& fields = records[r].fields;
    if (fields.size() != schema.size()) {
      throw CellError(ErrorKind::Parse, r, std::min(fields.size(), schema.size()),
                      "expected " + std::to_string(schema.size()) + " fields, got " +
                          std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const Column& c = schema.column(j);
      const std::string& f = fields[j];
      if (f.empty()) throw CellError(ErrorKind::MissingValue, r, j, "missing value in '" + c.name() + "'");
      if (c.is_numerical()) {
        auto v = csv::parse_number(f);
        if (!v || !std::isfinite(*v)) {
          throw CellError(ErrorKind::Parse, r, j, "cannot parse '" + f + "' as a number");
        }
        cells[j] = *v;
      } else {
        auto level = c.find_level(f);
        if (!level) {
          throw CellError(ErrorKind::UnknownCategory, r, j,
                          "label '" + f + "' not in vocabulary of '" + c.name() + "'");
        }
        cells[j] = static_cast<double>(*level);
      }
    }
    table.append_row(cells);
  }
  return table;
}

inline Table load_table(const std::string& path, const TableSchema& schema) {
  return parse_table(csv::read_file(path), schema);
}

inline void write_table(std::ostream& out, const Table& table) {
  csv::write_record(out, table.schema().names());
  std::vector<std::string> fields(table.cols());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.cols(); ++j) {
      fields[j] = table.schema().column(j).is_numerical() ? csv::format_number(table.value(i, j))
                                                          : table.label(i, j);
    }
    csv::write_record(out, fields);
  }
}

inline void save_table(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  write_table(out, table);
}

/// Infers a schema from CSV text. A column is Numerical iff every non-empty
/// cell parses as a number; otherwise it is Ordinal (levels in hinted order)
/// when hinted, else Categorical with its sorted distinct labels.
inline TableSchema infer_schema_from_text(std::string_view text,
                                          const std::map<std::string, std::vector<std::string>>& ordinal_hints = {}) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorKind::EmptyFile, "CSV is empty");
  const auto& header = records.front().fields;

  std::vector<Column> columns;
  for (std::size_t j = 0; j < header.size(); ++j) {
    bool numeric = true;
    std::vector<std::string> labels;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (j >= records[r].fields.size()) continue;
      const std::string& f = records[r].fields[j];
      if (f.empty()) continue;
      labels.push_back(f);
      if (numeric && !csv::parse_number(f)) numeric = false;
    }
    if (numeric) {
      columns.emplace_back(header[j], Kind::Numerical);
      continue;
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (auto hint = ordinal_hints.find(header[j]); hint != ordinal_hints.end()) {
      for (const auto& l : labels) {
        if (std::find(hint->second.begin(), hint->second.end(), l) == hint->second.end()) {
          throw Error(ErrorKind::Config,
                      "label '" + l + "' of ordinal column '" + header[j] + "' missing from level hint");
        }
      }
      columns.emplace_back(header[j], Kind::Ordinal, hint->second);
    } else {
      columns.emplace_back(header[j], Kind::Categorical, std::move(labels));
    }
  }
  return TableSchema(std::move(columns));
}

inline TableSchema infer_schema(const std::string& path,
                                const std::map<std::string, std::vector<std::string>>& ordinal_hints = {}) {
  return infer_schema_from_text(csv::read_file(path), ordinal_hints);
}

// Schema files: one column per line as a CSV record `name,kind[,level...]`.
// Lines whose first field starts with '#' are comments.

inline TableSchema parse_schema(std::string_view text) {
  std::vector<csv::Record> records;
  try {
    records = csv::parse(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("schema: ") + e.what());
  }
  std::vector<Column> columns;
  for (const auto& rec : records) {
    const auto& f = rec.fields;
    if (!f.empty() && !f[0].empty() && f[0][0] == '#') continue;
    const std::string where = "schema line " + std::to_string(rec.line) + ": ";
    if (f.size() < 2 || f[0].empty()) throw Error(ErrorKind::Config, where + "expected 'name,kind[,levels...]'");
    auto kind = parse_kind(f[1]);
    if (!kind) throw Error(ErrorKind::Config, where + "unknown column kind '" + f[1] + "'");
    std::vector<std::string> levels(f.begin() + 2, f.end());
    if (*kind != Kind::Numerical && levels.empty()) {
      throw Error(ErrorKind::Config, where + "column '" + f[0] + "' needs at least one level");
    }
    try {
      columns.emplace_back(f[0], *kind, std::move(levels));
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, where + e.what());
    }
  }
  if (columns.empty()) throw Error(ErrorKind::Config, "schema declares no columns");
  try {
    return TableSchema(std::move(columns));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("schema: ") + e.what());
  }
}

inline TableSchema load_schema(const std::string& path) { return parse_schema(csv::read_file(path)); }

inline void write_schema(std::ostream& out, const TableSchema& schema) {
  out << "# name,kind[,levels...]\n";
  for (const auto& c : schema.columns()) {
    std::vector<std::string> fields{c.name(), std::string(to_string(c.kind()))};
    fields.insert(fields.end(), c.levels().begin(), c.levels().end());
    csv::write_record(out, fields);
  }
}

struct SplitResult {
  Table train;
  Table holdout;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;
};

/// Seeded random train/holdout partition. Holdout rows carrying a categorical
/// label absent from the train side are moved to train, so the holdout never
/// contains a category the model has not seen.
inline SplitResult split(const Table& table, double holdout_fraction, std::uint64_t seed) {
  const std::size_t n = table.rows();
  if (n < 2) throw Error(ErrorKind::TooFewRows, "split needs at least 2 rows, got " + std::to_string(n));
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "holdout fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto holdout_count = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
  holdout_count = std::clamp<std::size_t>(holdout_count, 1, n - 1);

  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout_count), order.end());
  std::vector<std::size_t> candidates(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_count));

  const auto& schema = table.schema();
  std::vector<std::vector<std::size_t>> seen(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema.column(j).kind() != Kind::Categorical) continue;
    seen[j].assign(schema.column(j).levels().size(), 0);
    for (std::size_t i : train) ++seen[j][table.level(i, j)];
  }
  std::vector<std::size_t> holdout;
  for (std::size_t i : candidates) {
    bool covered = true;
    for (std::size_t j = 0; j < schema.size() && covered; ++j) {
      if (schema.column(j).kind() == Kind::Categorical && seen[j][table.level(i, j)] == 0) covered = false;
    }
    if (covered) {
      holdout.push_back(i);
      continue;
    }
    train.push_back(i);
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (schema.column(j).kind() == Kind::Categorical) ++seen[j][table.level(i, j)];
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(holdout.begin(), holdout.end());
  SplitResult out{table.select(train), table.select(holdout), std::move(train), std::move(holdout)};
  return out;
}

}  // namespace tabkde
