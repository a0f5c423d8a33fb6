#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace gridfail {

// Rectangular table of named numeric/text columns, row-major.
class Table {
 public:
  using Cell = std::variant<double, std::string>;
  using Row = std::vector<Cell>;

  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  // Throws std::invalid_argument on ragged input.
  void add_row(Row row);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_cols() const { return columns_.size(); }
  const Row& row(std::size_t r) const { return rows_[r]; }
  const Cell& at(std::size_t r, std::size_t c) const { return rows_[r][c]; }

  int column_index(const std::string& name) const;  // -1 if absent
  // Throws if the column is absent or contains a non-numeric cell.
  std::vector<double> numeric_column(const std::string& name) const;
  std::vector<std::string> text_column(const std::string& name) const;

  bool operator==(const Table&) const = default;

 private:
  std::vector<std::string> columns_;
  std::vector<Row> rows_;
};

// Shortest-roundtrip decimal rendering; integral values carry no fraction.
std::string format_double(double v);

enum class TableFormat { kCsv, kLines };

// CSV: header row, RFC-style quoting, '.' decimal separator. LINES: one JSON
// object per row. Both deterministic for identical input. Returns bytes written.
std::size_t write_table(const Table& t, std::ostream& out, TableFormat format);
std::size_t write_table(const Table& t, const std::filesystem::path& dest,
                        TableFormat format);

// Cells that parse exactly as decimal numbers become numeric, others text.
Table read_table_csv(std::istream& in);
Table read_table_csv(const std::filesystem::path& source);

}  // namespace gridfail
