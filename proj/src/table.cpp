#include "gridfail/table.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gridfail {

void Table::add_row(Row row) {
  if (row.size() != columns_.size())
    throw std::invalid_argument("ragged row: got " + std::to_string(row.size()) +
                                " cells, table has " + std::to_string(columns_.size()) +
                                " columns");
  rows_.push_back(std::move(row));
}

int Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> Table::numeric_column(const std::string& name) const {
  const int c = column_index(name);
  if (c < 0) throw std::out_of_range("no column named " + name);
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const Row& r : rows_) {
    const double* d = std::get_if<double>(&r[c]);
    if (!d) throw std::invalid_argument("column " + name + " has a non-numeric cell");
    out.push_back(*d);
  }
  return out;
}

std::vector<std::string> Table::text_column(const std::string& name) const {
  const int c = column_index(name);
  if (c < 0) throw std::out_of_range("no column named " + name);
  std::vector<std::string> out;
  out.reserve(rows_.size());
  for (const Row& r : rows_) {
    if (const std::string* s = std::get_if<std::string>(&r[c]))
      out.push_back(*s);
    else
      out.push_back(format_double(std::get<double>(r[c])));
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string csv_cell(const Table::Cell& cell) {
  if (const double* d = std::get_if<double>(&cell)) return format_double(*d);
  const std::string& s = std::get<std::string>(cell);
  if (!needs_quoting(s)) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

}  // namespace

std::size_t write_table(const Table& t, std::ostream& out, TableFormat format) {
  std::size_t bytes = 0;
  auto emit = [&](const std::string& s) {
    out << s;
    bytes += s.size();
  };
  if (format == TableFormat::kCsv) {
    std::string header;
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) header += ',';
      header += csv_cell(t.columns()[c]);
    }
    header += '\n';
    emit(header);
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      std::string line;
      for (std::size_t c = 0; c < t.n_cols(); ++c) {
        if (c) line += ',';
        line += csv_cell(t.at(r, c));
      }
      line += '\n';
      emit(line);
    }
  } else {
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      nlohmann::ordered_json j;
      for (std::size_t c = 0; c < t.n_cols(); ++c) {
        const Table::Cell& cell = t.at(r, c);
        if (const double* d = std::get_if<double>(&cell))
          j[t.columns()[c]] = *d;
        else
          j[t.columns()[c]] = std::get<std::string>(cell);
      }
      emit(j.dump());
      emit("\n");
    }
  }
  if (!out) throw std::runtime_error("write failed");
  return bytes;
}

std::size_t write_table(const Table& t, const std::filesystem::path& dest,
                        TableFormat format) {
  std::ofstream f(dest, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + dest.string() + " for writing");
  return write_table(t, f, format);
}

namespace {

// One CSV record, quote-aware; may span multiple physical lines.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

Table::Cell parse_cell(const std::string& s) {
  if (!s.empty()) {
    double d = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, d);
    if (res.ec == std::errc() && res.ptr == last) return d;
  }
  return s;
}

}  // namespace

Table read_table_csv(std::istream& in) {
  std::vector<std::string> fields;
  if (!read_record(in, fields)) throw std::runtime_error("empty CSV input");
  Table t(fields);
  std::size_t line = 1;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
    if (fields.size() != t.n_cols())
      throw std::runtime_error("CSV line " + std::to_string(line) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(t.n_cols()));
    Table::Row row;
    row.reserve(fields.size());
    for (const std::string& f : fields) row.push_back(parse_cell(f));
    t.add_row(std::move(row));
  }
  return t;
}

Table read_table_csv(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + source.string());
  return read_table_csv(f);
}

}  // namespace gridfail
