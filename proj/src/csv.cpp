// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aqop/types.hpp"

namespace aqop {

namespace {

// Reads one CSV record from the stream. Quoted cells may contain commas,
// doubled quotes, and newlines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& out) {
  out.clear();
  std::string cell;
  bool quoted = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != std::char_traits<char>::eof()) {
    const char c = static_cast<char>(ch);
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          cell += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      if (out.empty() && cell.empty()) {  // blank line: skip
        any = false;
        continue;
      }
      break;
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (!any) return false;
  out.push_back(std::move(cell));
  return true;
}

std::string escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV file: " + path);
  std::vector<std::string> row;
  if (!read_record(in, row)) throw Error("empty CSV file: " + path);
  CsvTable t = from_header(std::move(row));
  while (read_record(in, row)) {
    if (row.size() != t.columns_.size()) {
      throw Error("CSV row width mismatch in " + path + " (expected " +
                  std::to_string(t.columns_.size()) + ", got " + std::to_string(row.size()) + ")");
    }
    t.rows_.push_back(std::move(row));
  }
  return t;
}

CsvTable CsvTable::from_header(std::vector<std::string> columns) {
  CsvTable t;
  t.columns_ = std::move(columns);
  for (std::size_t i = 0; i < t.columns_.size(); ++i) t.index_[t.columns_[i]] = i;
  return t;
}

void CsvTable::append_row(std::vector<std::string> row) {
  if (row.size() != columns_.size()) throw Error("CSV row width mismatch on append");
  rows_.push_back(std::move(row));
}

void CsvTable::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write CSV file: " + path);
  for (std::size_t i = 0; i < columns_.size(); ++i)
    out << (i ? "," : "") << escape(columns_[i]);
  out << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << escape(row[i]);
    out << "\n";
  }
}

bool CsvTable::has_column(const std::string& name) const { return index_.count(name) > 0; }

const std::string& CsvTable::cell(std::size_t row, const std::string& column) const {
  auto it = index_.find(column);
  if (it == index_.end()) throw Error("CSV column not found: " + column);
  return rows_.at(row)[it->second];
}

std::optional<double> CsvTable::cell_double(std::size_t row, const std::string& column) const {
  const std::string& s = cell(row, column);
  if (s.empty() || s == "NA" || s == "nan") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("CSV cell is not numeric: '" + s + "' in column " + column);
  }
}

std::string format_double(double v, int significant_digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, v);
  return buf;
}

}  // namespace aqop
