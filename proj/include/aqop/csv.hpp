// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aqop {

// Minimal CSV table: header row + string cells. Quoting per RFC 4180.
class CsvTable {
 public:
  static CsvTable read_file(const std::string& path);
  static CsvTable from_header(std::vector<std::string> columns);

  void append_row(std::vector<std::string> row);
  void write_file(const std::string& path) const;

  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }

  bool has_column(const std::string& name) const;
  const std::string& cell(std::size_t row, const std::string& column) const;
  std::optional<double> cell_double(std::size_t row, const std::string& column) const;

 private:
  std::vector<std::string> columns_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_double(double v, int significant_digits = 10);

}  // namespace aqop
