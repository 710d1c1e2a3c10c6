// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

// File output and CSV helpers.

#ifndef WIDEFORMER_IO_HPP_
#define WIDEFORMER_IO_HPP_

#include <string>
#include <vector>

namespace wf {

// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
void ensure_directory(const std::string& dir);

// Shortest round-tripping decimal form of a double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  double number(std::size_t row, const std::string& col) const;
};

// Strict reader for the comma-separated files written by this library
// (no quoting).  Throws InputError on empty or ragged input.
CsvTable parse_csv(const std::string& text, const std::string& source = "<csv>");
CsvTable read_csv(const std::string& path);

}  // namespace wf

#endif  // WIDEFORMER_IO_HPP_
