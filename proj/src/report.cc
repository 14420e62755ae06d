/*
 * Copyright 2026 The SegX Toolkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "segx/error.h"
#include "segx/io.h"

namespace segx {
namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void CheckTable(const Table& t) {
  if (t.header.empty()) throw ArgumentError("table '" + t.name + "' has no columns");
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) {
      throw ArgumentError("table '" + t.name + "' has a row of the wrong width");
    }
  }
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.6g", v);
  return buf;
}

std::string table_csv(const Table& t) {
  CheckTable(t);
  std::string out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += CsvField(cells[i]);
    }
    out += '\n';
  };
  emit(t.header);
  for (const auto& row : t.rows) emit(row);
  return out;
}

std::string table_text(const Table& t) {
  CheckTable(t);
  std::vector<std::size_t> width(t.header.size(), 0);
  for (std::size_t c = 0; c < t.header.size(); ++c) width[c] = t.header[c].size();
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) line += "  ";
      line += cells[c];
      if (c + 1 < cells.size()) line.append(width[c] - cells[c].size(), ' ');
    }
    out += line + '\n';
  };
  emit(t.header);
  for (const auto& row : t.rows) emit(row);
  return out;
}

void emit_report(const std::vector<Table>& tables, const std::string& path_prefix) {
  if (tables.empty()) throw ArgumentError("emit_report: no tables");
  for (const auto& t : tables) {
    write_text_file(path_prefix + t.name + ".csv", table_csv(t));
    write_text_file(path_prefix + t.name + ".txt", table_text(t));
  }
}

Table read_table_csv(const fs::path& path, const std::string& name) {
  std::istringstream in(read_text_file(path));
  Table t;
  t.name = name;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = SplitCsvLine(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size()) {
        throw FormatError(path.string() + ": row width differs from header");
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw FormatError(path.string() + ": empty table");
  return t;
}

}  // namespace segx
