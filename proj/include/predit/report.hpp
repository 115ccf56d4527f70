#pragma once

// Tabular study output: RFC-4180 CSV and a JSON document of the form
// {"study", "method", "params", "rows"} with a fixed column order.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "predit/error.hpp"

namespace predit {

using ojson = nlohmann::ordered_json;

struct Table {
  std::string study;
  std::string method;
  ojson params = ojson::object();
  std::vector<std::string> columns;
  std::vector<std::vector<ojson>> rows;

  void add_row(std::vector<ojson> row) {
    if (row.size() != columns.size()) {
      throw Error("table row has " + std::to_string(row.size()) + " cells, expected " +
                  std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
  }
};

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out;
  out.reserve(s.size() + 2);
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string format_cell(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v.get<double>());
    return std::string(buf, ptr);
  }
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return v.dump();
}

inline void write_csv(std::ostream& out, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(t.columns[i]);
  }
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(format_cell(row[i]));
    }
    out << '\n';
  }
}

inline ojson to_json(const Table& t) {
  ojson doc;
  doc["study"] = t.study;
  doc["method"] = t.method;
  doc["params"] = t.params;
  ojson rows = ojson::array();
  for (const auto& row : t.rows) {
    ojson r = ojson::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = row[i];
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

inline void write_json(std::ostream& out, const Table& t) { out << to_json(t).dump(2) << '\n'; }

inline void write_csv_file(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(out, t);
}

inline void write_json_file(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_json(out, t);
}

}  // namespace predit
