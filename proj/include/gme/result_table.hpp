#pragma once

#include "gme/types.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace gme {

using Cell = std::variant<double, std::string>;

/// Rectangular table with named columns. Numbers are written in shortest
/// round-trip form so reruns are byte-identical.
class ResultTable {
 public:
  explicit ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns_.size())
      throw Error("table_shape", "row has " + std::to_string(row.size()) + " cells, table has " +
                                     std::to_string(columns_.size()) + " columns");
    rows_.push_back(std::move(row));
  }

  static std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c];
    os << '\n';
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) os << ',';
        if (const double* d = std::get_if<double>(&row[c]))
          os << format_number(*d);
        else
          os << csv_escape(std::get<std::string>(row[c]));
      }
      os << '\n';
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out;
    out["columns"] = columns_;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : rows_) {
      auto r = nlohmann::ordered_json::array();
      for (const auto& cell : row) {
        if (const double* d = std::get_if<double>(&cell)) {
          if (std::isfinite(*d))
            r.push_back(*d);
          else
            r.push_back(nullptr);
        } else {
          r.push_back(std::get<std::string>(cell));
        }
      }
      rows.push_back(std::move(r));
    }
    out["rows"] = std::move(rows);
    return out;
  }

  void write_json(std::ostream& os) const { os << to_json().dump(2) << '\n'; }

 private:
  static std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + "\"";
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace gme
