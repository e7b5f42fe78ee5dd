#pragma once

// Long-format CSV output. Every file begins with "# key=value" comment
// lines carrying provenance, then a header row.

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phasescope/error.hpp"

namespace phasescope {

/// Shortest round-trip representation; empty for NaN (missing value).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Splits one CSV record (no embedded newlines).
inline std::vector<std::string> csv_split(std::string_view line) {
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
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

using CommentHeader = std::vector<std::pair<std::string, std::string>>;

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const CommentHeader& comments, const std::vector<std::string>& columns)
      : out_(out), width_(columns.size()) {
    for (const auto& [k, v] : comments) out_ << "# " << k << '=' << v << '\n';
    row(columns);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw ArgumentError("csv row has wrong number of fields");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
  std::size_t width_;
};

/// Opens `path` for writing or throws IoError.
inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

}  // namespace phasescope
