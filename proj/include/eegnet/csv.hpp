#pragma once

// Small CSV writer/reader for the report files. Numbers print with %.17g so
// a round trip is bit-exact and re-runs diff cleanly. Cells containing
// commas or quotes are double-quoted; `#`-prefixed lines are comments.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eegnet/error.hpp"

namespace eegnet::csv {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string num(std::int64_t v) { return std::to_string(v); }

inline std::string quote_if_needed(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

class Table {
 public:
  void comment(const std::string& line) { body_ += "# " + line + "\n"; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ += ',';
      body_ += quote_if_needed(cells[i]);
    }
    body_ += '\n';
  }

  const std::string& str() const { return body_; }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("csv: cannot open " + path + " for writing");
    os.write(body_.data(), static_cast<std::streamsize>(body_.size()));
    if (!os) throw FormatError("csv: write failed for " + path);
  }

 private:
  std::string body_;
};

// Parses rows, skipping comment lines. Handles the writer's quoting.
inline std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cell += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("csv: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return std::move(buf).str();
}

inline double to_double(const std::string& cell, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError("csv: bad number '" + cell + "' in " + where);
  }
}

}  // namespace eegnet::csv
