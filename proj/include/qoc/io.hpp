#pragma once

// Artifact plumbing: CSV/JSON writers with round-trip-exact floats and
// atomic file replacement, plus the field-file reader used for replays.
// Nothing here stamps times or hostnames; identical inputs must produce
// byte-identical artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoc/core.hpp"

namespace qoc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits: enough for bit-exact double round trips.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// 10 significant digits: for human-facing console lines, where the %.17g
// round-trip form would print noise like 3.2433999999999998.
inline std::string format_compact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

// Write via a sibling temp file and rename over the target, so readers never
// observe a half-written artifact.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// One CSV table: fixed header, rows of doubles in column order.
inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t c = 0; c < header.size(); ++c)
    out << (c ? "," : "") << header[c];
  out << "\n";
  for (const std::vector<double>& row : rows) {
    if (row.size() != header.size())
      throw IoError("csv_table: row width does not match header");
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
  return out.str();
}

// Reads the f column of a field table (any leading header line is skipped).
// Accepts either "t,f" rows or bare one-value-per-line samples.
inline std::vector<double> read_field_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open field file " + path.string());
  std::vector<double> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments and whitespace-only lines.
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;

    std::string cell = line;
    if (const auto comma = line.rfind(','); comma != std::string::npos)
      cell = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double value = std::stod(cell, &used);
      while (used < cell.size() &&
             (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r'))
        ++used;
      if (used != cell.size()) throw std::invalid_argument("trailing characters");
      samples.push_back(value);
    } catch (const std::exception&) {
      if (lineno == 1 && samples.empty()) continue;  // header row
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": cannot parse field sample '" + cell + "'");
    }
  }
  if (samples.empty()) throw IoError(path.string() + ": no field samples found");
  return samples;
}

}  // namespace qoc
