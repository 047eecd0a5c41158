#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "onebit/bench/sweep.hpp"

namespace onebit::bench {

inline constexpr const char* kReportHeader = "snr_db,method,nmse_db,realizations,seed,wall_time_s";

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// CSV text: header plus one LF-terminated line per row, reals with six decimals.
inline std::string format_report(const NmseReport& r) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& row : r.rows) {
    out += fixed6(row.snr_db) + "," + row.method + "," + fixed6(row.nmse_db) + "," +
           std::to_string(row.realizations) + "," + std::to_string(row.seed) + "," + fixed6(row.wall_time_s) + "\n";
  }
  return out;
}

inline void write_report(const NmseReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << format_report(r);
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline NmseReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw std::runtime_error("report: missing or bad header");
  NmseReport r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (int i = 0; i < 6; ++i)
      if (!std::getline(ls, f[i], ',')) throw std::runtime_error("report: short line '" + line + "'");
    r.rows.push_back({std::stod(f[0]), f[1], std::stod(f[2]), std::stoul(f[3]), std::stoull(f[4]), std::stod(f[5])});
  }
  return r;
}

inline NmseReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

}  // namespace onebit::bench
