#pragma once

// Snapshot CSV files: header `t,y1[,y2],s,det_hess,speed`, one row per node in
// storage order. Boundary nodes carry `nan` for det_hess and speed.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "affine_flow/error.hpp"
#include "affine_flow/support_grid.hpp"

namespace affine_flow {

/// Shortest decimal with 17 significant digits; round-trips doubles exactly.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string csv_header(int n) { return n == 1 ? "t,y1,s,det_hess,speed" : "t,y1,y2,s,det_hess,speed"; }

inline void write_snapshot_csv(std::ostream& out, const SupportGrid& grid, const std::vector<double>& det,
                               const std::vector<double>& speed) {
  out << csv_header(grid.n()) << '\n';
  const std::string t = format_double(grid.time);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto y = grid.geometry.point(k);
    out << t << ',' << format_double(y[0]) << ',';
    if (grid.n() == 2) out << format_double(y[1]) << ',';
    out << format_double(grid[k]) << ',' << format_double(det.empty() ? NAN : det[k]) << ','
        << format_double(speed.empty() ? NAN : speed[k]) << '\n';
  }
}

inline void write_snapshot_csv(const std::string& path, const SupportGrid& grid, const std::vector<double>& det,
                               const std::vector<double>& speed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_snapshot_csv(out, grid, det, speed);
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

namespace detail {

inline double parse_csv_number(const std::string& field, int line) {
  if (field == "nan") return NAN;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty())
    throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad number '" + field + "'");
  return v;
}

}  // namespace detail

/// Read the `s` column of a snapshot CSV into a grid of the given geometry.
/// Node coordinates must match the geometry to 1e-9.
inline SupportGrid read_snapshot_csv(std::istream& in, const GridGeometry& geometry) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: empty grid file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header(geometry.n))
    throw Error(ErrorKind::Parse, "line 1: expected header '" + csv_header(geometry.n) + "'");
  SupportGrid grid(geometry, 0.0);
  const std::size_t columns = 4 + geometry.n;
  std::size_t k = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(detail::parse_csv_number(field, lineno));
    if (row.size() != columns)
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                                        " columns");
    if (k >= geometry.size()) throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": too many rows");
    const auto y = geometry.point(k);
    for (int a = 0; a < geometry.n; ++a)
      if (std::abs(row[1 + a] - y[a]) > 1e-9)
        throw Error(ErrorKind::IncompatibleGrids, "line " + std::to_string(lineno) + ": node coordinate mismatch");
    if (k == 0) grid.time = row[0];
    grid[k++] = row[1 + geometry.n];
  }
  if (k != geometry.size())
    throw Error(ErrorKind::Parse, "grid file has " + std::to_string(k) + " rows, expected " +
                                      std::to_string(geometry.size()));
  grid.validate();
  return grid;
}

inline SupportGrid read_snapshot_csv(const std::string& path, const GridGeometry& geometry) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_snapshot_csv(in, geometry);
}

}  // namespace affine_flow
