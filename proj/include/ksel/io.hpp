#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/dataset.hpp"
#include "ksel/experiment.hpp"
#include "ksel/options.hpp"

namespace ksel {

// 17 significant digits reproduce any double bit-exactly on re-read.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Which CSV header belongs to which variable role.  Empty x/m/v lists fall
// back to a header scan for the conventional names x, x1, x2, ... (and m*, v*).
struct ColumnMap {
  std::string s = "s";
  std::string y = "y";
  std::string d = "d";
  std::vector<std::string> x;
  std::vector<std::string> m;
  std::vector<std::string> v;
};

namespace detail {

inline std::string trim(const std::string& in) {
  std::size_t b = 0, e = in.size();
  while (b < e && std::isspace(static_cast<unsigned char>(in[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(in[e - 1]))) --e;
  return in.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path, Index row,
                         const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + cell.size() || cell.empty())
    throw InputError(path + ": row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + cell + "' as a number");
  return v;
}

// True when the header is `stem` or `stem` followed by digits only.
inline bool role_named(const std::string& header, const std::string& stem) {
  if (header.rfind(stem, 0) != 0) return false;
  for (std::size_t i = stem.size(); i < header.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(header[i]))) return false;
  return true;
}

inline std::vector<Index> resolve_group(const std::vector<std::string>& headers,
                                        const std::unordered_map<std::string, Index>& at,
                                        const std::vector<std::string>& wanted,
                                        const std::string& stem, const std::string& path) {
  std::vector<Index> cols;
  if (wanted.empty()) {
    for (Index j = 0; j < static_cast<Index>(headers.size()); ++j)
      if (role_named(headers[static_cast<std::size_t>(j)], stem)) cols.push_back(j);
    return cols;
  }
  for (const std::string& name : wanted) {
    auto it = at.find(name);
    if (it == at.end())
      throw InputError(path + ": column '" + name + "' (role " + stem + ") not found in header");
    cols.push_back(it->second);
  }
  return cols;
}

}  // namespace detail

// Reads an observation table.  The s column must be exactly 0 or 1; the y cell
// may be empty only on unselected rows; a y value on an unselected row is
// legal but ignored (reported through `warnings`), since only s*y is stored.
inline Dataset read_dataset_csv(const std::string& path, const ColumnMap& map = {},
                                std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> headers = detail::split_csv_line(line);
  std::unordered_map<std::string, Index> at;
  for (Index j = 0; j < static_cast<Index>(headers.size()); ++j) {
    const std::string& h = headers[static_cast<std::size_t>(j)];
    if (!at.emplace(h, j).second) throw InputError(path + ": duplicate column '" + h + "'");
  }
  const auto require = [&](const std::string& name, const std::string& role) {
    auto it = at.find(name);
    if (it == at.end())
      throw InputError(path + ": required column '" + name + "' (role " + role + ") not found");
    return it->second;
  };
  const Index cs = require(map.s, "s"), cy = require(map.y, "y"), cd = require(map.d, "d");
  const std::vector<Index> cx = detail::resolve_group(headers, at, map.x, "x", path);
  const std::vector<Index> cm = detail::resolve_group(headers, at, map.m, "m", path);
  const std::vector<Index> cv = detail::resolve_group(headers, at, map.v, "v", path);
  if (cx.empty()) throw InputError(path + ": no covariate columns (role x) found");

  std::vector<double> s, y, d;
  std::vector<std::vector<double>> x(cx.size()), m(cm.size()), v(cv.size());
  Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != headers.size())
      throw InputError(path + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(headers.size()));
    const double si = detail::parse_cell(cells[static_cast<std::size_t>(cs)], path, row, map.s);
    if (si != 0.0 && si != 1.0)
      throw InputError(path + ": row " + std::to_string(row) + ", column '" + map.s +
                       "': selection must be exactly 0 or 1, got '" +
                       cells[static_cast<std::size_t>(cs)] + "'");
    const std::string& ycell = cells[static_cast<std::size_t>(cy)];
    double yi = std::numeric_limits<double>::quiet_NaN();
    if (ycell.empty()) {
      if (si == 1.0)
        throw InputError(path + ": row " + std::to_string(row) + ", column '" + map.y +
                         "': outcome missing on a selected row");
    } else {
      yi = detail::parse_cell(ycell, path, row, map.y);
      if (si == 0.0 && warnings)
        warnings->push_back(path + ": row " + std::to_string(row) +
                            ": outcome present on an unselected row; ignored (s*y = 0)");
    }
    s.push_back(si);
    y.push_back(yi);
    d.push_back(detail::parse_cell(cells[static_cast<std::size_t>(cd)], path, row, map.d));
    for (std::size_t j = 0; j < cx.size(); ++j)
      x[j].push_back(detail::parse_cell(cells[static_cast<std::size_t>(cx[j])], path, row,
                                        headers[static_cast<std::size_t>(cx[j])]));
    for (std::size_t j = 0; j < cm.size(); ++j)
      m[j].push_back(detail::parse_cell(cells[static_cast<std::size_t>(cm[j])], path, row,
                                        headers[static_cast<std::size_t>(cm[j])]));
    for (std::size_t j = 0; j < cv.size(); ++j)
      v[j].push_back(detail::parse_cell(cells[static_cast<std::size_t>(cv[j])], path, row,
                                        headers[static_cast<std::size_t>(cv[j])]));
  }
  if (row == 0) throw InputError(path + ": no data rows");

  const Index n = static_cast<Index>(s.size());
  VectorXd vs(n), vy(n), vd(n);
  MatrixXd mx(n, static_cast<Index>(cx.size()));
  MatrixXd mm(cm.empty() ? 0 : n, static_cast<Index>(cm.size()));
  MatrixXd mv(cv.empty() ? 0 : n, static_cast<Index>(cv.size()));
  for (Index i = 0; i < n; ++i) {
    vs[i] = s[static_cast<std::size_t>(i)];
    vy[i] = y[static_cast<std::size_t>(i)];
    vd[i] = d[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < cx.size(); ++j) mx(i, static_cast<Index>(j)) = x[j][static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < cm.size(); ++j) mm(i, static_cast<Index>(j)) = m[j][static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < cv.size(); ++j) mv(i, static_cast<Index>(j)) = v[j][static_cast<std::size_t>(i)];
  }
  return Dataset::make(vs, vy, vd, mx, mm, mv);
}

// Writes an observation table with the conventional header (s,y,d,x1..,m1..,v1..).
// Unselected outcomes are written as empty cells; everything else round-trips
// bit-exactly through fmt17.
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << "s,y,d";
  for (Index j = 0; j < data.x.cols(); ++j) out << ",x" << (j + 1);
  for (Index j = 0; j < data.m.cols(); ++j) out << ",m" << (j + 1);
  for (Index j = 0; j < data.v.cols(); ++j) out << ",v" << (j + 1);
  out << "\n";
  for (Index i = 0; i < data.n(); ++i) {
    out << fmt17(data.s[i]) << ',';
    if (data.s[i] == 1.0) out << fmt17(data.sy[i]);
    out << ',' << fmt17(data.d[i]);
    for (Index j = 0; j < data.x.cols(); ++j) out << ',' << fmt17(data.x(i, j));
    for (Index j = 0; j < data.m.cols(); ++j) out << ',' << fmt17(data.m(i, j));
    for (Index j = 0; j < data.v.cols(); ++j) out << ',' << fmt17(data.v(i, j));
    out << "\n";
  }
  if (!out) throw InputError(path + ": write failed");
}

// Reads the covariate (and, for dynamic shifts, treatment and follow-up)
// columns of an alternative-population sample.
inline ShiftedSample read_shift_csv(const std::string& path, bool need_dynamic,
                                    const ColumnMap& map = {}) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> headers = detail::split_csv_line(line);
  std::unordered_map<std::string, Index> at;
  for (Index j = 0; j < static_cast<Index>(headers.size()); ++j)
    if (!at.emplace(headers[static_cast<std::size_t>(j)], j).second)
      throw InputError(path + ": duplicate column '" + headers[static_cast<std::size_t>(j)] + "'");
  const std::vector<Index> cx = detail::resolve_group(headers, at, map.x, "x", path);
  if (cx.empty()) throw InputError(path + ": no covariate columns (role x) found");
  std::vector<Index> cm;
  Index cd = -1;
  if (need_dynamic) {
    auto it = at.find(map.d);
    if (it == at.end())
      throw InputError(path + ": required column '" + map.d + "' (role d) not found");
    cd = it->second;
    cm = detail::resolve_group(headers, at, map.m, "m", path);
    if (cm.empty()) throw InputError(path + ": no follow-up columns (role m) found");
  }

  std::vector<double> d;
  std::vector<std::vector<double>> x(cx.size()), m(cm.size());
  Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != headers.size())
      throw InputError(path + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(headers.size()));
    for (std::size_t j = 0; j < cx.size(); ++j)
      x[j].push_back(detail::parse_cell(cells[static_cast<std::size_t>(cx[j])], path, row,
                                        headers[static_cast<std::size_t>(cx[j])]));
    if (need_dynamic) {
      d.push_back(detail::parse_cell(cells[static_cast<std::size_t>(cd)], path, row, map.d));
      for (std::size_t j = 0; j < cm.size(); ++j)
        m[j].push_back(detail::parse_cell(cells[static_cast<std::size_t>(cm[j])], path, row,
                                          headers[static_cast<std::size_t>(cm[j])]));
    }
  }
  if (row == 0) throw InputError(path + ": no data rows");

  ShiftedSample out;
  out.x.resize(row, static_cast<Index>(cx.size()));
  for (Index i = 0; i < row; ++i)
    for (std::size_t j = 0; j < cx.size(); ++j)
      out.x(i, static_cast<Index>(j)) = x[j][static_cast<std::size_t>(i)];
  if (need_dynamic) {
    out.d.resize(row);
    out.m.resize(row, static_cast<Index>(cm.size()));
    for (Index i = 0; i < row; ++i) {
      out.d[i] = d[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < cm.size(); ++j)
        out.m(i, static_cast<Index>(j)) = m[j][static_cast<std::size_t>(i)];
    }
  }
  return out;
}

inline void write_curve_csv(const std::string& path, const CurveEstimate& curve) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << "d,estimate\n";
  for (Index i = 0; i < curve.grid.size(); ++i)
    out << fmt17(curve.grid[i]) << ',' << fmt17(curve.values[i]) << "\n";
  if (!out) throw InputError(path + ": write failed");
}

inline CurveEstimate read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file, expected a header row");
  std::vector<double> g, v;
  Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw InputError(path + ": row " + std::to_string(row) + " must have two cells");
    g.push_back(detail::parse_cell(cells[0], path, row, "d"));
    v.push_back(detail::parse_cell(cells[1], path, row, "estimate"));
  }
  CurveEstimate out;
  out.grid = Eigen::Map<const VectorXd>(g.data(), static_cast<Index>(g.size()));
  out.values = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
  return out;
}

namespace detail {
inline std::string csv_quote(const std::string& raw) {
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += '"';  // escape by doubling
    out += c;
  }
  out += '"';
  return out;
}
}  // namespace detail

// One row per replication.  Runtimes are deliberately absent: the file must be
// bit-identical across runs with the same seed and configuration.
inline std::string report_rows_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "n,rep,seed,ok,error,estimate,truth,bias,abs_error,ci_lo,ci_hi,covered\n";
  for (const RepRecord& r : report.rows) {
    out << r.n << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
        << detail::csv_quote(r.error) << ',';
    if (r.ok)
      out << fmt17(r.estimate) << ',' << fmt17(r.truth) << ',' << fmt17(r.bias) << ','
          << fmt17(r.abs_error);
    else
      out << ",,,";
    out << ',';
    if (r.ok && r.has_ci)
      out << fmt17(r.ci_lo) << ',' << fmt17(r.ci_hi) << ',' << (r.covered ? 1 : 0);
    else
      out << ",,";
    out << "\n";
  }
  return out.str();
}

}  // namespace ksel
