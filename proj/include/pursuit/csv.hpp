#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "engines.hpp"
#include "learn.hpp"

namespace pursuit {

// All floating-point output goes through %.17g so a double round-trips
// exactly and reruns produce byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace detail

// step,atom_index,alpha,beta,residual_norm — one row per greedy step.
inline std::string trace_to_csv(const GreedyTrace& trace,
                                const std::string& comment_header = "") {
  std::ostringstream os;
  os << comment_header;
  os << "step,atom_index,alpha,beta,residual_norm\n";
  os << "0,-1,0,0," << format_double(trace.initial_norm) << "\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const GreedyStep& s = trace.steps[i];
    os << (i + 1) << "," << s.atom << "," << format_double(s.alpha) << ","
       << format_double(s.beta) << "," << format_double(s.residual_norm) << "\n";
  }
  return os.str();
}

inline std::string samples_to_csv(const SampleSet& s) {
  std::ostringstream os;
  for (int d = 0; d < s.feature_dim(); ++d) os << "x_" << d << ",";
  os << "y\n";
  for (int i = 0; i < s.n(); ++i) {
    for (int d = 0; d < s.feature_dim(); ++d)
      os << format_double(s.xs(i, d)) << ",";
    os << format_double(s.ys(i)) << "\n";
  }
  return os.str();
}

// Expects the exact header produced by samples_to_csv; B must be supplied by
// the caller (it is not part of the file).
inline SampleSet samples_from_csv(std::istream& in, double b) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw CsvError("line 1: missing header");
  ++line_no;
  const auto head = detail::split_csv_line(line);
  if (head.size() < 2 || head.back() != "y")
    throw CsvError("line 1: header must be x_0,...,y");
  const int dim = static_cast<int>(head.size()) - 1;
  for (int d = 0; d < dim; ++d)
    if (head[d] != "x_" + std::to_string(d))
      throw CsvError("line 1: expected column x_" + std::to_string(d));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != dim + 1)
      throw CsvError("line " + std::to_string(line_no) + ": expected " +
                     std::to_string(dim + 1) + " cells, got " +
                     std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(detail::parse_double(c, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("no data rows");
  SampleSet s;
  s.xs.resize(rows.size(), dim);
  s.ys.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < dim; ++d) s.xs(i, d) = rows[i][d];
    s.ys(i) = rows[i][dim];
  }
  s.B = b;
  s.validate();
  return s;
}

// Human-readable fit report: chosen model, expansion, and the full risk
// ladder the choice was made over.
inline std::string fit_to_report(const FitResult& fr) {
  std::ostringstream os;
  os << "k_star=" << fr.k_star << "\n";
  os << "n=" << fr.n << "\n";
  os << "m=" << fr.m << "\n";
  os << "B=" << format_double(fr.B) << "\n";
  os << "kappa=" << format_double(fr.kappa) << "\n";
  os << "atoms=";
  for (std::size_t j = 0; j < fr.atoms.size(); ++j)
    os << (j ? "," : "") << fr.atoms[j];
  os << "\ncoeffs=";
  for (std::size_t j = 0; j < fr.coeffs.size(); ++j)
    os << (j ? "," : "") << format_double(fr.coeffs[j]);
  os << "\nscales=";
  for (std::size_t j = 0; j < fr.scales.size(); ++j)
    os << (j ? "," : "") << format_double(fr.scales[j]);
  os << "\nrisk_table=k,empirical_risk,penalty,penalized\n";
  for (const RiskRow& r : fr.risk_table)
    os << r.k << "," << format_double(r.empirical_risk) << ","
       << format_double(r.penalty) << "," << format_double(r.penalized) << "\n";
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace pursuit
