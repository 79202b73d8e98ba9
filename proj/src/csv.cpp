#include "mmgcn/csv.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mmgcn/error.hpp"

namespace mmgcn {

namespace {

std::string where(const std::filesystem::path& path, std::size_t row) {
  return path.string() + " (row " + std::to_string(row) + ")";
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      std::size_t a = pos, b = end;
      while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
      while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
      double v = 0.0;
      const auto res = std::from_chars(line.data() + a, line.data() + b, v);
      if (a == b || res.ec != std::errc() || res.ptr != line.data() + b) {
        throw LoadError(where(path, lineno) + ": malformed number '" + line.substr(a, b - a) + "'");
      }
      row.push_back(v);
      pos = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw LoadError(where(path, lineno) + ": expected " + std::to_string(rows.front().size()) + " columns, got " +
                      std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(path.string() + ": file is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << std::setprecision(9);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  if (!out) throw LoadError("failed writing " + path.string());
}

}  // namespace mmgcn
