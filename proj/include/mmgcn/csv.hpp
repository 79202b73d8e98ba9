#pragma once

#include <filesystem>

#include <Eigen/Dense>

namespace mmgcn {

/// Reads a dense matrix: one row per line, comma-separated decimals. Blank
/// lines are skipped. Throws LoadError naming the file and 1-based row.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Writes with 9 significant digits.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace mmgcn
