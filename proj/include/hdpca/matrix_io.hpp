#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

namespace hdpca {

/// Reads a dense matrix from CSV: one line per row (dimension), one field per
/// column (sample). Fields may be separated by commas or whitespace.
/// Throws InputError on ragged rows or unparsable fields.
Eigen::MatrixXd read_matrix_csv(std::istream& in, bool skip_header = false);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, bool skip_header = false);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& values);

/// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double value);

}  // namespace hdpca
