#include "hdpca/matrix_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hdpca/errors.hpp"

namespace hdpca {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Eigen::MatrixXd read_matrix_csv(std::istream& in, bool skip_header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    }
    std::vector<double> row;
    const char* cursor = line.c_str();
    while (true) {
      while (*cursor == ' ') ++cursor;
      if (*cursor == '\0') break;
      char* end = nullptr;
      const double value = std::strtod(cursor, &end);
      if (end == cursor || (*end != ' ' && *end != '\0')) {
        throw InputError("line " + std::to_string(line_no) + ": unparsable field");
      }
      row.push_back(value);
      cursor = end;
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                       " fields, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("matrix input is empty");

  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (!out.allFinite()) throw InputError("matrix input contains NaN or Inf");
  return out;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return read_matrix_csv(in, skip_header);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& values) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(values(r, c));
    }
    out << '\n';
  }
}

}  // namespace hdpca
