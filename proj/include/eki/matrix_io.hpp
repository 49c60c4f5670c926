#pragma once

#include "eki/problem.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace eki {

// Fixture format: a "rows,cols" header line, then one comma-separated line
// per row. Values are written with 17 significant digits so they read back
// bit-for-bit.
void write_matrix_csv(std::ostream& out, const Matrix& M);
Matrix read_matrix_csv(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix load_matrix(const std::filesystem::path& path);

/// Writes A.csv, y.csv, gamma.csv (and theta_true.csv when present) into dir.
void save_problem(const std::filesystem::path& dir, const LinearProblem& problem);
LinearProblem load_problem(const std::filesystem::path& dir);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace eki
