#include "eki/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace eki {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& out, const Matrix& M) {
  out << M.rows() << ',' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
}

namespace {

double parse_double(const std::string& tok, Eigen::Index row) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error("matrix csv: bad number '" + tok + "' on data row " + std::to_string(row + 1));
  }
  return v;
}

}  // namespace

Matrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("matrix csv: missing header");
  long rows = -1;
  long cols = -1;
  char comma = 0;
  std::istringstream header(line);
  if (!(header >> rows >> comma >> cols) || comma != ',' || rows < 0 || cols < 0) {
    throw Error("matrix csv: header must be 'rows,cols'");
  }
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw Error("matrix csv: truncated at row " + std::to_string(i + 1));
    std::istringstream ls(line);
    std::string tok;
    Eigen::Index j = 0;
    while (std::getline(ls, tok, ',')) {
      if (j >= cols) throw Error("matrix csv: too many columns on row " + std::to_string(i + 1));
      M(i, j++) = parse_double(tok, i);
    }
    if (j != cols) throw Error("matrix csv: too few columns on row " + std::to_string(i + 1));
  }
  return M;
}

void save_matrix(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_matrix_csv(out, M);
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return read_matrix_csv(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_problem(const std::filesystem::path& dir, const LinearProblem& problem) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "A.csv", problem.A);
  save_matrix(dir / "y.csv", problem.y);
  save_matrix(dir / "gamma.csv", problem.gamma);
  if (problem.theta_true) save_matrix(dir / "theta_true.csv", *problem.theta_true);
}

LinearProblem load_problem(const std::filesystem::path& dir) {
  LinearProblem p;
  p.A = load_matrix(dir / "A.csv");
  const Matrix y = load_matrix(dir / "y.csv");
  if (y.cols() != 1) throw DimensionError("y.csv must hold a column vector");
  p.y = y.col(0);
  p.gamma = load_matrix(dir / "gamma.csv");
  if (std::filesystem::exists(dir / "theta_true.csv")) {
    const Matrix t = load_matrix(dir / "theta_true.csv");
    p.theta_true = t.col(0);
  }
  p.validate();
  return p;
}

}  // namespace eki
