#include "grelu/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"
#include "grelu/rng.hpp"

namespace grelu {

namespace {

constexpr std::uint64_t kDataStream = 0x44415441ull;  // "DATA"
constexpr double kLogFloor = 1e-12;

}  // namespace

void normalize_rows(Matrix& X) {
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto row = X.row(i);
    if (!all_finite(row)) {
      throw InputError("row " + std::to_string(i) + " has non-finite entries");
    }
    const double nrm = norm2(row);
    if (nrm == 0.0) throw InputError("row " + std::to_string(i) + " is zero");
    for (double& v : row) v /= nrm;
  }
}

Dataset make_dataset(Matrix X, Matrix Y, double label_scale) {
  if (X.rows() != Y.rows()) {
    throw DimensionError("dataset: X has " + std::to_string(X.rows()) +
                         " rows, Y has " + std::to_string(Y.rows()));
  }
  if (X.rows() == 0 || X.cols() == 0 || Y.cols() == 0) {
    throw DimensionError("dataset: empty dimension");
  }
  if (!all_finite(X.flat()) || !all_finite(Y.flat())) {
    throw InputError("dataset: non-finite values");
  }
  if (!(label_scale > 0.0) || !std::isfinite(label_scale)) {
    throw InputError("dataset: label_scale must be positive");
  }
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double nrm = norm2(X.row(i));
    if (std::abs(nrm - 1.0) > 1e-9) {
      throw InputError("dataset: row " + std::to_string(i) + " has norm " +
                       std::to_string(nrm) + ", expected 1");
    }
  }
  return Dataset{std::move(X), std::move(Y), label_scale};
}

double ackley_label(std::span<const double> x) {
  const std::size_t d = x.size();
  double y = 0.0;
  for (std::size_t e = 0; e < d; ++e) {
    // One-based partner ((d - d' - 1) mod d) + 1 with d' = e + 1.
    const std::size_t partner = (2 * d - e - 2) % d;
    const double v = x[e];
    const double a = std::abs(v);
    const double term = std::log(std::max(a, kLogFloor)) *
                            (std::cos(v) + v * v * v * std::sin(v)) +
                        std::sqrt(a);
    y += x[partner] * term;
  }
  return y;
}

Dataset gen_ackley(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw DimensionError("gen_ackley: n and d must be >= 1");
  Matrix X(n, d);
  RngStream(seed, kDataStream).fill_normal(X.flat(), 1.0);
  normalize_rows(X);
  Matrix Y(n, 1);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Y(i, 0) = ackley_label(X.row(i));
    scale = std::max(scale, std::abs(Y(i, 0)));
  }
  if (scale == 0.0) scale = 1.0;
  Y *= 1.0 / scale;
  return make_dataset(std::move(X), std::move(Y), scale);
}

double check_separation(const Dataset& ds, std::ostream* warn) {
  const std::size_t n = ds.n();
  if (n < 2) {
    if (warn != nullptr) *warn << "warning: separation undefined for n < 2\n";
    return 0.0;
  }
  const Matrix gram = kernels::gemm_nt(ds.X, ds.X);
  double delta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      delta = std::max(delta, std::abs(gram(i, j)));
    }
  }
  return std::min(delta, 1.0);
}

Dataset import_csv(std::istream& in) {
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line)) throw FormatError("csv: missing header", 0);
  std::size_t dx = 0;
  std::size_t dy = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      while (!col.empty() && (col.back() == '\r' || col.back() == ' ')) col.pop_back();
      const bool is_x = !col.empty() && col[0] == 'x';
      const bool is_y = !col.empty() && col[0] == 'y';
      const std::size_t expect = is_x ? dx : dy;
      if ((!is_x && !is_y) || col.substr(1) != std::to_string(expect) ||
          (is_x && dy > 0)) {
        throw FormatError("csv: bad header column '" + col + "'", offset);
      }
      (is_x ? dx : dy) += 1;
    }
  }
  if (dx == 0 || dy == 0) throw FormatError("csv: header needs x and y columns", 0);
  offset += line.size() + 1;

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < dx + dy; ++c) {
      const std::size_t end = line.find(',', pos);
      const std::string cell =
          line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      char* stop = nullptr;
      const double v = std::strtod(cell.c_str(), &stop);
      if (cell.empty() || stop == cell.c_str() || *stop != '\0' ||
          (c + 1 < dx + dy && end == std::string::npos) ||
          (c + 1 == dx + dy && end != std::string::npos)) {
        throw FormatError("csv: bad cell in column " + std::to_string(c),
                          line_start + pos);
      }
      (c < dx ? xs : ys).push_back(v);
      pos = end + 1;
    }
    ++n;
  }
  if (n == 0) throw FormatError("csv: no data rows", offset);
  Matrix X(n, dx, std::move(xs));
  normalize_rows(X);
  return make_dataset(std::move(X), Matrix(n, dy, std::move(ys)), 1.0);
}

Dataset import_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return import_csv(in);
}

}  // namespace grelu
