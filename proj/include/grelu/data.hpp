#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "grelu/matrix.hpp"

namespace grelu {

// Training set with unit-norm input rows. Row i of X is x_i, row i of Y is y_i.
struct Dataset {
  Matrix X;  // n x d_x
  Matrix Y;  // n x d_y
  double label_scale = 1.0;

  std::size_t n() const noexcept { return X.rows(); }
  std::size_t d_x() const noexcept { return X.cols(); }
  std::size_t d_y() const noexcept { return Y.cols(); }

  bool operator==(const Dataset&) const = default;
};

// Validates shapes, finiteness and |‖x_i‖ - 1| <= 1e-9.
Dataset make_dataset(Matrix X, Matrix Y, double label_scale = 1.0);

// Scales every row to unit Euclidean norm. Throws InputError on a zero or
// non-finite row.
void normalize_rows(Matrix& X);

// Unscaled label of one input row; circular partner index, log floor 1e-12.
double ackley_label(std::span<const double> x);

// n Gaussian rows in R^d normalized to the sphere, labels from ackley_label
// divided by max |y| (recorded as label_scale).
Dataset gen_ackley(std::size_t n, std::size_t d, std::uint64_t seed);

// max_{i != j} |x_i . x_j|. Returns 0 for n < 2 and writes a warning to
// `warn` when given.
double check_separation(const Dataset& ds, std::ostream* warn = nullptr);

// Binary "GRND" format. Loads throw FormatError with the failing byte offset.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);
void write_dataset(const Dataset& ds, std::ostream& out);
Dataset read_dataset(std::istream& in);

// CSV with header x0..x{d-1},y0..y{k-1}. Input rows are normalized on import;
// labels are taken as given (label_scale = 1).
Dataset import_csv(std::istream& in);
Dataset import_csv_file(const std::string& path);

}  // namespace grelu
