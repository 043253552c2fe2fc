#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "grelu/data.hpp"
#include "grelu/linalg.hpp"
#include "grelu/matrix.hpp"
#include "grelu/model.hpp"
#include "grelu/rng.hpp"

namespace testing {

using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Dense to_eigen(const grelu::Matrix& a) {
  Dense out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
  }
  return out;
}

inline grelu::Matrix from_eigen(const Dense& a) {
  grelu::Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
  }
  return out;
}

inline double rel_frob(const grelu::Matrix& a, const grelu::Matrix& b) {
  const double scale = std::max(grelu::frobenius_norm(a), grelu::frobenius_norm(b));
  return scale == 0.0 ? 0.0 : grelu::frobenius_norm(a - b) / scale;
}

inline grelu::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                                   double variance = 1.0) {
  return grelu::gaussian_matrix(r, c, variance, grelu::RngStream(seed, 0x7e57));
}

// Unit-norm Gaussian inputs and Gaussian labels.
inline grelu::Dataset random_dataset(std::size_t n, std::size_t d_x, std::size_t d_y,
                                     std::uint64_t seed) {
  grelu::Matrix X = grelu::gaussian_matrix(n, d_x, 1.0, grelu::RngStream(seed, 0xda7a1));
  grelu::normalize_rows(X);
  grelu::Matrix Y = grelu::gaussian_matrix(n, d_y, 1.0, grelu::RngStream(seed, 0xda7a2));
  return grelu::make_dataset(std::move(X), std::move(Y));
}

inline grelu::Vector unit_vector(std::size_t d, std::uint64_t seed) {
  grelu::Matrix x = grelu::gaussian_matrix(1, d, 1.0, grelu::RngStream(seed, 0x0ec7));
  grelu::normalize_rows(x);
  return {x.row(0).begin(), x.row(0).end()};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Dense diagonal 0/1 matrix of a mask.
inline Dense mask_matrix(const grelu::BitMask& b) {
  Dense d = Dense::Zero(b.size(), b.size());
  for (std::size_t s = 0; s < b.size(); ++s) d(s, s) = b.test(s) ? 1.0 : 0.0;
  return d;
}

}  // namespace testing
