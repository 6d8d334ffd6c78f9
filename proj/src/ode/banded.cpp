#include "tapkin/ode/banded.hpp"

#include <lapacke.h>

#include <algorithm>
#include <stdexcept>
#include <string>

#include "tapkin/error.hpp"

namespace tapkin::ode {

BandedMatrix::BandedMatrix(std::size_t n, BandShape shape)
    : n_(n), shape_(shape), ld_(2 * shape.lower + shape.upper + 1), data_(ld_ * n, 0.0) {}

bool BandedMatrix::in_band(std::size_t row, std::size_t col) const {
  if (row >= n_ || col >= n_) return false;
  if (row > col) return row - col <= shape_.lower;
  return col - row <= shape_.upper;
}

std::size_t BandedMatrix::index(std::size_t row, std::size_t col) const {
  if (!in_band(row, col)) {
    throw std::out_of_range("band matrix access outside band: (" + std::to_string(row) + ", " +
                            std::to_string(col) + ")");
  }
  // LAPACK: AB(kl + ku + i - j, j), zero based.
  return shape_.lower + shape_.upper + row - col + col * ld_;
}

double BandedMatrix::get(std::size_t row, std::size_t col) const {
  return in_band(row, col) ? data_[index(row, col)] : 0.0;
}

void BandedMatrix::set(std::size_t row, std::size_t col, double value) { data_[index(row, col)] = value; }

void BandedMatrix::add(std::size_t row, std::size_t col, double value) { data_[index(row, col)] += value; }

void BandedMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void BandedMatrix::scale(double factor) {
  for (double& v : data_) v *= factor;
}

void BandedMatrix::add_identity(double value) {
  for (std::size_t i = 0; i < n_; ++i) add(i, i, value);
}

void BandedMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t lo = i > shape_.lower ? i - shape_.lower : 0;
    const std::size_t hi = std::min(n_ - 1, i + shape_.upper);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += data_[index(i, j)] * x[j];
    y[i] = acc;
  }
}

BandedLU::BandedLU(BandedMatrix matrix) : factors_(std::move(matrix)), pivots_(factors_.size()) {
  const auto n = static_cast<lapack_int>(factors_.size());
  const auto shape = factors_.shape();
  const lapack_int info =
      LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, static_cast<lapack_int>(shape.lower),
                     static_cast<lapack_int>(shape.upper), factors_.data(),
                     static_cast<lapack_int>(factors_.leading_dim()), pivots_.data());
  if (info != 0) {
    throw NumericalError("band LU factorization failed (dgbtrf info=" + std::to_string(info) + ")");
  }
}

void BandedLU::solve(std::span<double> rhs) const {
  const auto n = static_cast<lapack_int>(factors_.size());
  const auto shape = factors_.shape();
  const lapack_int info = LAPACKE_dgbtrs(
      LAPACK_COL_MAJOR, 'N', n, static_cast<lapack_int>(shape.lower),
      static_cast<lapack_int>(shape.upper), 1, factors_.data(),
      static_cast<lapack_int>(factors_.leading_dim()), pivots_.data(), rhs.data(), n);
  if (info != 0) {
    throw NumericalError("band LU solve failed (dgbtrs info=" + std::to_string(info) + ")");
  }
}

}  // namespace tapkin::ode
