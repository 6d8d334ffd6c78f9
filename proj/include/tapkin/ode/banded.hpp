#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tapkin::ode {

struct BandShape {
  std::size_t lower = 0;
  std::size_t upper = 0;
};

// Square band matrix in LAPACK general-band layout, with the extra `lower`
// rows of headroom that the pivoting factorization needs.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(std::size_t n, BandShape shape);

  std::size_t size() const { return n_; }
  BandShape shape() const { return shape_; }

  bool in_band(std::size_t row, std::size_t col) const;
  double get(std::size_t row, std::size_t col) const;
  // Out-of-band writes are a programming error and throw std::out_of_range.
  void set(std::size_t row, std::size_t col, double value);
  void add(std::size_t row, std::size_t col, double value);

  void fill(double value);
  void scale(double factor);
  void add_identity(double value);

  // y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;

  std::size_t leading_dim() const { return ld_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

 private:
  std::size_t index(std::size_t row, std::size_t col) const;

  std::size_t n_ = 0;
  BandShape shape_{};
  std::size_t ld_ = 0;
  std::vector<double> data_;
};

// LU factorization with partial pivoting (LAPACK dgbtrf/dgbtrs).
class BandedLU {
 public:
  // Throws NumericalError when the matrix is exactly singular.
  explicit BandedLU(BandedMatrix matrix);

  // Solves A x = b in place.
  void solve(std::span<double> rhs) const;

 private:
  BandedMatrix factors_;
  std::vector<int> pivots_;
};

}  // namespace tapkin::ode
