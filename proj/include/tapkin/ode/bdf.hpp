#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tapkin/ode/banded.hpp"

namespace tapkin::ode {

// y' = f(t, y) with a banded Jacobian.
class OdeSystem {
 public:
  virtual ~OdeSystem() = default;
  virtual std::size_t size() const = 0;
  virtual BandShape band() const = 0;
  virtual void rhs(double t, std::span<const double> y, std::span<double> dydt) const = 0;
  // `jac` arrives zeroed with shape band().
  virtual void jacobian(double t, std::span<const double> y, BandedMatrix& jac) const = 0;
};

struct BdfOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 1'000'000;
};

struct BdfStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  std::size_t jac_evals = 0;
  std::size_t factorizations = 0;
};

// Variable-order (1..5), variable-step backward differentiation formulas in
// the modified-divided-difference form, with a simplified Newton iteration
// that reuses the Jacobian until convergence stalls. Step-size changes are
// applied by rescaling the difference array, so the interpolant between the
// last two accepted points is always available through `interpolate`.
class BdfIntegrator {
 public:
  static constexpr int kMaxOrder = 5;

  BdfIntegrator(const OdeSystem& system, double t0, std::vector<double> y0, double t_bound,
                BdfOptions options = {});

  bool finished() const { return t_ >= t_bound_; }

  // Advances by one accepted step. Throws NumericalError when the step size
  // underflows or the step budget is exhausted.
  void step();

  double t() const { return t_; }
  double t_previous() const { return t_prev_; }
  int order() const { return order_; }
  double step_size() const { return h_abs_; }
  const std::vector<double>& y() const { return y_; }
  const BdfStats& stats() const { return stats_; }

  // Evaluates the interpolating polynomial of the last accepted step at
  // `t` in [t_previous(), t()].
  void interpolate(double t, std::span<double> out) const;

 private:
  using Row = std::vector<double>;

  void refresh_jacobian(double t, std::span<const double> y);
  void rescale_differences(int order, double factor);
  bool newton(double t_new, const Row& y_predict, double c, const Row& psi, const Row& scale,
              Row& y_new, Row& d, int& iterations);
  double initial_step(const Row& f0) const;
  double rms(std::span<const double> v, std::span<const double> scale) const;

  const OdeSystem& system_;
  BdfOptions options_;
  std::size_t n_;
  double t_;
  double t_prev_;
  double t_bound_;
  Row y_;
  std::vector<Row> diffs_;  // D[0..kMaxOrder+2]
  int order_ = 1;
  int equal_steps_ = 0;
  double h_abs_ = 0.0;
  double newton_tol_;

  BandedMatrix jacobian_;
  bool jacobian_current_ = false;
  std::vector<BandedLU> lu_;  // holds zero or one factorization

  BdfStats stats_;
};

}  // namespace tapkin::ode
