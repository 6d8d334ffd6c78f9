#include "tapkin/ode/bdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "tapkin/error.hpp"

namespace tapkin::ode {
namespace {

constexpr int kNewtonMaxIter = 4;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

// gamma_k = sum_{i<=k} 1/i; alpha_k = gamma_k for plain BDF.
constexpr std::array<double, BdfIntegrator::kMaxOrder + 1> kGamma = {
    0.0, 1.0, 1.5, 1.5 + 1.0 / 3.0, 1.5 + 1.0 / 3.0 + 0.25, 1.5 + 1.0 / 3.0 + 0.25 + 0.2};

constexpr double error_const(int order) { return 1.0 / (order + 1); }

using Square = std::vector<std::vector<double>>;

// R(order, factor) from the difference-array rescaling rule.
Square compute_r(int order, double factor) {
  const int m = order + 1;
  Square mat(m, std::vector<double>(m, 0.0));
  for (int j = 0; j < m; ++j) mat[0][j] = 1.0;
  for (int i = 1; i < m; ++i) {
    for (int j = 1; j < m; ++j) mat[i][j] = (i - 1 - factor * j) / static_cast<double>(i);
  }
  for (int i = 1; i < m; ++i) {
    for (int j = 0; j < m; ++j) mat[i][j] *= mat[i - 1][j];
  }
  return mat;
}

}  // namespace

BdfIntegrator::BdfIntegrator(const OdeSystem& system, double t0, std::vector<double> y0, double t_bound,
                             BdfOptions options)
    : system_(system),
      options_(options),
      n_(system.size()),
      t_(t0),
      t_prev_(t0),
      t_bound_(t_bound),
      y_(std::move(y0)),
      diffs_(kMaxOrder + 3, Row(n_, 0.0)),
      newton_tol_(std::max(10.0 * std::numeric_limits<double>::epsilon() / options.rtol,
                           std::min(0.03, std::sqrt(options.rtol)))),
      jacobian_(n_, system.band()) {
  if (y_.size() != n_) throw ValidationError("initial state has wrong dimension");
  if (!(t_bound > t0)) throw ValidationError("integration interval must be positive");
  if (!(options.rtol > 0.0) || !(options.atol > 0.0)) throw ValidationError("tolerances must be positive");

  Row f0(n_);
  system_.rhs(t_, y_, f0);
  ++stats_.rhs_evals;
  h_abs_ = initial_step(f0);
  diffs_[0] = y_;
  for (std::size_t i = 0; i < n_; ++i) diffs_[1][i] = f0[i] * h_abs_;
  refresh_jacobian(t_, y_);
}

double BdfIntegrator::rms(std::span<const double> v, std::span<const double> scale) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double q = v[i] / scale[i];
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double BdfIntegrator::initial_step(const Row& f0) const {
  const double interval = t_bound_ - t_;
  Row scale(n_);
  for (std::size_t i = 0; i < n_; ++i) scale[i] = options_.atol + std::abs(y_[i]) * options_.rtol;
  const double d0 = rms(y_, scale);
  const double d1 = rms(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, interval);

  Row y1(n_), f1(n_), diff(n_);
  for (std::size_t i = 0; i < n_; ++i) y1[i] = y_[i] + h0 * f0[i];
  system_.rhs(t_ + h0, y1, f1);
  for (std::size_t i = 0; i < n_; ++i) diff[i] = f1[i] - f0[i];
  const double d2 = rms(diff, scale) / h0;

  const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1, d2), 0.5);
  return std::min({100.0 * h0, h1, interval, options_.max_step});
}

void BdfIntegrator::refresh_jacobian(double t, std::span<const double> y) {
  jacobian_.fill(0.0);
  system_.jacobian(t, y, jacobian_);
  ++stats_.jac_evals;
  jacobian_current_ = true;
  lu_.clear();
}

void BdfIntegrator::rescale_differences(int order, double factor) {
  const Square r = compute_r(order, factor);
  const Square u = compute_r(order, 1.0);
  const int m = order + 1;
  Square ru(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j) ru[i][j] += r[i][k] * u[k][j];

  // D[:m] <- RU^T D[:m]
  std::vector<Row> updated(m, Row(n_, 0.0));
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) {
      const double w = ru[k][i];
      if (w == 0.0) continue;
      for (std::size_t e = 0; e < n_; ++e) updated[i][e] += w * diffs_[k][e];
    }
  }
  for (int i = 0; i < m; ++i) diffs_[i] = std::move(updated[i]);
}

bool BdfIntegrator::newton(double t_new, const Row& y_predict, double c, const Row& psi, const Row& scale,
                           Row& y_new, Row& d, int& iterations) {
  y_new = y_predict;
  std::fill(d.begin(), d.end(), 0.0);
  Row f(n_), dy(n_);
  double dy_norm_old = -1.0;
  iterations = 0;
  for (int k = 0; k < kNewtonMaxIter; ++k) {
    iterations = k + 1;
    system_.rhs(t_new, y_new, f);
    ++stats_.rhs_evals;
    if (!std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); })) return false;
    for (std::size_t i = 0; i < n_; ++i) dy[i] = c * f[i] - psi[i] - d[i];
    lu_.front().solve(dy);
    const double dy_norm = rms(dy, scale);
    double rate = -1.0;
    if (dy_norm_old > 0.0) {
      rate = dy_norm / dy_norm_old;
      if (rate >= 1.0 || std::pow(rate, kNewtonMaxIter - k) / (1.0 - rate) * dy_norm > newton_tol_) {
        return false;
      }
    }
    for (std::size_t i = 0; i < n_; ++i) {
      y_new[i] += dy[i];
      d[i] += dy[i];
    }
    if (dy_norm == 0.0 || (rate >= 0.0 && rate / (1.0 - rate) * dy_norm < newton_tol_)) return true;
    dy_norm_old = dy_norm;
  }
  return false;
}

void BdfIntegrator::step() {
  if (finished()) return;
  if (stats_.steps >= options_.max_steps) {
    std::ostringstream os;
    os << "integrator step budget exhausted at t=" << t_ << " (steps=" << stats_.steps << ", h=" << h_abs_
       << ", order=" << order_ << ", rtol=" << options_.rtol << ")";
    throw NumericalError(os.str());
  }

  const double min_step = 10.0 * std::abs(std::nextafter(t_, std::numeric_limits<double>::infinity()) - t_);
  double h_abs = h_abs_;
  if (h_abs > options_.max_step) {
    rescale_differences(order_, options_.max_step / h_abs);
    h_abs = options_.max_step;
    equal_steps_ = 0;
    lu_.clear();
  } else if (h_abs < min_step) {
    rescale_differences(order_, min_step / h_abs);
    h_abs = min_step;
    equal_steps_ = 0;
    lu_.clear();
  }

  const int order = order_;
  Row y_predict(n_), psi(n_), scale(n_), y_new(n_), d(n_);
  bool jac_current = jacobian_current_;
  double t_new = t_;
  double error_norm = 0.0;
  double safety = 0.0;

  for (;;) {
    if (h_abs < min_step) {
      std::ostringstream os;
      os << "integrator step size underflow at t=" << t_ << " (h=" << h_abs << ", order=" << order
         << ", rtol=" << options_.rtol << ", atol=" << options_.atol << ")";
      throw NumericalError(os.str());
    }
    t_new = t_ + h_abs;
    if (t_new > t_bound_) {
      t_new = t_bound_;
      rescale_differences(order, (t_new - t_) / h_abs);
      equal_steps_ = 0;
      lu_.clear();
    }
    const double h = t_new - t_;
    h_abs = h;

    std::fill(y_predict.begin(), y_predict.end(), 0.0);
    for (int k = 0; k <= order; ++k)
      for (std::size_t i = 0; i < n_; ++i) y_predict[i] += diffs_[k][i];
    for (std::size_t i = 0; i < n_; ++i) scale[i] = options_.atol + options_.rtol * std::abs(y_predict[i]);
    std::fill(psi.begin(), psi.end(), 0.0);
    for (int k = 1; k <= order; ++k)
      for (std::size_t i = 0; i < n_; ++i) psi[i] += diffs_[k][i] * kGamma[k];
    for (double& v : psi) v /= kGamma[order];

    const double c = h / kGamma[order];
    bool converged = false;
    int iterations = 0;
    for (;;) {
      if (lu_.empty()) {
        BandedMatrix m = jacobian_;
        m.scale(-c);
        m.add_identity(1.0);
        lu_.emplace_back(std::move(m));
        ++stats_.factorizations;
      }
      converged = newton(t_new, y_predict, c, psi, scale, y_new, d, iterations);
      if (converged || jac_current) break;
      refresh_jacobian(t_new, y_predict);
      jac_current = true;
    }

    if (!converged) {
      rescale_differences(order, 0.5);
      h_abs *= 0.5;
      equal_steps_ = 0;
      lu_.clear();
      ++stats_.rejected;
      continue;
    }

    safety = 0.9 * (2 * kNewtonMaxIter + 1) / (2 * kNewtonMaxIter + iterations);
    for (std::size_t i = 0; i < n_; ++i) scale[i] = options_.atol + options_.rtol * std::abs(y_new[i]);
    Row err(n_);
    for (std::size_t i = 0; i < n_; ++i) err[i] = error_const(order) * d[i];
    error_norm = rms(err, scale);
    if (error_norm > 1.0) {
      const double factor = std::max(kMinFactor, safety * std::pow(error_norm, -1.0 / (order + 1)));
      rescale_differences(order, factor);
      h_abs *= factor;
      equal_steps_ = 0;
      lu_.clear();
      ++stats_.rejected;
      continue;
    }
    break;
  }

  ++stats_.steps;
  ++equal_steps_;
  t_prev_ = t_;
  t_ = t_new;
  y_ = y_new;
  h_abs_ = h_abs;
  jacobian_current_ = false;

  // D^{j+1} y_n = D^j y_n - D^j y_{n-1}; d holds D^{k+1} y_n.
  for (std::size_t i = 0; i < n_; ++i) {
    diffs_[order + 2][i] = d[i] - diffs_[order + 1][i];
    diffs_[order + 1][i] = d[i];
  }
  for (int k = order; k >= 0; --k)
    for (std::size_t i = 0; i < n_; ++i) diffs_[k][i] += diffs_[k + 1][i];

  if (equal_steps_ < order + 1) return;

  Row buf(n_);
  double error_m_norm = std::numeric_limits<double>::infinity();
  double error_p_norm = std::numeric_limits<double>::infinity();
  if (order > 1) {
    for (std::size_t i = 0; i < n_; ++i) buf[i] = error_const(order - 1) * diffs_[order][i];
    error_m_norm = rms(buf, scale);
  }
  if (order < kMaxOrder) {
    for (std::size_t i = 0; i < n_; ++i) buf[i] = error_const(order + 1) * diffs_[order + 2][i];
    error_p_norm = rms(buf, scale);
  }
  const std::array<double, 3> norms = {error_m_norm, error_norm, error_p_norm};
  std::array<double, 3> factors{};
  for (int i = 0; i < 3; ++i) {
    factors[i] = norms[i] == 0.0 ? std::numeric_limits<double>::infinity()
                                 : std::pow(norms[i], -1.0 / (order + i));
  }
  const auto best = std::max_element(factors.begin(), factors.end());
  order_ = order + static_cast<int>(best - factors.begin()) - 1;
  const double factor = std::min(kMaxFactor, safety * *best);
  rescale_differences(order_, factor);
  h_abs_ *= factor;
  equal_steps_ = 0;
  lu_.clear();
}

void BdfIntegrator::interpolate(double t, std::span<double> out) const {
  std::copy(diffs_[0].begin(), diffs_[0].end(), out.begin());
  double p = 1.0;
  for (int i = 0; i < order_; ++i) {
    const double shift = t_ - h_abs_ * i;
    const double denom = h_abs_ * (1 + i);
    p *= (t - shift) / denom;
    for (std::size_t e = 0; e < n_; ++e) out[e] += diffs_[i + 1][e] * p;
  }
}

}  // namespace tapkin::ode
