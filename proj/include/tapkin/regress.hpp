#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapkin/features.hpp"

namespace tapkin::regress {

enum class TermKind { C, U, CU, CU2, U2, Intercept, Custom };

std::string to_string(TermKind kind);
TermKind term_kind_from_string(const std::string& name);

// One column of the rate-reactivity model. `gas` names the concentration
// series, `surface` the uptake series (usually the same gas).
struct TermDescriptor {
  TermKind kind = TermKind::C;
  std::string gas;
  std::string surface;
  std::string name;
  std::string unit;
  std::vector<double> custom;  // values of a Custom column

  static TermDescriptor make(TermKind kind, const std::string& gas, const std::string& surface = {});
};

// {C, U, CU, CU2, U2} for one gas.
std::vector<TermDescriptor> full_terms(const std::string& gas);

// "full" or "custom:C,CU,U".
std::vector<TermDescriptor> parse_terms(const std::string& spec, const std::string& gas);

struct DesignMatrix {
  std::vector<TermDescriptor> columns;
  Eigen::MatrixXd X;  // centered when `centered`
  Eigen::VectorXd y;
  Eigen::MatrixXd X_raw;
  Eigen::VectorXd y_raw;
  Eigen::VectorXd x_mean;
  double y_mean = 0.0;
  bool centered = true;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
};

// Builds the columns pointwise from per-gas features. Throws ValidationError
// for vacuous (all-zero or constant) columns, NaN/Inf or mismatched grids.
DesignMatrix build_design_matrix(std::span<const features::TransientFeatures> features,
                                 const std::vector<TermDescriptor>& terms, std::span<const double> response,
                                 bool center = true);

DesignMatrix make_design(std::vector<TermDescriptor> terms, Eigen::MatrixXd X, Eigen::VectorXd y, bool center);

enum class Method { OLS, LASSO, SCAD };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct PenaltySpec {
  Method method = Method::SCAD;
  std::optional<double> lambda;      // fixed lambda; cross-validated when empty
  double a = 3.7;
  int cv_folds = 10;
  std::vector<double> lambda_grid;   // strictly descending; default grid when empty
  std::size_t grid_size = 50;
  double grid_ratio = 1e-4;
  std::uint64_t seed = 0;
  bool random_folds = false;
  bool standardize = false;
  std::size_t max_iter = 100000;
  double tol = 1e-9;
  double zero_tol = 1e-8;

  void validate() const;
};

struct RegressionFit {
  Method method = Method::OLS;
  std::vector<std::string> terms;
  Eigen::VectorXd beta;
  double intercept = 0.0;
  std::vector<bool> selected;
  double lambda_chosen = 0.0;
  std::vector<double> lambda_grid;  // empty when no cross-validation ran
  std::vector<double> cv_curve;     // mean validation MSE per grid value
  double residual_rmse = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<std::string> warnings;
};

double soft_threshold(double z, double lambda);
// Closed-form univariate SCAD solution for a unit-scale coordinate.
double scad_threshold(double z, double lambda, double a);
double scad_penalty(double beta, double lambda, double a);
// argmin_b v/2 b^2 - z b + p_scad(|b|) for any v > 0.
double scad_coordinate(double z, double v, double lambda, double a);

RegressionFit fit_ols(const DesignMatrix& dm, double zero_tol = 1e-8);
RegressionFit fit_lasso(const DesignMatrix& dm, const PenaltySpec& pen);
RegressionFit fit_scad(const DesignMatrix& dm, const PenaltySpec& pen);
RegressionFit fit(const DesignMatrix& dm, const PenaltySpec& pen);

// Log-spaced from lambda_max (smallest value zeroing every coefficient)
// down to ratio * lambda_max.
std::vector<double> default_lambda_grid(const DesignMatrix& dm, std::size_t size = 50, double ratio = 1e-4,
                                        bool standardize = false);

std::vector<std::size_t> fold_assignment(std::size_t n, int folds, bool random, std::uint64_t seed);

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> curve;
  std::vector<std::string> warnings;
};

// Penalized fitter selected by pen.method (LASSO or SCAD).
CvResult cross_validate(const DesignMatrix& dm, const PenaltySpec& pen);

struct SelectionMetrics {
  std::optional<double> npv;  // empty when no zero is predicted
  double coef_rmse = 0.0;
  std::size_t true_negatives = 0;
  std::size_t predicted_negatives = 0;
};

SelectionMetrics compute_selection_metrics(const RegressionFit& fit, std::span<const double> truth,
                                           double zero_tol = 1e-8);

// Regresses r_CO/C_CO on sqrt(r_O2/C_O2) with a penalized intercept column.
// beta[0] is the intercept, beta[1] the slope.
RegressionFit fit_mechanism_line(const features::RcdSeries& rcd_co, const features::RcdSeries& rcd_o2_sqrt,
                                 const PenaltySpec& pen);

}  // namespace tapkin::regress
