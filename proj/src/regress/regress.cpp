#include "tapkin/regress.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "tapkin/error.hpp"

namespace tapkin::regress {

std::string to_string(TermKind kind) {
  switch (kind) {
    case TermKind::C: return "C";
    case TermKind::U: return "U";
    case TermKind::CU: return "CU";
    case TermKind::CU2: return "CU2";
    case TermKind::U2: return "U2";
    case TermKind::Intercept: return "Intercept";
    case TermKind::Custom: return "Custom";
  }
  return "?";
}

TermKind term_kind_from_string(const std::string& name) {
  for (auto k : {TermKind::C, TermKind::U, TermKind::CU, TermKind::CU2, TermKind::U2, TermKind::Intercept,
                 TermKind::Custom}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown term '" + name + "' (expected one of C, U, CU, CU2, U2)");
}

TermDescriptor TermDescriptor::make(TermKind kind, const std::string& gas, const std::string& surface) {
  TermDescriptor t;
  t.kind = kind;
  t.gas = gas;
  t.surface = surface.empty() ? gas : surface;
  const std::string c = "C_" + t.gas;
  const std::string u = "U_" + t.surface;
  switch (kind) {
    case TermKind::C: t.name = c; t.unit = "m/s"; break;
    case TermKind::U: t.name = u; t.unit = "mol/s"; break;
    case TermKind::CU: t.name = c + "*" + u; t.unit = "mol/s"; break;
    case TermKind::CU2: t.name = c + "*" + u + "^2"; t.unit = "mol/s"; break;
    case TermKind::U2: t.name = u + "^2"; t.unit = "mol/s"; break;
    case TermKind::Intercept: t.name = "intercept"; t.unit = "m/s"; break;
    case TermKind::Custom: t.name = gas; break;
  }
  return t;
}

std::vector<TermDescriptor> full_terms(const std::string& gas) {
  std::vector<TermDescriptor> out;
  for (auto k : {TermKind::C, TermKind::U, TermKind::CU, TermKind::CU2, TermKind::U2})
    out.push_back(TermDescriptor::make(k, gas));
  return out;
}

std::vector<TermDescriptor> parse_terms(const std::string& spec, const std::string& gas) {
  if (spec == "full") return full_terms(gas);
  const std::string prefix = "custom:";
  if (spec.rfind(prefix, 0) != 0) {
    throw ValidationError("term set '" + spec + "' must be 'full' or 'custom:<list>'");
  }
  std::vector<TermDescriptor> out;
  std::istringstream is(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(is, item, ',')) {
    const TermKind k = term_kind_from_string(item);
    if (k == TermKind::Intercept || k == TermKind::Custom) {
      throw ValidationError("term '" + item + "' cannot be requested in a term list");
    }
    for (const auto& t : out)
      if (t.kind == k) throw ValidationError("term '" + item + "' listed twice");
    out.push_back(TermDescriptor::make(k, gas));
  }
  if (out.empty()) throw ValidationError("custom term list is empty");
  return out;
}

DesignMatrix make_design(std::vector<TermDescriptor> terms, Eigen::MatrixXd X, Eigen::VectorXd y, bool center) {
  if (terms.empty()) throw ValidationError("design matrix needs at least one term");
  if (static_cast<std::size_t>(X.cols()) != terms.size() || X.rows() != y.size()) {
    throw ValidationError("design matrix shape does not match its terms or response");
  }
  if (!X.allFinite() || !y.allFinite()) throw ValidationError("design matrix or response holds NaN/Inf");
  DesignMatrix dm;
  dm.columns = std::move(terms);
  dm.centered = center;
  dm.X_raw = X;
  dm.y_raw = y;
  const Eigen::Index n = X.rows();
  if (center) {
    dm.x_mean = X.colwise().mean().transpose();
    dm.y_mean = y.mean();
    dm.X = X.rowwise() - dm.x_mean.transpose();
    dm.y = y.array() - dm.y_mean;
  } else {
    dm.x_mean = Eigen::VectorXd::Zero(X.cols());
    dm.X = X;
    dm.y = y;
  }
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (X.col(j).cwiseAbs().maxCoeff() == 0.0) {
      throw ValidationError("term '" + dm.columns[j].name + "' is identically zero");
    }
    if (center && dm.X.col(j).cwiseAbs().maxCoeff() <= 1e-14 * X.col(j).cwiseAbs().maxCoeff()) {
      throw ValidationError("term '" + dm.columns[j].name + "' is constant and vanishes after centering");
    }
  }
  (void)n;
  return dm;
}

DesignMatrix build_design_matrix(std::span<const features::TransientFeatures> feats,
                                 const std::vector<TermDescriptor>& terms, std::span<const double> response,
                                 bool center) {
  if (terms.empty()) throw ValidationError("design matrix needs at least one term");
  const std::size_t n = response.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(terms.size()));
  std::vector<features::TransientFeatures> set(feats.begin(), feats.end());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto& t = terms[j];
    if (t.kind == TermKind::Custom) {
      if (t.custom.size() != n) throw ValidationError("custom term '" + t.name + "' has the wrong length");
      for (std::size_t k = 0; k < n; ++k) X(k, j) = t.custom[k];
      continue;
    }
    if (t.kind == TermKind::Intercept) {
      X.col(j).setOnes();
      continue;
    }
    const auto& fc = features::find_gas(set, t.gas);
    const auto& fu = features::find_gas(set, t.surface);
    if (fc.size() != n || fu.size() != n) {
      throw ValidationError("term '" + t.name + "' and the response do not share one grid");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double c = fc.concentration[k];
      const double u = fu.uptake[k];
      double v = 0.0;
      switch (t.kind) {
        case TermKind::C: v = c; break;
        case TermKind::U: v = u; break;
        case TermKind::CU: v = c * u; break;
        case TermKind::CU2: v = c * u * u; break;
        case TermKind::U2: v = u * u; break;
        default: break;
      }
      X(k, j) = v;
    }
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(response.data(), static_cast<Eigen::Index>(n));
  return make_design(terms, std::move(X), std::move(y), center);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::OLS: return "ols";
    case Method::LASSO: return "lasso";
    case Method::SCAD: return "scad";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "ols") return Method::OLS;
  if (name == "lasso") return Method::LASSO;
  if (name == "scad") return Method::SCAD;
  throw ValidationError("unknown method '" + name + "' (expected ols, lasso or scad)");
}

void PenaltySpec::validate() const {
  if (lambda && !(*lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (method == Method::SCAD && !(a > 2.0)) throw ValidationError("SCAD requires a > 2");
  if (cv_folds < 2) throw ValidationError("cv_folds must be >= 2");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0)) throw ValidationError("lambda_grid values must be positive");
    if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1])) {
      throw ValidationError("lambda_grid must be strictly descending");
    }
  }
  if (grid_size < 1) throw ValidationError("grid_size must be >= 1");
  if (!(grid_ratio > 0.0 && grid_ratio < 1.0)) throw ValidationError("grid_ratio must lie in (0, 1)");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
  if (!(zero_tol >= 0.0)) throw ValidationError("zero_tol must be >= 0");
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double scad_threshold(double z, double lambda, double a) {
  const double az = std::abs(z);
  if (az <= 2.0 * lambda) return soft_threshold(z, lambda);
  if (az <= a * lambda) return ((a - 1.0) * z - std::copysign(a * lambda, z)) / (a - 2.0);
  return z;
}

double scad_penalty(double beta, double lambda, double a) {
  const double b = std::abs(beta);
  if (b <= lambda) return lambda * b;
  if (b <= a * lambda) return (2.0 * a * lambda * b - b * b - lambda * lambda) / (2.0 * (a - 1.0));
  return 0.5 * (a + 1.0) * lambda * lambda;
}

double scad_coordinate(double z, double v, double lambda, double a) {
  if (lambda == 0.0) return z / v;
  const double az = std::abs(z);
  auto f = [&](double b) { return 0.5 * v * b * b - az * b + scad_penalty(b, lambda, a); };
  double cand[5];
  int nc = 0;
  cand[nc++] = std::clamp(std::max(az - lambda, 0.0) / v, 0.0, lambda);
  const double curv = v * (a - 1.0) - 1.0;
  if (curv > 0.0) {
    cand[nc++] = std::clamp((az * (a - 1.0) - a * lambda) / curv, lambda, a * lambda);
  } else {
    cand[nc++] = lambda;
    cand[nc++] = a * lambda;
  }
  cand[nc++] = std::max(az / v, a * lambda);
  double best = cand[0];
  double best_f = f(best);
  for (int i = 1; i < nc; ++i) {
    const double fi = f(cand[i]);
    if (fi < best_f || (fi == best_f && cand[i] < best)) {
      best = cand[i];
      best_f = fi;
    }
  }
  return z < 0.0 ? -best : best;
}

namespace {

struct Problem {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  double yy = 0.0;
  Eigen::VectorXd scale;  // beta = beta_internal / scale
};

Problem make_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool standardize) {
  const double n = static_cast<double>(X.rows());
  Problem p;
  p.G = X.transpose() * X / n;
  p.c = X.transpose() * y / n;
  p.yy = y.squaredNorm() / n;
  p.scale = Eigen::VectorXd::Ones(X.cols());
  if (standardize) {
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (p.G(j, j) > 0.0) p.scale(j) = std::sqrt(p.G(j, j));
    const Eigen::VectorXd inv = p.scale.cwiseInverse();
    p.G = inv.asDiagonal() * p.G * inv.asDiagonal();
    p.c = inv.asDiagonal() * p.c;
  }
  return p;
}

double objective(const Problem& p, Method m, double lambda, double a, const Eigen::VectorXd& beta) {
  double obj = 0.5 * p.yy - p.c.dot(beta) + 0.5 * beta.dot(p.G * beta);
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    obj += (m == Method::SCAD) ? scad_penalty(beta(j), lambda, a) : lambda * std::abs(beta(j));
  }
  return obj;
}

int scad_region(double b, double lambda, double a) {
  if (b <= lambda) return 1;
  if (b <= a * lambda) return 2;
  return 3;
}

// Solves the stationarity conditions on the current support with every
// coefficient held in its current sign and penalty branch. Accepted only when
// the solution stays in those branches and lowers the objective.
bool active_set_step(const Problem& p, Method m, double lambda, double a, Eigen::VectorXd& beta) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta(j) != 0.0) support.push_back(j);
  if (support.empty()) return false;
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd A(k, k);
  Eigen::VectorXd b(k);
  std::vector<int> region(support.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index j = support[i];
    const double s = beta(j) > 0.0 ? 1.0 : -1.0;
    for (Eigen::Index l = 0; l < k; ++l) A(i, l) = p.G(j, support[l]);
    b(i) = p.c(j);
    region[i] = (m == Method::LASSO) ? 1 : (lambda == 0.0 ? 3 : scad_region(std::abs(beta(j)), lambda, a));
    if (region[i] == 1) {
      b(i) -= lambda * s;
    } else if (region[i] == 2) {
      A(i, i) -= 1.0 / (a - 1.0);
      b(i) -= a * lambda * s / (a - 1.0);
    }
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  if (!x.allFinite()) return false;
  // Walk toward x, stopping where the first coefficient leaves its branch.
  const double lo[4] = {0.0, 0.0, lambda, a * lambda};
  const double hi[4] = {0.0, lambda, a * lambda, std::numeric_limits<double>::infinity()};
  double step = 1.0;
  Eigen::Index stop = -1;
  double stop_at = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index j = support[i];
    const double s = beta(j) > 0.0 ? 1.0 : -1.0;
    const double mag = s * beta(j);
    const double dmag = s * (x(i) - beta(j));
    const int r = (m == Method::SCAD && lambda > 0.0) ? region[i] : (m == Method::LASSO ? 0 : 3);
    const double lower = r == 0 ? 0.0 : lo[r];
    const double upper = r == 0 ? std::numeric_limits<double>::infinity() : hi[r];
    if (dmag < 0.0 && mag + dmag <= lower) {
      const double t = (mag - lower) / -dmag;
      if (t < step) { step = t; stop = i; stop_at = s * lower; }
    } else if (dmag > 0.0 && mag + dmag > upper) {
      const double t = (upper - mag) / dmag;
      if (t < step) { step = t; stop = i; stop_at = s * upper; }
    }
  }
  if (!(step > 0.0)) return false;
  Eigen::VectorXd cand = beta;
  for (Eigen::Index i = 0; i < k; ++i) cand(support[i]) = beta(support[i]) + step * (x(i) - beta(support[i]));
  if (stop >= 0) cand(support[stop]) = stop_at;
  const double before = objective(p, m, lambda, a, beta);
  const double after = objective(p, m, lambda, a, cand);
  if (!(after < before)) return false;
  beta = cand;
  return true;
}

struct CdOutcome {
  std::size_t iterations = 0;
  double objective = 0.0;
  bool converged = false;
  bool oscillated = false;
};

CdOutcome coordinate_descent(const Problem& p, Method m, double lambda, const PenaltySpec& pen, Eigen::VectorXd& beta) {
  const Eigen::Index dim = beta.size();
  Eigen::VectorXd gb = p.G * beta;
  CdOutcome out;
  double prev = objective(p, m, lambda, pen.a, beta);
  Eigen::VectorXd best = beta;
  double best_obj = prev;
  int increases = 0;
  for (std::size_t it = 1; it <= pen.max_iter; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double v = p.G(j, j);
      double nb = 0.0;
      if (v > 0.0) {
        const double z = p.c(j) - (gb(j) - v * beta(j));
        nb = (m == Method::SCAD) ? scad_coordinate(z, v, lambda, pen.a) : soft_threshold(z, lambda) / v;
      }
      const double d = nb - beta(j);
      if (d != 0.0) {
        gb += p.G.col(j) * d;
        beta(j) = nb;
        max_change = std::max(max_change, std::abs(d));
      }
    }
    if (max_change >= pen.tol && it % 4 == 0 && active_set_step(p, m, lambda, pen.a, beta)) {
      gb = p.G * beta;
    } else if (it % 64 == 0) {
      gb = p.G * beta;
    }
    out.iterations = it;
    const double cur = objective(p, m, lambda, pen.a, beta);
    if (m == Method::SCAD) {
      if (cur > prev + 1e-9 && ++increases >= 2) {
        beta = best;
        out.objective = best_obj;
        out.oscillated = true;
        return out;
      }
      if (cur < best_obj) {
        best = beta;
        best_obj = cur;
      }
    }
    prev = cur;
    if (max_change < pen.tol) {
      out.converged = true;
      out.objective = cur;
      return out;
    }
  }
  out.objective = prev;
  return out;
}

// Least-squares solutions on every support, used as extra SCAD starts when
// the design is small enough to enumerate.
inline constexpr Eigen::Index kMaxEnumeratedTerms = 10;

std::vector<Eigen::VectorXd> support_starts(const Problem& p) {
  std::vector<Eigen::VectorXd> out;
  const Eigen::Index dim = p.c.size();
  if (dim > kMaxEnumeratedTerms) return out;
  for (unsigned mask = 1; mask < (1u << dim); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < dim; ++j)
      if (mask & (1u << j)) idx.push_back(j);
    const Eigen::MatrixXd A = p.G(idx, idx);
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(p.c(idx));
    if (!x.allFinite()) continue;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    b(idx) = x;
    out.push_back(std::move(b));
  }
  return out;
}

struct PathResult {
  std::vector<Eigen::VectorXd> betas;  // unscaled
  std::vector<double> objectives;
  std::size_t iterations = 0;
  std::vector<std::string> warnings;
};

PathResult fit_path(const Problem& p, Method m, const PenaltySpec& pen, std::span<const double> grid) {
  PathResult r;
  Eigen::VectorXd lasso = Eigen::VectorXd::Zero(p.c.size());
  std::optional<Eigen::VectorXd> scad_prev;
  const auto subset_starts = m == Method::SCAD ? support_starts(p) : std::vector<Eigen::VectorXd>{};
  for (double lambda : grid) {
    CdOutcome o = coordinate_descent(p, Method::LASSO, lambda, pen, lasso);
    r.iterations += o.iterations;
    Eigen::VectorXd beta = lasso;
    if (!o.converged) {
      std::ostringstream os;
      os << "lasso did not converge within " << pen.max_iter << " sweeps at lambda=" << lambda;
      r.warnings.push_back(os.str());
    }
    if (m == Method::SCAD) {
      // Two starts: the LASSO solution at this lambda and the SCAD solution
      // at the previous one. The lower objective wins; ties keep the LASSO start.
      auto run = [&](Eigen::VectorXd& b) {
        CdOutcome so = coordinate_descent(p, Method::SCAD, lambda, pen, b);
        r.iterations += so.iterations;
        std::ostringstream os;
        if (so.oscillated) {
          os << "scad objective rose twice at lambda=" << lambda << "; kept the best iterate";
          r.warnings.push_back(os.str());
        } else if (!so.converged) {
          os << "scad did not converge within " << pen.max_iter << " sweeps at lambda=" << lambda;
          r.warnings.push_back(os.str());
        }
        return so;
      };
      o = run(beta);
      if (scad_prev) {
        Eigen::VectorXd alt = *scad_prev;
        const CdOutcome ao = run(alt);
        if (ao.objective < o.objective) {
          o = ao;
          beta = alt;
        }
      }
      for (const auto& start : subset_starts) {
        Eigen::VectorXd alt = start;
        const CdOutcome ao = run(alt);
        if (ao.objective < o.objective) {
          o = ao;
          beta = alt;
        }
      }
      scad_prev = beta;
    }
    r.objectives.push_back(o.objective);
    r.betas.push_back(beta.cwiseQuotient(p.scale));
  }
  return r;
}

double lambda_max(const Problem& p) {
  double lm = 0.0;
  for (Eigen::Index j = 0; j < p.c.size(); ++j)
    if (p.G(j, j) > 0.0) lm = std::max(lm, std::abs(p.c(j)));
  return lm;
}

void finish_fit(const DesignMatrix& dm, RegressionFit& fit, double zero_tol) {
  fit.terms.clear();
  for (const auto& t : dm.columns) fit.terms.push_back(t.name);
  fit.intercept = dm.centered ? dm.y_mean - dm.x_mean.dot(fit.beta) : 0.0;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    if (fit.beta(j) == 0.0) fit.beta(j) = 0.0;  // drop negative zeros
  fit.selected.resize(static_cast<std::size_t>(fit.beta.size()));
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) fit.selected[j] = std::abs(fit.beta(j)) > zero_tol;
  const Eigen::VectorXd resid = (dm.y_raw - dm.X_raw * fit.beta).array() - fit.intercept;
  fit.residual_rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
}

RegressionFit fit_penalized(const DesignMatrix& dm, const PenaltySpec& pen, Method m) {
  pen.validate();
  if (dm.rows() == 0) throw ValidationError("design matrix has no rows");
  RegressionFit fit;
  fit.method = m;
  const Problem p = make_problem(dm.X, dm.y, pen.standardize);
  std::vector<double> path;
  if (pen.lambda) {
    const double lam = *pen.lambda;
    const double lm = lambda_max(p);
    if (lm > 0.0) {
      for (double g : default_lambda_grid(dm, pen.grid_size, pen.grid_ratio, pen.standardize))
        if (g > lam) path.push_back(g);
    }
    path.push_back(lam);
    fit.lambda_chosen = lam;
  } else {
    CvResult cv = cross_validate(dm, pen);
    fit.lambda_chosen = cv.lambda;
    fit.lambda_grid = cv.grid;
    fit.cv_curve = cv.curve;
    fit.warnings = cv.warnings;
    for (double g : cv.grid) {
      path.push_back(g);
      if (g == cv.lambda) break;
    }
  }
  PathResult r = fit_path(p, m, pen, path);
  fit.beta = r.betas.back();
  fit.objective = r.objectives.back();
  fit.iterations = r.iterations;
  fit.warnings.insert(fit.warnings.end(), r.warnings.begin(), r.warnings.end());
  finish_fit(dm, fit, pen.zero_tol);
  return fit;
}

}  // namespace

RegressionFit fit_ols(const DesignMatrix& dm, double zero_tol) {
  const auto n = dm.X.rows();
  const auto p = dm.X.cols();
  if (p > n) {
    throw ValidationError("OLS needs at least as many rows as terms (" + std::to_string(n) + " < " +
                          std::to_string(p) + ")");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dm.X, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(p - 1) > 0.0 ? sv(0) / sv(p - 1) : std::numeric_limits<double>::infinity();
  // cond(X^T X) = cond(X)^2
  if (!(cond * cond < 1e12)) {
    const Eigen::VectorXd v = svd.matrixV().col(p - 1);
    std::string names;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(v(j)) >= 0.1) names += (names.empty() ? "" : ", ") + dm.columns[j].name;
    }
    std::ostringstream os;
    os << "OLS normal equations are singular (condition estimate " << cond * cond << "); collinear terms: " << names;
    throw ValidationError(os.str());
  }
  RegressionFit fit;
  fit.method = Method::OLS;
  fit.beta = dm.X.colPivHouseholderQr().solve(dm.y);
  const Eigen::VectorXd r = dm.y - dm.X * fit.beta;
  fit.objective = 0.5 * r.squaredNorm() / static_cast<double>(n);
  finish_fit(dm, fit, zero_tol);
  return fit;
}

RegressionFit fit_lasso(const DesignMatrix& dm, const PenaltySpec& pen) { return fit_penalized(dm, pen, Method::LASSO); }

RegressionFit fit_scad(const DesignMatrix& dm, const PenaltySpec& pen) { return fit_penalized(dm, pen, Method::SCAD); }

RegressionFit fit(const DesignMatrix& dm, const PenaltySpec& pen) {
  switch (pen.method) {
    case Method::OLS: return fit_ols(dm, pen.zero_tol);
    case Method::LASSO: return fit_lasso(dm, pen);
    case Method::SCAD: return fit_scad(dm, pen);
  }
  throw ValidationError("unknown method");
}

std::vector<double> default_lambda_grid(const DesignMatrix& dm, std::size_t size, double ratio, bool standardize) {
  const double lm = lambda_max(make_problem(dm.X, dm.y, standardize));
  if (!(lm > 0.0)) throw ValidationError("response is uncorrelated with every term; lambda grid is empty");
  std::vector<double> grid(size);
  if (size == 1) {
    grid[0] = lm;
    return grid;
  }
  for (std::size_t i = 0; i < size; ++i) {
    grid[i] = lm * std::pow(ratio, static_cast<double>(i) / static_cast<double>(size - 1));
  }
  return grid;
}

std::vector<std::size_t> fold_assignment(std::size_t n, int folds, bool random, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (random) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i * k / n;
  return fold;
}

CvResult cross_validate(const DesignMatrix& dm, const PenaltySpec& pen) {
  pen.validate();
  if (pen.method == Method::OLS) throw ValidationError("cross-validation needs a penalized method");
  const std::size_t n = dm.rows();
  const auto k = static_cast<std::size_t>(pen.cv_folds);
  if (n < 2 * k) {
    throw ValidationError("cross-validation needs n >= 2*folds (n=" + std::to_string(n) +
                          ", folds=" + std::to_string(k) + ")");
  }
  CvResult cv;
  cv.grid = pen.lambda_grid.empty() ? default_lambda_grid(dm, pen.grid_size, pen.grid_ratio, pen.standardize)
                                    : pen.lambda_grid;
  const auto fold = fold_assignment(n, pen.cv_folds, pen.random_folds, pen.seed);

  std::vector<std::vector<double>> mse(k);
  std::vector<bool> skipped(k, false);
  std::vector<std::vector<std::string>> warn(k);
  std::vector<std::exception_ptr> errors(k);
  auto run_fold = [&](std::size_t f) {
    try {
      std::vector<Eigen::Index> tr, va;
      for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? va : tr).push_back(static_cast<Eigen::Index>(i));
      Eigen::VectorXd yv = dm.y_raw(va);
      if ((yv.array() - yv.mean()).abs().maxCoeff() == 0.0) {
        skipped[f] = true;
        warn[f].push_back("fold " + std::to_string(f) + " skipped: validation response has zero variance");
        return;
      }
      Eigen::MatrixXd Xt = dm.X_raw(tr, Eigen::all);
      Eigen::VectorXd yt = dm.y_raw(tr);
      Eigen::VectorXd xm = Eigen::VectorXd::Zero(Xt.cols());
      double ym = 0.0;
      if (dm.centered) {
        xm = Xt.colwise().mean().transpose();
        ym = yt.mean();
        Xt.rowwise() -= xm.transpose();
        yt.array() -= ym;
      }
      const Problem p = make_problem(Xt, yt, pen.standardize);
      PathResult r = fit_path(p, pen.method, pen, cv.grid);
      warn[f] = r.warnings;
      const Eigen::MatrixXd Xv = dm.X_raw(va, Eigen::all);
      for (const auto& b : r.betas) {
        const double b0 = ym - xm.dot(b);
        const Eigen::VectorXd e = (yv - Xv * b).array() - b0;
        mse[f].push_back(e.squaredNorm() / static_cast<double>(e.size()));
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < k; start += hw) {
    pool.clear();
    for (std::size_t f = start; f < std::min(k, start + hw); ++f) pool.emplace_back(run_fold, f);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  cv.curve.assign(cv.grid.size(), 0.0);
  std::size_t used = 0;
  for (std::size_t f = 0; f < k; ++f) {
    cv.warnings.insert(cv.warnings.end(), warn[f].begin(), warn[f].end());
    if (skipped[f]) continue;
    ++used;
    for (std::size_t i = 0; i < cv.grid.size(); ++i) cv.curve[i] += mse[f][i];
  }
  if (used == 0) throw ValidationError("every cross-validation fold has a constant response");
  for (double& c : cv.curve) c /= static_cast<double>(used);
  // Strict comparison over a descending grid breaks ties toward larger lambda.
  std::size_t best = 0;
  for (std::size_t i = 1; i < cv.curve.size(); ++i)
    if (cv.curve[i] < cv.curve[best]) best = i;
  cv.lambda = cv.grid[best];
  return cv;
}

SelectionMetrics compute_selection_metrics(const RegressionFit& fit, std::span<const double> truth, double zero_tol) {
  if (truth.size() != static_cast<std::size_t>(fit.beta.size())) {
    throw ValidationError("truth has " + std::to_string(truth.size()) + " coefficients, fit has " +
                          std::to_string(fit.beta.size()));
  }
  SelectionMetrics m;
  double ss = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double b = fit.beta(static_cast<Eigen::Index>(j));
    ss += (b - truth[j]) * (b - truth[j]);
    if (std::abs(b) <= zero_tol) {
      ++m.predicted_negatives;
      if (std::abs(truth[j]) <= zero_tol) ++m.true_negatives;
    }
  }
  m.coef_rmse = truth.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(truth.size()));
  if (m.predicted_negatives > 0) {
    m.npv = static_cast<double>(m.true_negatives) / static_cast<double>(m.predicted_negatives);
  }
  return m;
}

RegressionFit fit_mechanism_line(const features::RcdSeries& rcd_co, const features::RcdSeries& rcd_o2_sqrt,
                                 const PenaltySpec& pen) {
  if (rcd_co.values.size() != rcd_o2_sqrt.values.size()) {
    throw ValidationError("mechanism line: RCD series do not share one grid");
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < rcd_co.values.size(); ++k) {
    if (rcd_co.retained[k] && rcd_o2_sqrt.retained[k]) {
      x.push_back(rcd_o2_sqrt.values[k]);
      y.push_back(rcd_co.values[k]);
    }
  }
  if (x.size() < 50) {
    throw ValidationError("mechanism line needs at least 50 aligned points, found " + std::to_string(x.size()));
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd X(n, 2);
  X.col(0).setOnes();
  X.col(1) = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  TermDescriptor slope = TermDescriptor::make(TermKind::Custom, "sqrt(r_" + rcd_o2_sqrt.gas_id + "/C_" + rcd_o2_sqrt.gas_id + ")");
  slope.unit = "(m/s)^0.5";
  std::vector<TermDescriptor> terms{TermDescriptor::make(TermKind::Intercept, ""), slope};
  return fit(make_design(std::move(terms), std::move(X), std::move(Y), false), pen);
}

}  // namespace tapkin::regress
