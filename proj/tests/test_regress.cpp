#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "tapkin/error.hpp"
#include "tapkin/features.hpp"
#include "tapkin/reactor.hpp"
#include "tapkin/regress.hpp"

using namespace tapkin;
using namespace tapkin::regress;

namespace {

std::vector<TermDescriptor> named(std::size_t p) {
  std::vector<TermDescriptor> t(p);
  for (std::size_t j = 0; j < p; ++j) {
    t[j].kind = TermKind::Custom;
    t[j].name = "x" + std::to_string(j);
  }
  return t;
}

// Centered columns with X^T X / n = I.
Eigen::MatrixXd orthonormal_design(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd A(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) A(i, j) = N(rng);
  A = A.rowwise() - A.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  return Q * std::sqrt(static_cast<double>(n));
}

DesignMatrix random_problem(Eigen::Index n, std::uint64_t seed, const Eigen::VectorXd& beta, double noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = N(rng) + 0.3 * (j > 0 ? X(i, j - 1) : 0.0);
  Eigen::VectorXd y = X * beta;
  for (Eigen::Index i = 0; i < n; ++i) y(i) += 1.5 + noise * N(rng);
  return make_design(named(static_cast<std::size_t>(p)), X, y, true);
}

PenaltySpec fixed(Method m, double lambda) {
  PenaltySpec p;
  p.method = m;
  p.lambda = lambda;
  return p;
}

struct Case {
  std::vector<features::TransientFeatures> feats;
  DesignMatrix dm;
};

Case table_case(const std::string& preset, const std::string& terms) {
  const auto& p = reactor::preset(preset);
  const auto sim = reactor::simulate_pulse(p.config, p.mechanism);
  Case c;
  c.feats = features::extract_all(sim);
  c.dm = build_design_matrix(c.feats, parse_terms(terms, "A"), c.feats[0].rate);
  return c;
}

}  // namespace

TEST_CASE("term names, units and parsing") {
  const auto full = full_terms("A");
  REQUIRE(full.size() == 5);
  CHECK(full[0].name == "C_A");
  CHECK(full[1].name == "U_A");
  CHECK(full[2].name == "C_A*U_A");
  CHECK(full[3].name == "C_A*U_A^2");
  CHECK(full[4].name == "U_A^2");
  CHECK(full[0].unit == "m/s");
  CHECK(full[2].unit == "mol/s");
  const auto custom = parse_terms("custom:C,CU,U", "A");
  REQUIRE(custom.size() == 3);
  CHECK(custom[1].kind == TermKind::CU);
  CHECK_THROWS_AS(parse_terms("custom:C,XY", "A"), ValidationError);
  CHECK_THROWS_AS(parse_terms("custom:", "A"), ValidationError);
  CHECK_THROWS_AS(parse_terms("everything", "A"), ValidationError);
  CHECK(method_from_string("scad") == Method::SCAD);
  CHECK_THROWS_AS(method_from_string("ridge"), ValidationError);
}

TEST_CASE("design matrix columns and centering") {
  features::TransientFeatures f;
  f.gas_id = "A";
  for (int k = 0; k < 40; ++k) {
    f.t.push_back(0.1 * k);
    f.concentration.push_back(std::exp(-0.1 * k));
    f.uptake.push_back(1.0 - std::exp(-0.2 * k));
    f.rate.push_back(std::sin(0.3 * k));
  }
  const std::vector<features::TransientFeatures> set{f};
  const auto dm = build_design_matrix(set, full_terms("A"), f.rate);
  REQUIRE(dm.cols() == 5);
  for (std::size_t k = 0; k < 40; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    CHECK(dm.X_raw(i, 2) == f.concentration[k] * f.uptake[k]);
    CHECK(dm.X_raw(i, 3) == f.concentration[k] * f.uptake[k] * f.uptake[k]);
  }
  for (Eigen::Index j = 0; j < 5; ++j) CHECK(std::abs(dm.X.col(j).sum()) < 1e-12);
  CHECK(std::abs(dm.y.mean()) < 1e-12);

  auto zero = f;
  zero.uptake.assign(40, 0.0);
  const std::vector<features::TransientFeatures> zset{zero};
  CHECK_THROWS_AS(build_design_matrix(zset, full_terms("A"), f.rate), ValidationError);
  auto bad = f;
  bad.concentration[3] = std::nan("");
  const std::vector<features::TransientFeatures> bset{bad};
  CHECK_THROWS_AS(build_design_matrix(bset, full_terms("A"), f.rate), ValidationError);
}

TEST_CASE("reversible term set reproduces the simulated rate with the true coefficients") {
  const auto c = table_case("table2-case3", "custom:C,CU,U");
  const Eigen::Vector3d truth(0.2, -0.2, -40.0);
  const Eigen::VectorXd pred = c.dm.X_raw * truth;
  const double scale = c.dm.y_raw.cwiseAbs().maxCoeff();
  // The uptake column is a trapezoid integral, so agreement is at quadrature accuracy.
  CHECK((pred - c.dm.y_raw).cwiseAbs().maxCoeff() / scale < 5e-3);
}

TEST_CASE("OLS: orthonormal design, exact span and collinearity") {
  const auto X = orthonormal_design(200, 4, 7);
  Eigen::VectorXd y = X * Eigen::Vector4d(1.0, -2.0, 0.0, 0.5);
  y.array() += 3.0;
  const auto dm = make_design(named(4), X, y, true);
  const auto fit = fit_ols(dm);
  const Eigen::VectorXd z = dm.X.transpose() * dm.y / 200.0;
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(fit.beta(j) == doctest::Approx(z(j)).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(3.0));
  CHECK(fit.residual_rmse < 1e-12);

  Eigen::MatrixXd Xc(50, 3);
  for (int i = 0; i < 50; ++i) {
    Xc(i, 0) = i;
    Xc(i, 1) = std::sin(i);
    Xc(i, 2) = 2.0 * i;
  }
  const auto col = make_design(named(3), Xc, Eigen::VectorXd::LinSpaced(50, 0, 1), true);
  try {
    fit_ols(col);
    FAIL("collinear design accepted");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x0") != std::string::npos);
    CHECK(msg.find("x2") != std::string::npos);
  }
}

TEST_CASE("thresholding rules") {
  const double lam = 0.3, a = 3.7;
  CHECK(soft_threshold(1.0, lam) == doctest::Approx(0.7));
  CHECK(soft_threshold(-0.2, lam) == 0.0);
  CHECK(scad_threshold(0.0, lam, a) == 0.0);
  CHECK(scad_threshold(1.5 * lam, lam, a) == doctest::Approx(0.5 * lam));
  CHECK(scad_threshold(-1.5 * lam, lam, a) == doctest::Approx(-0.5 * lam));
  CHECK(scad_threshold(a * lam + 0.01, lam, a) == a * lam + 0.01);
  CHECK(scad_threshold(5.0, lam, a) == 5.0);
  for (double z = -2.0; z <= 2.0; z += 0.01) {
    CAPTURE(z);
    REQUIRE(scad_coordinate(z, 1.0, lam, a) == doctest::Approx(scad_threshold(z, lam, a)).epsilon(1e-12));
  }
  CHECK(scad_penalty(0.0, lam, a) == 0.0);
  CHECK(scad_penalty(10.0, lam, a) == doctest::Approx((a + 1.0) * lam * lam / 2.0));
}

TEST_CASE("orthonormal design: penalized fits match the closed forms") {
  const auto X = orthonormal_design(300, 6, 11);
  const Eigen::VectorXd beta = (Eigen::VectorXd(6) << 2.0, -1.2, 0.45, -0.15, 0.05, 0.0).finished();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 0.05);
  Eigen::VectorXd y = X * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += N(rng);
  const auto dm = make_design(named(6), X, y, true);
  const Eigen::VectorXd z = dm.X.transpose() * dm.y / 300.0;
  for (double lam : {0.02, 0.1, 0.3, 0.7}) {
    CAPTURE(lam);
    const auto lasso = fit_lasso(dm, fixed(Method::LASSO, lam));
    const auto scad = fit_scad(dm, fixed(Method::SCAD, lam));
    for (Eigen::Index j = 0; j < 6; ++j) {
      CHECK(std::abs(lasso.beta(j) - soft_threshold(z(j), lam)) < 1e-10);
      CHECK(std::abs(scad.beta(j) - scad_threshold(z(j), lam, 3.7)) < 1e-10);
    }
  }
}

TEST_CASE("LASSO satisfies the KKT conditions") {
  const auto dm = random_problem(400, 5, (Eigen::VectorXd(6) << 1.0, 0.0, -0.7, 0.0, 0.2, 0.05).finished());
  for (double lam : {0.01, 0.05, 0.2}) {
    const auto fit = fit_lasso(dm, fixed(Method::LASSO, lam));
    const Eigen::VectorXd g = dm.X.transpose() * (dm.y - dm.X * fit.beta) / static_cast<double>(dm.rows());
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      CAPTURE(lam);
      CAPTURE(j);
      if (fit.beta(j) != 0.0) {
        CHECK(std::abs(g(j) - lam * (fit.beta(j) > 0 ? 1.0 : -1.0)) < 1e-6);
      } else {
        CHECK(std::abs(g(j)) <= lam + 1e-6);
      }
    }
  }
}

TEST_CASE("lambda = 0 reproduces OLS") {
  const auto dm = random_problem(300, 9, (Eigen::VectorXd(5) << 0.8, -0.4, 0.0, 1.3, -0.1).finished());
  const auto ols = fit_ols(dm);
  const auto lasso = fit_lasso(dm, fixed(Method::LASSO, 0.0));
  const auto scad = fit_scad(dm, fixed(Method::SCAD, 0.0));
  for (Eigen::Index j = 0; j < 5; ++j) {
    CHECK(std::abs(lasso.beta(j) - ols.beta(j)) < 1e-8);
    CHECK(std::abs(scad.beta(j) - ols.beta(j)) < 1e-8);
  }
  CHECK(std::abs(scad.intercept - ols.intercept) < 1e-8);
}

TEST_CASE("column permutation permutes the coefficients") {
  const auto dm = random_problem(300, 21, (Eigen::VectorXd(5) << 0.8, 0.0, -0.6, 0.0, 0.3).finished());
  const std::vector<Eigen::Index> perm{3, 0, 4, 1, 2};
  Eigen::MatrixXd Xp(dm.X_raw.rows(), 5);
  for (Eigen::Index j = 0; j < 5; ++j) Xp.col(j) = dm.X_raw.col(perm[static_cast<std::size_t>(j)]);
  const auto dmp = make_design(named(5), Xp, dm.y_raw, true);
  for (Method m : {Method::LASSO, Method::SCAD}) {
    const auto a = fit(dm, fixed(m, 0.05));
    const auto b = fit(dmp, fixed(m, 0.05));
    for (Eigen::Index j = 0; j < 5; ++j) CHECK(b.beta(j) == doctest::Approx(a.beta(perm[static_cast<std::size_t>(j)])).epsilon(1e-7));
  }
}

TEST_CASE("cross-validation contract") {
  const auto dm = random_problem(200, 4, (Eigen::VectorXd(4) << 1.0, 0.0, 0.5, 0.0).finished(), 0.3);
  PenaltySpec p;
  p.method = Method::SCAD;

  p.lambda_grid = {0.05};
  CHECK(cross_validate(dm, p).lambda == 0.05);

  p.lambda_grid.clear();
  p.random_folds = true;
  p.seed = 42;
  const auto a = cross_validate(dm, p);
  const auto b = cross_validate(dm, p);
  CHECK(a.lambda == b.lambda);
  CHECK(a.curve == b.curve);
  CHECK(a.grid.size() == 50);
  CHECK(a.curve.size() == a.grid.size());
  CHECK(fold_assignment(100, 10, true, 42) == fold_assignment(100, 10, true, 42));

  const auto contiguous = fold_assignment(20, 4, false, 0);
  CHECK(contiguous == std::vector<std::size_t>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3});

  const auto grid = default_lambda_grid(dm, 50, 1e-4);
  CHECK(grid.front() > grid.back());
  CHECK(grid.back() == doctest::Approx(grid.front() * 1e-4));
  const auto at_max = fit_lasso(dm, fixed(Method::LASSO, grid.front()));
  CHECK(at_max.beta.cwiseAbs().maxCoeff() == 0.0);

  PenaltySpec too_many;
  too_many.cv_folds = 150;
  CHECK_THROWS_AS(cross_validate(dm, too_many), ValidationError);
  PenaltySpec bad_a;
  bad_a.a = 2.0;
  CHECK_THROWS_AS(bad_a.validate(), ValidationError);
}

TEST_CASE("selection metrics") {
  RegressionFit f;
  f.beta = Eigen::Vector3d(0.2, 0.0, -0.2);
  const std::vector<double> truth{0.2, 0.0, -0.2};
  auto m = compute_selection_metrics(f, truth);
  REQUIRE(m.npv);
  CHECK(*m.npv == 1.0);
  CHECK(m.coef_rmse == 0.0);
  f.beta = Eigen::Vector3d(0.2, 0.01, -0.2);
  m = compute_selection_metrics(f, truth);
  CHECK_FALSE(m.npv.has_value());
  f.beta = Eigen::Vector3d(0.0, 0.0, -0.2);
  m = compute_selection_metrics(f, truth);
  CHECK(*m.npv == 0.5);
}

TEST_CASE("SCAD with cross-validation on n = 5000, p = 5 finishes within 5 s") {
  const auto dm = random_problem(5000, 77, (Eigen::VectorXd(5) << 1.0, 0.0, -0.5, 0.0, 0.25).finished(), 0.2);
  PenaltySpec p;
  p.method = Method::SCAD;
  const auto t0 = std::chrono::steady_clock::now();
  const auto fit = regress::fit(dm, p);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
  CHECK(fit.selected == std::vector<bool>{true, false, true, false, true});
}

TEST_CASE("simulated adsorption cases") {
  PenaltySpec scad;
  scad.method = Method::SCAD;

  SUBCASE("abundant sites: only the concentration term survives") {
    const auto c = table_case("table2-case1", "full");
    const auto fit = regress::fit(c.dm, scad);
    CHECK(fit.selected == std::vector<bool>{true, false, false, false, false});
    CHECK(fit.beta(0) == doctest::Approx(0.2).epsilon(1e-4));
    const auto ols = fit_ols(c.dm);
    CHECK(ols.beta(0) == doctest::Approx(0.2).epsilon(1e-3));
  }
  SUBCASE("limited sites: C and CU") {
    const auto c = table_case("table2-case2a", "full");
    const auto fit = regress::fit(c.dm, scad);
    CHECK(fit.selected == std::vector<bool>{true, false, true, false, false});
    const std::vector<double> truth{0.2, 0.0, -0.2, 0.0, 0.0};
    const auto m = compute_selection_metrics(fit, truth);
    REQUIRE(m.npv);
    CHECK(*m.npv == 1.0);
    CHECK(m.coef_rmse < 1e-3);
  }
  SUBCASE("fewer sites: LASSO still excludes only true zeros") {
    const auto c = table_case("table2-case2b", "full");
    PenaltySpec lasso;
    lasso.method = Method::LASSO;
    const auto fit = regress::fit(c.dm, lasso);
    const std::vector<double> truth{0.2, 0.0, -0.5, 0.0, 0.0};
    const auto m = compute_selection_metrics(fit, truth);
    REQUIRE(m.npv);
    CHECK(*m.npv == 1.0);
  }
  SUBCASE("reversible adsorption on its own term set") {
    const auto c = table_case("table2-case3", "custom:C,CU,U");
    const auto fit = regress::fit(c.dm, scad);
    CHECK(fit.selected == std::vector<bool>{true, true, true});
    CHECK(fit.beta(0) == doctest::Approx(0.2).epsilon(1e-2));
    CHECK(fit.beta(1) == doctest::Approx(-0.2).epsilon(2e-2));
    CHECK(fit.beta(2) == doctest::Approx(-40.0).epsilon(1e-2));
  }
}

TEST_CASE("mechanism line: y = c x recovers c under lambda = 0") {
  features::RcdSeries co, o2;
  for (int k = 0; k < 80; ++k) {
    const double x = 0.1 + 0.01 * k;
    o2.values.push_back(x);
    co.values.push_back(1.7 * x);
    o2.retained.push_back(true);
    co.retained.push_back(true);
  }
  PenaltySpec p = fixed(Method::SCAD, 0.0);
  const auto fit = fit_mechanism_line(co, o2, p);
  CHECK(fit.beta(1) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(std::abs(fit.beta(0)) < 1e-12);
}
