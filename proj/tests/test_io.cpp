#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tapkin/error.hpp"
#include "tapkin/io.hpp"

using namespace tapkin;
using namespace tapkin::io;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "tapkin_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

FluxTable flat_table(std::size_t n, double value) {
  FluxTable t;
  for (std::size_t k = 0; k < n; ++k) t.t.push_back(0.01 * static_cast<double>(k));
  t.gases = {"A"};
  t.flux = {std::vector<double>(n, value)};
  t.calibration.resize(1);
  return t;
}

bool same_to_12_digits(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 5e-12 * std::max(std::abs(a), std::abs(b)) + 1e-300;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(round12(2.0 / 3.0) == 0.666666666667);
}

TEST_CASE("preprocessing: identity, constant column, recovered true flux") {
  SUBCASE("mu = 1 and zero baseline leave the data untouched") {
    auto t = flat_table(100, 0.0);
    for (std::size_t k = 50; k < 100; ++k) t.flux[0][k] = std::sin(0.1 * static_cast<double>(k));
    const auto r = preprocess_flux(t);
    CHECK(r.table.flux == t.flux);
    CHECK(r.corrections[0].baseline == 0.0);
    CHECK(r.warnings.empty());
  }
  SUBCASE("a constant column with mu = 2 becomes zero") {
    auto t = flat_table(100, 3.25);
    t.calibration[0].mu = 2.0;
    const auto r = preprocess_flux(t);
    for (double v : r.table.flux[0]) CHECK(v == 0.0);
    CHECK(r.corrections[0].baseline_samples == 5);
    CHECK(r.warnings.size() == 1);
  }
  SUBCASE("instrument units are mapped back to the true flux") {
    reactor::ReactorConfig cfg;
    FluxTable t;
    for (int k = 0; k <= 3500; ++k) t.t.push_back(-0.5 + 0.001 * k);
    const auto truth = reactor::standard_diffusion_curve(t.t, cfg);
    const double mu = 0.037, b = 4.2;
    t.gases = {"A"};
    t.flux.resize(1);
    for (double v : truth) t.flux[0].push_back(v / mu + b);
    t.calibration = {CalibrationSpec{mu, -0.5, -0.01}};
    const auto r = preprocess_flux(t);
    double worst = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) worst = std::max(worst, std::abs(r.table.flux[0][k] - truth[k]));
    CHECK(worst < 1e-10);
    CHECK(r.warnings.empty());
    CHECK(r.corrections[0].mu == mu);
  }
  SUBCASE("invalid calibration") {
    auto t = flat_table(100, 1.0);
    t.calibration[0].mu = 0.0;
    CHECK_THROWS_AS(preprocess_flux(t), ValidationError);
    t.calibration[0].mu = 1.0;
    t.calibration[0].baseline_start = 0.5;
    t.calibration[0].baseline_end = 0.4;
    CHECK_THROWS_AS(preprocess_flux(t), ValidationError);
    t.calibration[0].baseline_start = 0.5;
    t.calibration[0].baseline_end = 5.0;
    CHECK_THROWS_AS(preprocess_flux(t), ValidationError);
  }
}

TEST_CASE("flux CSV with calibration sidecar") {
  const auto dir = scratch_dir();
  const auto path = (dir / "flux.csv").string();
  {
    std::ofstream out(path);
    out << "# exported\ntime_s,O2,CO\n";
    for (int k = 0; k < 40; ++k) out << 0.05 * k << ',' << (k < 10 ? 1.0 : 5.0) << ',' << 2.0 * k << '\n';
  }
  {
    std::ofstream out(path + ".calib");
    out << "O2,mu=0.5,baseline_start=0,baseline_end=0.4\n";
  }
  const auto table = load_flux_csv(path);
  CHECK(table.gases == std::vector<std::string>{"O2", "CO"});
  CHECK(table.calibration[0].mu == 0.5);
  CHECK(*table.calibration[0].baseline_end == 0.4);
  CHECK(table.calibration[1].mu == 1.0);
  const auto r = preprocess_flux(table);
  CHECK(r.table.flux[0][20] == doctest::Approx(2.0));

  {
    std::ofstream out(path + ".calib");
    out << "N2,mu=1\n";
  }
  CHECK_THROWS_AS(load_flux_csv(path), ValidationError);
  {
    std::ofstream out(path + ".calib");
    out << "O2,gain=1\n";
  }
  CHECK_THROWS_AS(load_flux_csv(path), ValidationError);
  std::filesystem::remove(path + ".calib");

  std::istringstream non_monotone("time_s,A\n0,1\n0.1,1\n0.05,1\n");
  CHECK_THROWS_AS(read_flux_csv(non_monotone), ValidationError);
  std::istringstream ragged("time_s,A\n0,1\n0.1\n");
  CHECK_THROWS_AS(read_flux_csv(ragged), ValidationError);
  CHECK_THROWS_AS(load_flux_csv((dir / "missing.csv").string()), IoError);
}

TEST_CASE("features CSV round trip keeps 12 significant digits") {
  const auto& p = reactor::preset("er-co");
  const auto sim = reactor::simulate_pulse(p.config, p.mechanism);
  const auto set = features::extract_all(sim);
  Provenance prov;
  prov.seed = 17;
  prov.config = {{"preset", "er-co"}};
  std::ostringstream os;
  write_features_csv(os, set, prov);
  const std::string text = os.str();
  CHECK(text.rfind("# tapkin ", 0) == 0);
  CHECK(text.find("# seed: 17") != std::string::npos);
  CHECK(text.find("\"preset\":\"er-co\"") != std::string::npos);

  std::istringstream in(text);
  const auto back = features::ingest_features(in);
  REQUIRE(back.size() == set.size());
  for (std::size_t g = 0; g < set.size(); ++g) {
    CHECK(back[g].gas_id == set[g].gas_id);
    for (std::size_t k = 0; k < set[g].size(); ++k) {
      REQUIRE(same_to_12_digits(back[g].rate[k], set[g].rate[k]));
      REQUIRE(same_to_12_digits(back[g].concentration[k], set[g].concentration[k]));
      REQUIRE(same_to_12_digits(back[g].uptake[k], set[g].uptake[k]));
    }
  }
  std::ostringstream again;
  write_features_csv(again, set, prov);
  CHECK(again.str() == text);
}

TEST_CASE("grid CSV round trip") {
  mechanism::CorrelationGrid g;
  g.kind = mechanism::SweepKind::LhReversible;
  g.axis1_name = "k_CO_fwd";
  g.axis2_name = "k_CO_rev";
  g.axis1 = {0.04, 0.06};
  g.axis2 = {0.0, 0.5, 1.0};
  g.pairs = {"corr_O2_CO2", "corr_CO_CO2"};
  g.cells = {{-0.1, -0.2, std::nan(""), 0.4, 1.0 / 3.0, -0.6}, {0.1, 0.2, std::nan(""), -0.4, 2.0 / 3.0, 0.6}};
  g.invalid = 1;
  std::ostringstream os;
  write_grid_csv(os, g, Provenance{});
  CHECK(os.str().find("k_axis1,k_axis2,corr_O2_CO2,corr_CO_CO2\n") != std::string::npos);
  CHECK(os.str().find("0.04,1,nan,nan\n") != std::string::npos);
  std::istringstream in(os.str());
  const auto back = read_grid_csv(in);
  CHECK(back.kind == g.kind);
  CHECK(back.axis1 == g.axis1);
  CHECK(back.axis2 == g.axis2);
  CHECK(back.axis1_name == "k_CO_fwd");
  CHECK(back.invalid == 1);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t c = 0; c < 6; ++c) CHECK(same_to_12_digits(back.cells[p][c], g.cells[p][c]));
}

TEST_CASE("configuration JSON") {
  reactor::ReactorConfig c;
  apply_json(json{{"t_end", 2.0}, {"n_cells", 100}}, c);
  CHECK(c.t_end == 2.0);
  CHECK(c.thin_zone() == 50);
  CHECK_THROWS_AS(apply_json(json{{"lenght", 2.0}}, c), ValidationError);
  CHECK_THROWS_AS(apply_json(json{{"t_end", "long"}}, c), ValidationError);

  reactor::MechanismSpec m = reactor::preset("lh-rev-co").mechanism;
  reactor::MechanismSpec m2;
  apply_json(to_json(m), m2);
  CHECK(to_json(m2) == to_json(m));

  regress::PenaltySpec p;
  apply_json(json{{"method", "lasso"}, {"lambda", 0.1}, {"random_folds", true}}, p);
  CHECK(p.method == regress::Method::LASSO);
  CHECK(*p.lambda == 0.1);
  regress::PenaltySpec p2;
  apply_json(to_json(p), p2);
  CHECK(to_json(p2) == to_json(p));
  CHECK_THROWS_AS(apply_json(json{{"method", "ridge"}}, p), ValidationError);
  CHECK_THROWS_AS(parse_json("{not json", "x"), ValidationError);
}

TEST_CASE("fit report") {
  regress::RegressionFit f;
  f.method = regress::Method::SCAD;
  f.terms = {"C_A", "U_A"};
  f.beta = Eigen::Vector2d(0.2 + 1e-15, 0.0);
  f.selected = {true, false};
  f.lambda_grid = {1.0, 0.1};
  f.cv_curve = {2.0, std::nan("")};
  regress::SelectionMetrics m;
  m.npv = 1.0;
  Provenance prov;
  prov.seed = 5;
  const auto r = fit_report(f, m, prov);
  CHECK(r["coefficients"][0]["beta"].get<double>() == 0.2);
  CHECK(r["cv_mse"][1].is_null());
  CHECK(r["selection"]["npv"].get<double>() == 1.0);
  CHECK(r["seed"].get<int>() == 5);
  CHECK(dump_report(r) == dump_report(fit_report(f, m, prov)));
}

TEST_CASE("atomic file writes") {
  const auto path = (scratch_dir() / "out.txt").string();
  write_text_file(path, "abc");
  CHECK(read_text_file(path) == "abc");
  CHECK_THROWS_AS(write_text_file((scratch_dir() / "no" / "such" / "dir.txt").string(), "x"), IoError);
  CHECK_THROWS_AS(read_text_file((scratch_dir() / "absent.txt").string()), IoError);
}
