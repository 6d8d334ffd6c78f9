#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "tapkin/error.hpp"
#include "tapkin/features.hpp"
#include "tapkin/reactor.hpp"

using namespace tapkin;
using namespace tapkin::features;

namespace {

const reactor::SimulationResult& sim_of(const std::string& name) {
  static std::map<std::string, reactor::SimulationResult> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    const auto& p = reactor::preset(name);
    it = cache.emplace(name, reactor::simulate_pulse(p.config, p.mechanism)).first;
  }
  return it->second;
}

std::string csv_of(const std::vector<std::string>& rows) {
  std::string s;
  for (const auto& r : rows) s += r + "\n";
  return s;
}

std::vector<std::string> good_rows(std::size_t n) {
  std::vector<std::string> rows{"# comment", "time_s,r_A,C_A,U_A"};
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 0.01 * static_cast<double>(k);
    rows.push_back(std::to_string(t) + "," + std::to_string(1.0 + t) + ",2.0," + std::to_string(t * t));
  }
  return rows;
}

std::string ingest_error(const std::vector<std::string>& rows) {
  std::istringstream in(csv_of(rows));
  try {
    ingest_features(in);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("uptake is the cumulative trapezoid of the signed stoichiometric sum") {
  std::vector<double> t, r1, r2;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.01 * k);
    r1.push_back(3.0 * t.back());
    r2.push_back(1.0);
  }
  const std::vector<std::vector<double>> rates{r1, r2};
  const std::vector<double> nu{2.0, -1.0};
  const auto u = compute_uptake(rates, nu, t);
  CHECK(u[0] == 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(u[k] == doctest::Approx(3.0 * t[k] * t[k] - t[k]).epsilon(1e-12));

  const std::vector<std::vector<double>> zero{std::vector<double>(t.size(), 0.0)};
  const std::vector<double> one{1.0};
  for (double v : compute_uptake(zero, one, t)) CHECK(v == 0.0);
  CHECK_THROWS_AS(compute_uptake(zero, nu, t), ValidationError);
}

TEST_CASE("single irreversible adsorption: final uptake closes the mass balance") {
  const auto& sim = sim_of("table2-case2a");
  const auto f = extract_thin_zone_features(sim, "A");
  const auto& g = sim.gas("A");
  const double expected = sim.config.pulse_moles - g.moles_out - g.moles_in_gas;
  CHECK(f.uptake.back() == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("LH oxygen uptake follows the simulator's surface oxygen") {
  const auto& sim = sim_of("lh-co");
  const auto f = extract_thin_zone_features(sim, "O2");
  const auto& u_o = sim.surface("O*").coverage;
  double scale = 0.0;
  for (double v : u_o) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t k = 0; k < u_o.size(); ++k) worst = std::max(worst, std::abs(f.uptake[k] - u_o[k]));
  CHECK(worst / scale < 1e-3);
}

TEST_CASE("every gas's uptake equals compute_uptake on its own rates") {
  const auto& sim = sim_of("er-co");
  for (const auto& f : extract_all(sim)) {
    CAPTURE(f.gas_id);
    std::vector<std::vector<double>> rates;
    std::vector<double> nu;
    for (const auto& term : f.stoichiometry) {
      rates.push_back(sim.gas(term.gas).rate);
      nu.push_back(term.nu);
    }
    CHECK(compute_uptake(rates, nu, f.t) == f.uptake);
    CHECK(f.t.size() == f.rate.size());
    CHECK(f.uptake[0] == 0.0);
  }
}

TEST_CASE("inert gas has zero rate and uptake") {
  const auto f = extract_thin_zone_features(sim_of("inert"), "A");
  for (std::size_t k = 0; k < f.size(); ++k) {
    REQUIRE(f.rate[k] == 0.0);
    REQUIRE(f.uptake[k] == 0.0);
  }
}

TEST_CASE("rate-concentration dependency series") {
  TransientFeatures f;
  f.gas_id = "X";
  f.t = {0.0, 1.0, 2.0, 3.0};
  f.rate = {0.5, -1.0, 4.0, 9.0};
  f.concentration = {1.0, 1.0, 1.0, 1.0};
  f.uptake.assign(4, 0.0);

  SUBCASE("product values are the rate itself") {
    const auto s = compute_rcd(f, RcdRole::Product, RcdTransform::Identity);
    CHECK(s.values == f.rate);
    CHECK(s.masked == 0);
    CHECK_THROWS_AS(compute_rcd(f, RcdRole::Product, RcdTransform::Sqrt), ValidationError);
  }
  SUBCASE("unit concentration leaves the rate unchanged") {
    CHECK(compute_rcd(f, RcdRole::Reactant, RcdTransform::Identity).values == f.rate);
  }
  SUBCASE("sqrt clips negative quotients") {
    const auto s = compute_rcd(f, RcdRole::Reactant, RcdTransform::Sqrt);
    CHECK(s.clipped == 1);
    CHECK(s.values[1] == 0.0);
    CHECK(s.values[2] == 2.0);
  }
  SUBCASE("points under the floor are masked") {
    f.concentration = {1e-9, 1.0, 0.0, 2.0};
    const auto s = compute_rcd(f, RcdRole::Reactant, RcdTransform::Identity);
    CHECK(s.masked == 2);
    CHECK(std::isnan(s.values[0]));
    CHECK_FALSE(s.retained[2]);
    CHECK(s.values[3] == 4.5);
    CHECK(s.retained_count() == 2);
  }
  SUBCASE("everything masked is an error") {
    f.concentration.assign(4, 0.0);
    CHECK_THROWS_AS(compute_rcd(f, RcdRole::Reactant, RcdTransform::Identity), ValidationError);
  }
}

TEST_CASE("squared O2 dependency times C gives the rate back on LH data") {
  const auto f = extract_thin_zone_features(sim_of("lh-co"), "O2");
  const auto s = compute_rcd(f, RcdRole::Reactant, RcdTransform::Sqrt);
  CHECK(s.clipped == 0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!s.retained[k]) continue;
    REQUIRE(s.values[k] * s.values[k] * f.concentration[k] == doctest::Approx(f.rate[k]).epsilon(1e-12));
  }
}

TEST_CASE("features CSV ingestion") {
  SUBCASE("well-formed file") {
    std::istringstream in(csv_of(good_rows(20)));
    IngestReport rep;
    const auto set = ingest_features(in, &rep);
    REQUIRE(set.size() == 1);
    CHECK(set[0].gas_id == "A");
    CHECK(set[0].size() == 20);
    CHECK(rep.interpolated == 0);
    CHECK(set[0].rate[3] == doctest::Approx(1.03));
  }
  SUBCASE("short NaN runs are interpolated") {
    auto rows = good_rows(20);
    for (int k = 5; k < 10; ++k) rows[static_cast<std::size_t>(2 + k)] = std::to_string(0.01 * k) + ",nan,2.0,";
    std::istringstream in(csv_of(rows));
    IngestReport rep;
    const auto set = ingest_features(in, &rep);
    CHECK(rep.interpolated == 10);
    CHECK(set[0].rate[7] == doctest::Approx(1.07).epsilon(1e-9));
    CHECK(set[0].uptake[7] == doctest::Approx((0.04 * 0.04) + (0.10 * 0.10 - 0.04 * 0.04) * 3.0 / 6.0).epsilon(1e-9));
  }
  SUBCASE("long NaN runs are rejected") {
    auto rows = good_rows(20);
    for (int k = 5; k < 11; ++k) rows[static_cast<std::size_t>(2 + k)] = std::to_string(0.01 * k) + ",nan,2.0,0";
    const auto msg = ingest_error(rows);
    CHECK(msg.find("r_A") != std::string::npos);
    CHECK(msg.find("exceeds 5") != std::string::npos);
  }
  SUBCASE("schema violations name the column or row") {
    CHECK(ingest_error({}).find("empty") != std::string::npos);
    CHECK(ingest_error({"t,r_A,C_A,U_A", "0,1,1,0"}).find("time_s") != std::string::npos);
    CHECK(ingest_error({"time_s,r_A,C_B,U_A", "0,1,1,0"}).find("C_A") != std::string::npos);
    CHECK(ingest_error({"time_s,r_A,C_A", "0,1,1"}).find("triples") != std::string::npos);
    auto rows = good_rows(10);
    rows[5] = "0.03,1,2";
    CHECK(ingest_error(rows).find("line 6") != std::string::npos);
    rows = good_rows(10);
    rows[5] = "0.03,abc,2,0";
    CHECK(ingest_error(rows).find("'r_A'") != std::string::npos);
  }
  SUBCASE("grids must be uniform and increasing") {
    auto rows = good_rows(10);
    rows[6] = "0.041,1,2,0";
    CHECK(ingest_error(rows).find("non-uniform") != std::string::npos);
    rows = good_rows(10);
    rows[6] = "0.02,1,2,0";
    CHECK(ingest_error(rows).find("strictly increasing") != std::string::npos);
  }
}

TEST_CASE("uniform-grid check tolerates relative jitter below 1e-9") {
  std::vector<double> t;
  for (int k = 0; k < 100; ++k) t.push_back(1000.0 + 0.5 * k);
  t[40] += 1e-8;
  CHECK_NOTHROW(check_uniform_grid(t, "t"));
  t[40] += 1e-3;
  CHECK_THROWS_AS(check_uniform_grid(t, "t"), ValidationError);
}
