#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "tapkin/error.hpp"
#include "tapkin/reactor.hpp"

using namespace tapkin;
using namespace tapkin::reactor;

namespace {

// Image-sum form of the inert outlet flux; converges fast where the cosine
// series converges slowly, so the two check each other.
double image_flux(double tau) {
  if (tau <= 0.0) return 0.0;
  const double pi = std::numbers::pi;
  double sum = 0.0;
  for (int n = 0; n < 60; ++n) {
    const double m = 2.0 * n + 1.0;
    sum += (n % 2 ? -1.0 : 1.0) * m * std::exp(-m * m / (4.0 * tau));
  }
  return sum / (std::sqrt(pi) * std::pow(tau, 1.5));
}

double trapezoid(const std::vector<double>& y, double dt) {
  double s = 0.0;
  for (std::size_t k = 1; k < y.size(); ++k) s += 0.5 * dt * (y[k] + y[k - 1]);
  return s;
}

double l2_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += b[k] * b[k];
  }
  return std::sqrt(num / den);
}

const SimulationResult& inert() {
  static const SimulationResult sim = simulate_pulse(preset("inert").config, preset("inert").mechanism);
  return sim;
}

}  // namespace

TEST_CASE("analytic curve agrees with the image-sum oracle") {
  ReactorConfig c;
  std::vector<double> t;
  for (double tau : {0.02, 0.05, 0.1, 1.0 / 6.0, 0.3, 0.5, 1.0, 1.4}) t.push_back(tau * c.porosity / c.diffusivity);
  const auto f = standard_diffusion_curve(t, c);
  const double scale = c.pulse_moles * c.diffusivity / (c.porosity * c.length * c.length);
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(f[k] == doctest::Approx(scale * image_flux(dimensionless_time(t[k], c))).epsilon(1e-9));
  }
}

TEST_CASE("analytic curve: peak, integral and tail") {
  ReactorConfig c;
  c.t_end = 20.0;
  std::vector<double> t;
  for (double x = 0.0; x <= c.t_end + 1e-12; x += 1e-4) t.push_back(x);
  const auto f = standard_diffusion_curve(t, c);
  const auto peak = std::max_element(f.begin(), f.end());
  const double t_peak = t[static_cast<std::size_t>(peak - f.begin())];
  CHECK(dimensionless_time(t_peak, c) == doctest::Approx(0.1666421).epsilon(1e-3));
  // Dimensionless peak height; the scale is pulse * D / (eps * L^2).
  CHECK(*peak / 2.0 == doctest::Approx(1.850129884).epsilon(1e-7));
  CHECK(trapezoid(f, 1e-4) == doctest::Approx(1.0).epsilon(1e-6));
  for (auto it = peak + 1; it != f.end(); ++it) REQUIRE(*it <= *(it - 1));
  CHECK(standard_diffusion_curve(std::vector<double>{0.0, -1.0}, c) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("inert simulation reproduces the standard diffusion curve") {
  const auto& sim = inert();
  const auto& flux = sim.gas("A").outlet_flux;
  const auto ref = standard_diffusion_curve(sim.t, sim.config);
  CHECK(sim.t.size() == 3001);
  CHECK(l2_rel(flux, ref) < 0.01);
  const auto peak = std::max_element(flux.begin(), flux.end()) - flux.begin();
  CHECK(dimensionless_time(sim.t[static_cast<std::size_t>(peak)], sim.config) == doctest::Approx(1.0 / 6.0).epsilon(0.02));
  CHECK(sim.gas("A").moles_out + sim.gas("A").moles_in_gas == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(trapezoid(flux, sim.config.dt_out) == doctest::Approx(1.0).epsilon(0.005));
  for (double v : flux) REQUIRE(v >= -1e-10);
}

TEST_CASE("doubling n_cells changes the outlet flux norm by less than 1%") {
  auto c = preset("inert").config;
  c.n_cells = 400;
  c.catalyst_cell.reset();
  const auto fine = simulate_pulse(c, preset("inert").mechanism);
  double a = 0.0, b = 0.0;
  for (double v : inert().gas("A").outlet_flux) a += v * v;
  for (double v : fine.gas("A").outlet_flux) b += v * v;
  CHECK(std::abs(std::sqrt(a) - std::sqrt(b)) / std::sqrt(b) < 0.01);
}

TEST_CASE("zero rate constants reduce every kind to the inert response") {
  const auto& ref = inert().gas("A").outlet_flux;
  const double peak = *std::max_element(ref.begin(), ref.end());
  for (auto kind : {MechanismKind::IrreversibleAbundant, MechanismKind::IrreversibleLimited, MechanismKind::Reversible,
                    MechanismKind::EleyRideal, MechanismKind::LangmuirHinshelwood}) {
    MechanismSpec m;
    m.kind = kind;
    const auto sim = simulate_pulse(ReactorConfig{}, m);
    CAPTURE(to_string(kind));
    for (const auto& g : sim.gases) {
      if (!g.pulsed) {
        for (double v : g.outlet_flux) REQUIRE(std::abs(v) < 1e-12);
        continue;
      }
      double worst = 0.0;
      for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(g.outlet_flux[k] - ref[k]));
      CHECK(worst < 1e-6 * peak);
    }
  }
}

TEST_CASE("every preset conserves mass") {
  for (const auto& p : presets()) {
    CAPTURE(p.name);
    const auto sim = simulate_pulse(p.config, p.mechanism);
    CHECK(sim.mass_balance_defect <= 1e-4);
    CHECK(sim.t.size() == static_cast<std::size_t>(std::floor(p.config.t_end / p.config.dt_out)) + 1);
    for (const auto& g : sim.gases) {
      for (double v : g.outlet_flux) REQUIRE(v >= -1e-9);
    }
  }
}

TEST_CASE("irreversible uptake is monotone and bounded by the site count") {
  for (const char* name : {"table2-case2a", "table2-case2b", "er-co"}) {
    CAPTURE(name);
    const auto& p = preset(name);
    const auto sim = simulate_pulse(p.config, p.mechanism);
    for (const auto& s : sim.surfaces) {
      for (std::size_t k = 1; k < s.coverage.size(); ++k) REQUIRE(s.coverage[k] >= s.coverage[k - 1] - 1e-10);
      CHECK(s.coverage.back() <= p.mechanism.n_sites + 1e-8);
    }
  }
}

TEST_CASE("reversible adsorption against a fine reference solve") {
  const auto& p = preset("table2-case3");
  const auto sim = simulate_pulse(p.config, p.mechanism);
  auto fine_cfg = p.config;
  fine_cfg.n_cells *= 4;
  fine_cfg.catalyst_cell.reset();
  fine_cfg.rtol = 1e-10;
  const auto fine = simulate_pulse(fine_cfg, p.mechanism);

  const double m0 = trapezoid(sim.gas("A").outlet_flux, p.config.dt_out);
  const double m0_fine = trapezoid(fine.gas("A").outlet_flux, p.config.dt_out);
  CHECK(m0 < 1.0);
  CHECK(m0 == doctest::Approx(m0_fine).epsilon(0.01));

  const auto& u = sim.surface("A*").coverage;
  for (double v : u) REQUIRE(v >= -1e-12);
  const auto top = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
  for (std::size_t k = 1; k <= top; ++k) REQUIRE(u[k] >= u[k - 1] - 1e-12);
  for (std::size_t k = top + 1; k < u.size(); ++k) REQUIRE(u[k] <= u[k - 1] + 1e-12);
  const auto& uf = fine.surface("A*").coverage;
  CHECK(u[top] == doctest::Approx(*std::max_element(uf.begin(), uf.end())).epsilon(0.02));

  // Adsorption first, desorption later: the rate changes sign.
  const auto& r = sim.gas("A").rate;
  CHECK(*std::max_element(r.begin(), r.end()) > 0.0);
  CHECK(*std::min_element(r.begin(), r.end()) < 0.0);
}

TEST_CASE("identical inputs give bit-identical results") {
  const auto& p = preset("lh-co");
  const auto a = simulate_pulse(p.config, p.mechanism);
  const auto b = simulate_pulse(p.config, p.mechanism);
  for (std::size_t g = 0; g < a.gases.size(); ++g) {
    CHECK(a.gases[g].outlet_flux == b.gases[g].outlet_flux);
    CHECK(a.gases[g].rate == b.gases[g].rate);
    CHECK(a.gases[g].concentration == b.gases[g].concentration);
  }
}

TEST_CASE("invalid configurations are rejected") {
  auto bad = [](auto mutate) {
    ReactorConfig c;
    mutate(c);
    return c;
  };
  const MechanismSpec none;
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.length = 0.0; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.porosity = 1.0; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.diffusivity = -1.0; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.dt_out = 5.0; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.n_cells = 20; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.catalyst_cell = 0; }), none), ValidationError);
  CHECK_THROWS_AS(simulate_pulse(bad([](ReactorConfig& c) { c.catalyst_cell = 199; }), none), ValidationError);

  MechanismSpec m;
  m.kind = MechanismKind::IrreversibleLimited;
  m.k_forward["A"] = -0.1;
  CHECK_THROWS_AS(simulate_pulse(ReactorConfig{}, m), ValidationError);
  m.k_forward["A"] = 0.1;
  m.n_sites = 0.0;
  CHECK_THROWS_AS(simulate_pulse(ReactorConfig{}, m), ValidationError);
  CHECK_THROWS_AS(preset("no-such-preset"), ValidationError);
  CHECK_THROWS_AS(mechanism_kind_from_string("bogus"), ValidationError);
}
