#include "tapkin/reactor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kinetics.hpp"
#include "tapkin/error.hpp"

namespace tapkin::reactor {

using detail::Dual;
using detail::Layout;

// ---------------------------------------------------------------------------
// Config and mechanism validation

std::size_t ReactorConfig::output_points() const {
  return static_cast<std::size_t>(std::floor(t_end / dt_out + 1e-9)) + 1;
}

void ReactorConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("reactor config: " + what); };
  if (!(length > 0.0)) fail("length must be > 0");
  if (!(porosity > 0.0 && porosity < 1.0)) fail("porosity must lie in (0, 1)");
  if (!(diffusivity > 0.0)) fail("diffusivity must be > 0");
  if (!(pulse_moles >= 0.0)) fail("pulse_moles must be >= 0");
  if (!(dt_out > 0.0)) fail("dt_out must be > 0");
  if (!(t_end > dt_out)) fail("t_end must exceed dt_out");
  if (n_cells < 50) fail("n_cells must be >= 50");
  const std::size_t cat = thin_zone();
  if (cat == 0 || cat + 1 >= n_cells) fail("catalyst_cell must be strictly interior");
  if (!(rtol > 0.0 && rtol <= 1e-8)) fail("rtol must lie in (0, 1e-8]");
  if (!(atol > 0.0)) fail("atol must be > 0");
}

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::Inert: return "inert";
    case MechanismKind::IrreversibleAbundant: return "irreversible-abundant";
    case MechanismKind::IrreversibleLimited: return "irreversible-limited";
    case MechanismKind::Reversible: return "reversible";
    case MechanismKind::EleyRideal: return "eley-rideal";
    case MechanismKind::LangmuirHinshelwood: return "langmuir-hinshelwood";
  }
  return "unknown";
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  for (auto kind : {MechanismKind::Inert, MechanismKind::IrreversibleAbundant, MechanismKind::IrreversibleLimited,
                    MechanismKind::Reversible, MechanismKind::EleyRideal, MechanismKind::LangmuirHinshelwood}) {
    if (to_string(kind) == name) return kind;
  }
  throw ValidationError("unknown mechanism kind '" + name + "'");
}

double MechanismSpec::forward(const std::string& gas) const {
  const auto it = k_forward.find(gas);
  return it == k_forward.end() ? 0.0 : it->second;
}

double MechanismSpec::reverse(const std::string& gas) const {
  const auto it = k_reverse.find(gas);
  return it == k_reverse.end() ? 0.0 : it->second;
}

void MechanismSpec::validate() const {
  std::vector<std::string> fwd_keys, rev_keys;
  switch (kind) {
    case MechanismKind::Inert: break;
    case MechanismKind::IrreversibleAbundant:
    case MechanismKind::IrreversibleLimited: fwd_keys = {"A"}; break;
    case MechanismKind::Reversible:
      fwd_keys = {"A"};
      rev_keys = {"A"};
      break;
    case MechanismKind::EleyRideal: fwd_keys = {"O2", "CO"}; break;
    case MechanismKind::LangmuirHinshelwood:
      fwd_keys = {"O2", "CO", "CO2"};
      rev_keys = {"CO"};
      break;
  }
  auto check = [](const std::map<std::string, double>& m, const std::vector<std::string>& allowed,
                  const char* which) {
    for (const auto& [gas, k] : m) {
      if (std::find(allowed.begin(), allowed.end(), gas) == allowed.end()) {
        throw ValidationError(std::string("mechanism: unexpected ") + which + " rate constant for '" + gas + "'");
      }
      if (!(k >= 0.0) || !std::isfinite(k)) {
        throw ValidationError(std::string("mechanism: ") + which + " rate constant for '" + gas +
                              "' must be finite and >= 0");
      }
    }
  };
  check(k_forward, fwd_keys, "forward");
  check(k_reverse, rev_keys, "reverse");
  const bool limited = kind != MechanismKind::Inert && kind != MechanismKind::IrreversibleAbundant;
  if (limited && !(n_sites > 0.0)) throw ValidationError("mechanism: n_sites must be > 0");
  if (!(co_delay >= 0.0) || !std::isfinite(co_delay)) throw ValidationError("mechanism: co_delay must be >= 0");
}

const GasTrace& SimulationResult::gas(const std::string& label) const {
  for (const auto& g : gases)
    if (g.gas == label) return g;
  throw ValidationError("simulation has no gas '" + label + "'");
}

const SurfaceTrace& SimulationResult::surface(const std::string& label) const {
  for (const auto& s : surfaces)
    if (s.species == label) return s;
  throw ValidationError("simulation has no surface species '" + label + "'");
}

namespace detail {

Layout layout_for(const MechanismSpec& mech) {
  Layout l;
  switch (mech.kind) {
    case MechanismKind::Inert:
      l.gases = {"A"};
      l.pulsed = {true};
      l.pulse_delay = {0.0};
      l.uptake = {{{"A", 1.0}}};
      l.elements = {{"A", {1.0}, {}}};
      break;
    case MechanismKind::IrreversibleAbundant:
    case MechanismKind::IrreversibleLimited:
    case MechanismKind::Reversible:
      l.gases = {"A"};
      l.pulsed = {true};
      l.pulse_delay = {0.0};
      l.surfaces = {"A*"};
      l.uptake = {{{"A", 1.0}}};
      l.elements = {{"A", {1.0}, {1.0}}};
      break;
    case MechanismKind::EleyRideal:
      l.gases = {"O2", "CO", "CO2"};
      l.pulsed = {true, true, false};
      l.pulse_delay = {0.0, mech.co_delay, 0.0};
      l.surfaces = {"O*"};
      l.uptake = {{{"O2", 2.0}, {"CO", -1.0}}, {{"CO", 1.0}, {"CO2", 1.0}}, {{"CO2", 1.0}}};
      // "O" counts oxygen atoms that entered as O2.
      l.elements = {{"O", {2.0, 0.0, 1.0}, {1.0}}, {"C", {0.0, 1.0, 1.0}, {0.0}}};
      break;
    case MechanismKind::LangmuirHinshelwood:
      l.gases = {"O2", "CO", "CO2"};
      l.pulsed = {true, true, false};
      l.pulse_delay = {0.0, mech.co_delay, 0.0};
      l.surfaces = {"O*", "CO*"};
      l.uptake = {{{"O2", 2.0}, {"CO2", -1.0}}, {{"CO", 1.0}, {"CO2", -1.0}}, {{"CO2", 1.0}}};
      l.elements = {{"O", {2.0, 0.0, 1.0}, {1.0, 0.0}}, {"C", {0.0, 1.0, 1.0}, {0.0, 1.0}}};
      break;
  }
  return l;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Method-of-lines system

namespace {

class PulseSystem final : public ode::OdeSystem {
 public:
  PulseSystem(const ReactorConfig& config, const MechanismSpec& mech, const Layout& layout)
      : config_(config),
        mech_(mech),
        n_cells_(config.n_cells),
        cat_(config.thin_zone()),
        n_gas_(layout.gases.size()),
        n_surf_(layout.surfaces.size()),
        dx_(config.length / static_cast<double>(config.n_cells)),
        coupling_(config.diffusivity / (config.porosity * dx_ * dx_)),
        source_scale_(1.0 / (config.porosity * dx_)),
        outflow_coef_(2.0 * config.diffusivity / dx_) {}

  std::size_t size() const override { return n_cells_ * n_gas_ + n_surf_ + n_gas_; }
  ode::BandShape band() const override { return {n_gas_ + n_surf_, n_gas_ + n_surf_}; }

  std::size_t gas_index(std::size_t cell, std::size_t g) const {
    return cell * n_gas_ + g + (cell > cat_ ? n_surf_ : 0);
  }
  std::size_t surface_index(std::size_t s) const { return cat_ * n_gas_ + n_gas_ + s; }
  std::size_t outflow_index(std::size_t g) const { return n_cells_ * n_gas_ + n_surf_ + g; }

  double dx() const { return dx_; }
  std::size_t n_gas() const { return n_gas_; }
  std::size_t n_surf() const { return n_surf_; }
  std::size_t n_cells() const { return n_cells_; }
  std::size_t thin_zone() const { return cat_; }
  double outflow_coef() const { return outflow_coef_; }

  void local_rates(std::span<const double> y, std::span<double> sink, std::span<double> reported,
                   std::span<double> du) const {
    std::array<double, detail::kMaxLocal> c{}, u{};
    for (std::size_t g = 0; g < n_gas_; ++g) c[g] = y[gas_index(cat_, g)];
    for (std::size_t s = 0; s < n_surf_; ++s) u[s] = y[surface_index(s)];
    detail::evaluate<double>(mech_, std::span<const double>(c.data(), n_gas_),
                             std::span<const double>(u.data(), n_surf_), sink, reported, du);
  }

  void rhs(double /*t*/, std::span<const double> y, std::span<double> dydt) const override {
    for (std::size_t g = 0; g < n_gas_; ++g) {
      for (std::size_t i = 0; i < n_cells_; ++i) {
        const double ci = y[gas_index(i, g)];
        double lap;
        if (i == 0) {
          lap = y[gas_index(1, g)] - ci;
        } else if (i + 1 == n_cells_) {
          lap = y[gas_index(i - 1, g)] - 3.0 * ci;
        } else {
          lap = y[gas_index(i - 1, g)] - 2.0 * ci + y[gas_index(i + 1, g)];
        }
        dydt[gas_index(i, g)] = coupling_ * lap;
      }
      dydt[outflow_index(g)] = outflow_coef_ * y[gas_index(n_cells_ - 1, g)];
    }
    std::array<double, detail::kMaxLocal> sink{}, reported{}, du{};
    local_rates(y, std::span(sink.data(), n_gas_), std::span(reported.data(), n_gas_),
                std::span(du.data(), n_surf_));
    for (std::size_t g = 0; g < n_gas_; ++g) dydt[gas_index(cat_, g)] -= source_scale_ * sink[g];
    for (std::size_t s = 0; s < n_surf_; ++s) dydt[surface_index(s)] = du[s];
  }

  void jacobian(double /*t*/, std::span<const double> y, ode::BandedMatrix& jac) const override {
    for (std::size_t g = 0; g < n_gas_; ++g) {
      for (std::size_t i = 0; i < n_cells_; ++i) {
        const std::size_t row = gas_index(i, g);
        if (i == 0) {
          jac.add(row, row, -coupling_);
          jac.add(row, gas_index(1, g), coupling_);
        } else if (i + 1 == n_cells_) {
          jac.add(row, row, -3.0 * coupling_);
          jac.add(row, gas_index(i - 1, g), coupling_);
        } else {
          jac.add(row, row, -2.0 * coupling_);
          jac.add(row, gas_index(i - 1, g), coupling_);
          jac.add(row, gas_index(i + 1, g), coupling_);
        }
      }
      jac.add(outflow_index(g), gas_index(n_cells_ - 1, g), outflow_coef_);
    }

    // Local block: columns are the thin-zone gases followed by the surface species.
    std::array<Dual, detail::kMaxLocal> c{}, u{}, sink{}, reported{}, du{};
    std::vector<std::size_t> cols;
    for (std::size_t g = 0; g < n_gas_; ++g) {
      c[g] = Dual::variable(y[gas_index(cat_, g)], cols.size());
      cols.push_back(gas_index(cat_, g));
    }
    for (std::size_t s = 0; s < n_surf_; ++s) {
      u[s] = Dual::variable(y[surface_index(s)], cols.size());
      cols.push_back(surface_index(s));
    }
    detail::evaluate<Dual>(mech_, std::span<const Dual>(c.data(), n_gas_),
                           std::span<const Dual>(u.data(), n_surf_), std::span(sink.data(), n_gas_),
                           std::span(reported.data(), n_gas_), std::span(du.data(), n_surf_));
    for (std::size_t g = 0; g < n_gas_; ++g)
      for (std::size_t k = 0; k < cols.size(); ++k)
        if (sink[g].d[k] != 0.0) jac.add(gas_index(cat_, g), cols[k], -source_scale_ * sink[g].d[k]);
    for (std::size_t s = 0; s < n_surf_; ++s)
      for (std::size_t k = 0; k < cols.size(); ++k)
        if (du[s].d[k] != 0.0) jac.add(surface_index(s), cols[k], du[s].d[k]);
  }

 private:
  const ReactorConfig& config_;
  const MechanismSpec& mech_;
  std::size_t n_cells_;
  std::size_t cat_;
  std::size_t n_gas_;
  std::size_t n_surf_;
  double dx_;
  double coupling_;
  double source_scale_;
  double outflow_coef_;
};

}  // namespace

SimulationResult simulate_pulse(const ReactorConfig& config, const MechanismSpec& mech) {
  config.validate();
  mech.validate();
  const Layout layout = detail::layout_for(mech);
  const PulseSystem sys(config, mech, layout);
  const std::size_t n_gas = sys.n_gas();
  const std::size_t n_surf = sys.n_surf();
  const std::size_t n_out = config.output_points();
  const double dx = sys.dx();
  const double inlet_conc = config.pulse_moles / (config.porosity * dx);

  SimulationResult res;
  res.config = config;
  res.mechanism = mech;
  res.t.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) res.t[k] = static_cast<double>(k) * config.dt_out;
  res.gases.resize(n_gas);
  for (std::size_t g = 0; g < n_gas; ++g) {
    auto& gt = res.gases[g];
    gt.gas = layout.gases[g];
    gt.pulsed = layout.pulsed[g];
    gt.uptake_stoichiometry = layout.uptake[g];
    gt.outlet_flux.assign(n_out, 0.0);
    gt.concentration.assign(n_out, 0.0);
    gt.rate.assign(n_out, 0.0);
  }
  res.surfaces.resize(n_surf);
  for (std::size_t s = 0; s < n_surf; ++s) {
    res.surfaces[s].species = layout.surfaces[s];
    res.surfaces[s].coverage.assign(n_out, 0.0);
  }

  const double neg_tol = 1e-6 * config.pulse_moles / (config.porosity * config.length) + 1e3 * config.atol;
  double min_conc = 0.0;
  std::size_t min_cell = 0;
  double min_time = 0.0;

  auto record = [&](std::size_t k, std::span<const double> y) {
    std::array<double, detail::kMaxLocal> sink{}, reported{}, du{};
    sys.local_rates(y, std::span(sink.data(), n_gas), std::span(reported.data(), n_gas),
                    std::span(du.data(), n_surf));
    for (std::size_t g = 0; g < n_gas; ++g) {
      auto& gt = res.gases[g];
      gt.concentration[k] = y[sys.gas_index(sys.thin_zone(), g)];
      gt.outlet_flux[k] = sys.outflow_coef() * y[sys.gas_index(sys.n_cells() - 1, g)];
      gt.rate[k] = reported[g];
      for (std::size_t i = 0; i < sys.n_cells(); ++i) {
        const double v = y[sys.gas_index(i, g)];
        if (v < min_conc) {
          min_conc = v;
          min_cell = i;
          min_time = res.t[k];
        }
      }
    }
    for (std::size_t s = 0; s < n_surf; ++s) res.surfaces[s].coverage[k] = y[sys.surface_index(s)];
  };

  // Pulses with a delay are injected by restarting the integrator.
  std::vector<double> injections;
  for (std::size_t g = 0; g < n_gas; ++g) {
    if (layout.pulsed[g] && layout.pulse_delay[g] > 0.0 && layout.pulse_delay[g] < config.t_end) {
      injections.push_back(layout.pulse_delay[g]);
    }
  }
  std::sort(injections.begin(), injections.end());
  injections.erase(std::unique(injections.begin(), injections.end()), injections.end());

  std::vector<double> y(sys.size(), 0.0);
  auto inject = [&](double when) {
    for (std::size_t g = 0; g < n_gas; ++g) {
      if (layout.pulsed[g] && layout.pulse_delay[g] == when) y[sys.gas_index(0, g)] += inlet_conc;
    }
  };
  inject(0.0);

  ode::BdfOptions opts;
  opts.rtol = config.rtol;
  opts.atol = config.atol;

  std::vector<double> seg_bounds = injections;
  seg_bounds.push_back(config.t_end);
  double t0 = 0.0;
  std::size_t k = 0;
  std::vector<double> buf(sys.size());
  for (std::size_t seg = 0; seg < seg_bounds.size(); ++seg) {
    const double t1 = seg_bounds[seg];
    const bool last = seg + 1 == seg_bounds.size();
    // Output points strictly before the next injection belong to this segment.
    auto belongs = [&](double tk) { return last ? tk <= t1 * (1 + 1e-12) : tk < t1; };
    while (k < n_out && res.t[k] <= t0) {
      record(k, y);
      ++k;
    }
    ode::BdfIntegrator integ(sys, t0, y, t1, opts);
    while (!integ.finished()) {
      integ.step();
      while (k < n_out && belongs(res.t[k]) && res.t[k] <= integ.t()) {
        integ.interpolate(res.t[k], buf);
        record(k, buf);
        ++k;
      }
    }
    const auto& st = integ.stats();
    res.integrator.steps += st.steps;
    res.integrator.rejected += st.rejected;
    res.integrator.rhs_evals += st.rhs_evals;
    res.integrator.jac_evals += st.jac_evals;
    res.integrator.factorizations += st.factorizations;
    y = integ.y();
    t0 = t1;
    if (!last) inject(t1);
  }
  // Rounding in t_end/dt_out may leave the final grid point unrecorded.
  while (k < n_out) {
    record(k, y);
    ++k;
  }

  if (min_conc < -neg_tol) {
    std::ostringstream os;
    os << "negative gas concentration " << min_conc << " in cell " << min_cell << " at t=" << min_time
       << " exceeds tolerance " << neg_tol << "; the discretization is unstable";
    throw NumericalError(os.str());
  }

  // Holdups at t_end and the element balance.
  for (std::size_t g = 0; g < n_gas; ++g) {
    auto& gt = res.gases[g];
    gt.moles_out = y[sys.outflow_index(g)];
    double holdup = 0.0;
    for (std::size_t i = 0; i < sys.n_cells(); ++i) holdup += y[sys.gas_index(i, g)];
    gt.moles_in_gas = holdup * config.porosity * dx;
  }
  double defect = 0.0;
  for (const auto& el : layout.elements) {
    double injected = 0.0;
    double present = 0.0;
    for (std::size_t g = 0; g < n_gas; ++g) {
      if (layout.pulsed[g] && layout.pulse_delay[g] < config.t_end) injected += el.gas_content[g] * config.pulse_moles;
      present += el.gas_content[g] * (res.gases[g].moles_out + res.gases[g].moles_in_gas);
    }
    for (std::size_t s = 0; s < n_surf; ++s) present += el.surface_content[s] * y[sys.surface_index(s)];
    const double err = std::abs(present - injected);
    defect = std::max(defect, injected > 0.0 ? err / injected : err);
  }
  res.mass_balance_defect = defect;
  if (defect > 1e-4) {
    std::ostringstream os;
    os << "mass balance defect " << defect << " exceeds 1e-4 (steps=" << res.integrator.steps
       << ", rtol=" << config.rtol << ")";
    throw NumericalError(os.str());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Analytic inert response

double dimensionless_time(double t, const ReactorConfig& config) {
  return t * config.diffusivity / (config.porosity * config.length * config.length);
}

std::vector<double> standard_diffusion_curve(std::span<const double> t_grid, const ReactorConfig& config) {
  constexpr double pi = std::numbers::pi;
  const double prefactor =
      config.pulse_moles * config.diffusivity * pi / (config.porosity * config.length * config.length);
  std::vector<double> flux(t_grid.size(), 0.0);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double tau = dimensionless_time(t_grid[k], config);
    if (!(tau > 0.0)) continue;
    double sum = 0.0;
    for (int n = 0; n < 1'000'000; ++n) {
      const double half = n + 0.5;
      const double term = (n % 2 == 0 ? 1.0 : -1.0) * (2.0 * n + 1.0) * std::exp(-half * half * pi * pi * tau);
      sum += term;
      if (std::abs(term) < 1e-12 * std::abs(sum)) break;
    }
    flux[k] = prefactor * sum;
  }
  return flux;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

MechanismSpec single_gas(MechanismKind kind, double kf, double kr, double n_sites) {
  MechanismSpec m;
  m.kind = kind;
  m.k_forward["A"] = kf;
  if (kind == MechanismKind::Reversible) m.k_reverse["A"] = kr;
  m.n_sites = n_sites;
  return m;
}

MechanismSpec co_oxidation(MechanismKind kind, double k_o2, double k_co, double k_co_rev) {
  MechanismSpec m;
  m.kind = kind;
  m.k_forward["O2"] = k_o2;
  m.k_forward["CO"] = k_co;
  if (kind == MechanismKind::LangmuirHinshelwood) {
    m.k_forward["CO2"] = 5.0;
    m.k_reverse["CO"] = k_co_rev;
  }
  m.n_sites = 1.0;
  return m;
}

std::vector<Preset> build_presets() {
  const ReactorConfig base{};
  std::vector<Preset> out;
  out.push_back({"inert", "no reaction; outlet flux is the standard diffusion curve", base, MechanismSpec{}});
  out.push_back({"table2-case1", "irreversible adsorption, abundant sites, k_app = 0.2 m/s", base,
                 single_gas(MechanismKind::IrreversibleAbundant, 0.2, 0.0, 1.0)});
  out.push_back({"table2-case2a", "irreversible adsorption, N = 1, k = 0.2", base,
                 single_gas(MechanismKind::IrreversibleLimited, 0.2, 0.0, 1.0)});
  out.push_back({"table2-case2b", "irreversible adsorption, N*k = 0.2, k = 0.5 (N = 0.4)", base,
                 single_gas(MechanismKind::IrreversibleLimited, 0.5, 0.0, 0.4)});
  out.push_back({"table2-case3", "reversible adsorption, N = 1, k+ = 0.2, k- = 40", base,
                 single_gas(MechanismKind::Reversible, 0.2, 40.0, 1.0)});
  out.push_back({"er-co", "Eley-Rideal CO oxidation, k_O = 0.2, k_CO = 0.5, N = 1", base,
                 co_oxidation(MechanismKind::EleyRideal, 0.2, 0.5, 0.0)});
  out.push_back({"lh-co", "irreversible Langmuir-Hinshelwood CO oxidation, k_O = 0.2, k_CO = 0.5, k_CO2 = 5", base,
                 co_oxidation(MechanismKind::LangmuirHinshelwood, 0.2, 0.5, 0.0)});
  out.push_back({"lh-rev-co", "Langmuir-Hinshelwood CO oxidation with reversible CO, k_CO- = 0.5", base,
                 co_oxidation(MechanismKind::LangmuirHinshelwood, 0.2, 0.5, 0.5)});
  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build_presets();
  return all;
}

const Preset& preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ValidationError("unknown preset '" + name + "' (known: " + known + ")");
}

}  // namespace tapkin::reactor
