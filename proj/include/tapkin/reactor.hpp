#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapkin/ode/bdf.hpp"

namespace tapkin::reactor {

// Geometry, transport, pulse and output grid of a thin-zone TAP reactor.
// Concentrations are per unit reactor length (mol/m); the cross-section is
// folded into the porosity-weighted balance eps * dC/dt = D * d2C/dx2.
struct ReactorConfig {
  double length = 1.0;        // m
  double porosity = 0.5;      // -
  double diffusivity = 1.0;   // m^2/s
  double pulse_moles = 1.0;   // mol per pulsed gas
  double t_end = 3.0;         // s
  double dt_out = 1e-3;       // s
  std::size_t n_cells = 200;
  std::optional<std::size_t> catalyst_cell;  // defaults to n_cells / 2
  double rtol = 1e-8;
  double atol = 1e-12;

  std::size_t thin_zone() const { return catalyst_cell.value_or(n_cells / 2); }
  std::size_t output_points() const;
  // Throws ValidationError naming the first violated invariant.
  void validate() const;
};

enum class MechanismKind {
  Inert,
  IrreversibleAbundant,
  IrreversibleLimited,
  Reversible,
  EleyRideal,
  LangmuirHinshelwood,
};

std::string to_string(MechanismKind kind);
MechanismKind mechanism_kind_from_string(const std::string& name);

// Rate constants are keyed by gas label:
//   single-gas kinds ("A"):   k_forward["A"] (m/s when abundant, else m^2/mol/s), k_reverse["A"] (m/s)
//   EleyRideal:               k_forward["O2"], k_forward["CO"]
//   LangmuirHinshelwood:      k_forward["O2"], k_forward["CO"], k_forward["CO2"], k_reverse["CO"]
// Missing keys mean zero.
struct MechanismSpec {
  MechanismKind kind = MechanismKind::Inert;
  std::map<std::string, double> k_forward;
  std::map<std::string, double> k_reverse;
  double n_sites = 1.0;   // mol/m
  double co_delay = 0.0;  // s, delay of the second reactant pulse
  // LangmuirHinshelwood only: O2 adsorbs on N - U_O - U_CO instead of N - U_O.
  bool shared_o2_sites = false;

  double forward(const std::string& gas) const;
  double reverse(const std::string& gas) const;
  void validate() const;
};

// One term of the uptake integral: nu * r_gas.
struct StoichTerm {
  std::string gas;
  double nu = 1.0;
};

// Per-gas series at the thin zone and outlet, sampled on the output grid.
// `rate` follows the sign conventions of the rate-reactivity forms: positive
// for consumption of a reactant; for CO2 the ER form reports r_CO2 = -r_CO and
// the LH form reports the surface-reaction rate k U_O U_CO.
struct GasTrace {
  std::string gas;
  bool pulsed = false;
  std::vector<double> outlet_flux;    // mol/s
  std::vector<double> concentration;  // mol/m, thin zone
  std::vector<double> rate;           // mol/s, thin zone
  std::vector<StoichTerm> uptake_stoichiometry;
  double moles_out = 0.0;       // time integral of outlet flux up to t_end
  double moles_in_gas = 0.0;    // gas-phase holdup at t_end
};

struct SurfaceTrace {
  std::string species;
  std::vector<double> coverage;  // mol/m
};

struct SimulationResult {
  ReactorConfig config;
  MechanismSpec mechanism;
  std::vector<double> t;
  std::vector<GasTrace> gases;
  std::vector<SurfaceTrace> surfaces;
  double mass_balance_defect = 0.0;  // max relative defect over conserved elements
  ode::BdfStats integrator;

  const GasTrace& gas(const std::string& label) const;
  const SurfaceTrace& surface(const std::string& label) const;
};

// Method-of-lines solution of the inert-thin-inert pulse response. Throws
// ValidationError for invalid inputs and NumericalError if the integrator
// fails or concentrations go negative beyond tolerance.
SimulationResult simulate_pulse(const ReactorConfig& config, const MechanismSpec& mech);

// Analytic outlet flux of an inert pulse (the standard diffusion curve).
std::vector<double> standard_diffusion_curve(std::span<const double> t_grid, const ReactorConfig& config);

// Dimensionless time t * D / (eps * L^2).
double dimensionless_time(double t, const ReactorConfig& config);

// Named configurations: inert, table2-case1, table2-case2a, table2-case2b,
// table2-case3, er-co, lh-co, lh-rev-co.
struct Preset {
  std::string name;
  std::string description;
  ReactorConfig config;
  MechanismSpec mechanism;
};
const std::vector<Preset>& presets();
const Preset& preset(const std::string& name);

}  // namespace tapkin::reactor
