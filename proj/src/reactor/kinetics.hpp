#pragma once

// Surface kinetics of the mechanism presets, written once as templates so the
// same code yields rates (double) and the local Jacobian (Dual).

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tapkin/reactor.hpp"

namespace tapkin::reactor::detail {

inline constexpr std::size_t kMaxLocal = 6;

struct Dual {
  double v = 0.0;
  std::array<double, kMaxLocal> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit constant promotion
  static Dual variable(double value, std::size_t slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }
};

inline Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (std::size_t i = 0; i < kMaxLocal; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
inline Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (std::size_t i = 0; i < kMaxLocal; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
inline Dual operator-(const Dual& a) { return Dual(0.0) - a; }
inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (std::size_t i = 0; i < kMaxLocal; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

// Element bookkeeping for the mass balance.
struct Element {
  std::string name;
  std::vector<double> gas_content;      // per gas
  std::vector<double> surface_content;  // per surface species
};

struct Layout {
  std::vector<std::string> gases;
  std::vector<bool> pulsed;
  std::vector<double> pulse_delay;
  std::vector<std::string> surfaces;
  std::vector<std::vector<StoichTerm>> uptake;  // per gas
  std::vector<Element> elements;
};

Layout layout_for(const MechanismSpec& mech);

// `sink[g]` is the gas-phase consumption at the thin zone (mol/s),
// `reported[g]` the rate in the rate-reactivity sign convention and
// `du[s]` the surface-species time derivative.
template <class T>
void evaluate(const MechanismSpec& mech, std::span<const T> c, std::span<const T> u, std::span<T> sink,
              std::span<T> reported, std::span<T> du) {
  const double n_sites = mech.n_sites;
  switch (mech.kind) {
    case MechanismKind::Inert: {
      sink[0] = T(0.0);
      reported[0] = T(0.0);
      return;
    }
    case MechanismKind::IrreversibleAbundant: {
      const T r = T(mech.forward("A")) * c[0];
      sink[0] = r;
      reported[0] = r;
      du[0] = r;
      return;
    }
    case MechanismKind::IrreversibleLimited:
    case MechanismKind::Reversible: {
      const T r = T(mech.forward("A")) * c[0] * (T(n_sites) - u[0]) - T(mech.reverse("A")) * u[0];
      sink[0] = r;
      reported[0] = r;
      du[0] = r;
      return;
    }
    case MechanismKind::EleyRideal: {
      // gases O2, CO, CO2; surface O*
      const T free = T(n_sites) - u[0];
      const T r_o2 = T(mech.forward("O2")) * c[0] * free * free;
      const T r_co = T(mech.forward("CO")) * c[1] * u[0];
      sink[0] = r_o2;
      sink[1] = r_co;
      sink[2] = -r_co;
      reported[0] = r_o2;
      reported[1] = r_co;
      reported[2] = -r_co;
      du[0] = T(2.0) * r_o2 - r_co;
      return;
    }
    case MechanismKind::LangmuirHinshelwood: {
      // gases O2, CO, CO2; surfaces O*, CO*
      const T free = T(n_sites) - u[0] - u[1];
      const T free_o = mech.shared_o2_sites ? free : T(n_sites) - u[0];
      const T r_o2 = T(mech.forward("O2")) * c[0] * free_o * free_o;
      const T r_co = T(mech.forward("CO")) * c[1] * free - T(mech.reverse("CO")) * u[1];
      const T r_co2 = T(mech.forward("CO2")) * u[0] * u[1];
      sink[0] = r_o2;
      sink[1] = r_co;
      sink[2] = -r_co2;
      reported[0] = r_o2;
      reported[1] = r_co;
      reported[2] = r_co2;
      du[0] = T(2.0) * r_o2 - r_co2;
      du[1] = r_co - r_co2;
      return;
    }
  }
}

}  // namespace tapkin::reactor::detail
