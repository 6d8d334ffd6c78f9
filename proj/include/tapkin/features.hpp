#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapkin/reactor.hpp"

namespace tapkin::features {

using reactor::StoichTerm;

// Thin-zone transient kinetic features of one gas on a uniform time grid.
struct TransientFeatures {
  std::string gas_id;
  std::vector<double> t;              // s
  std::vector<double> rate;           // mol/s
  std::vector<double> concentration;  // mol/m
  std::vector<double> uptake;         // mol/m
  std::vector<StoichTerm> stoichiometry;

  std::size_t size() const { return t.size(); }
};

enum class RcdRole { Reactant, Product };
enum class RcdTransform { Identity, Sqrt };

// Rate-concentration dependency of one gas. `values` has one entry per grid
// point; masked points (retained[k] == false) hold NaN.
struct RcdSeries {
  std::string gas_id;
  RcdRole role = RcdRole::Reactant;
  RcdTransform transform = RcdTransform::Identity;
  std::vector<double> values;
  std::vector<bool> retained;
  std::size_t masked = 0;
  std::size_t clipped = 0;  // negative quotients clipped to 0 before the root
  double c_floor = 0.0;

  std::size_t retained_count() const { return values.size() - masked; }
};

// Cumulative trapezoid integral of sum_i nu_i r_i. `rates[i]` pairs with
// `stoich[i]`; every series must have the length of `t`.
std::vector<double> compute_uptake(std::span<const std::vector<double>> rates, std::span<const double> stoich,
                                   std::span<const double> t);

// r/C (reactant, optionally square-rooted) or r (product). Points with
// |C| < c_floor are masked; the default floor is 1e-6 * max(C).
RcdSeries compute_rcd(const TransientFeatures& features, RcdRole role, RcdTransform transform,
                      std::optional<double> c_floor = std::nullopt);

// Default relative concentration floor for compute_rcd.
inline constexpr double kDefaultRelativeFloor = 1e-6;

// Thin-zone r and C read from the simulator; U integrated from the gas's own
// signed rates through compute_uptake.
TransientFeatures extract_thin_zone_features(const reactor::SimulationResult& sim, const std::string& gas_id);

std::vector<TransientFeatures> extract_all(const reactor::SimulationResult& sim);

struct IngestReport {
  std::size_t rows = 0;
  std::size_t interpolated = 0;  // NaN samples filled from their neighbours
};

// Parses the features CSV schema: header `time_s,r_<gas>,C_<gas>,U_<gas>`
// repeated per gas, '#' comment lines ignored. Rejects non-uniform or
// non-monotone grids, missing columns and NaN runs longer than 5 samples;
// shorter NaN runs are linearly interpolated.
std::vector<TransientFeatures> ingest_features(std::istream& in, IngestReport* report = nullptr);

// Checks the common invariants (equal lengths, uniform grid within 1e-9
// relative jitter). Throws ValidationError.
void check_uniform_grid(std::span<const double> t, const std::string& what);

const TransientFeatures& find_gas(const std::vector<TransientFeatures>& set, const std::string& gas_id);

}  // namespace tapkin::features
