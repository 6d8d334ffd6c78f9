#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapkin/features.hpp"
#include "tapkin/reactor.hpp"

namespace tapkin::mechanism {

// Pearson correlation of the finite pairs; NaN for fewer than two pairs or a
// zero-variance side.
double pearson(std::span<const double> a, std::span<const double> b);

// Pearson correlation after clamping both series at their type-7 quantiles
// (trim, 1 - trim). trim in [0, 0.25], at least 50 finite pairs.
double robust_correlation(std::span<const double> a, std::span<const double> b, double trim = 0.05);

double quantile_type7(std::vector<double> values, double q);

struct RcdcMatrix {
  std::vector<std::string> labels;
  std::vector<features::RcdRole> roles;
  std::vector<features::RcdTransform> transforms;
  Eigen::MatrixXd corr;  // NaN where undefined
  std::size_t n_points = 0;
  std::optional<double> trim;  // set when the robust correlation was used

  double at(const std::string& a, const std::string& b) const;
};

inline constexpr std::size_t kMinAlignedPoints = 50;

// Pairwise correlations over the points retained by every series: Pearson,
// or robust_correlation when a trim is given.
RcdcMatrix rcdc(std::span<const features::RcdSeries> series, std::optional<double> trim = std::nullopt);

// O2 (sqrt of r/C), CO (r/C) and CO2 (r) for a CO-oxidation simulation.
std::vector<features::RcdSeries> co_oxidation_rcd(const reactor::SimulationResult& sim);

// corr(O2, CO2), corr(CO, CO2), corr(O2, CO).
std::array<double, 3> co_oxidation_correlations(const reactor::SimulationResult& sim);

enum class SweepKind { ErIrreversible, LhIrreversible, LhReversible };
std::string to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& name);  // er-irrev, lh-irrev, lh-rev

struct CorrelationGrid {
  SweepKind kind = SweepKind::ErIrreversible;
  std::string axis1_name;
  std::string axis2_name;
  std::vector<double> axis1;
  std::vector<double> axis2;
  std::vector<std::string> pairs;          // corr_<reactant>_<product>
  std::vector<std::vector<double>> cells;  // cells[pair][i * axis2.size() + j], NaN if invalid
  std::size_t invalid = 0;
  double max_mass_defect = 0.0;  // over the cells that simulated

  double at(std::size_t pair, std::size_t i, std::size_t j) const { return cells[pair][i * axis2.size() + j]; }
};

struct SweepOptions {
  reactor::ReactorConfig config;
  double n_sites = 1.0;
  double k_co2 = 5.0;    // LH surface reaction
  double k_o_fixed = 0.2;  // reversible sweep
  unsigned threads = 0;  // 0: hardware concurrency
  bool shared_o2_sites = false;
};

// 0.04, 0.06, ..., 1.00
std::vector<double> default_k_grid();
// {0.04, 0.28, 0.52, 0.76, 1.00}
std::vector<double> coarse_k_grid();

// axis1 = k_O, axis2 = k_CO. kind is ErIrreversible or LhIrreversible.
CorrelationGrid grid_sweep_irreversible(SweepKind kind, std::span<const double> k_o, std::span<const double> k_co,
                                        const SweepOptions& opts = {});

// LH with k_O fixed; axis1 = forward k_CO, axis2 = reverse k_CO.
CorrelationGrid grid_sweep_reversible(std::span<const double> k_co_fwd, std::span<const double> k_co_rev,
                                      const SweepOptions& opts = {});

// Mechanism spec for one sweep cell.
reactor::MechanismSpec sweep_mechanism(SweepKind kind, double axis1, double axis2, const SweepOptions& opts);

enum class Verdict { EleyRideal, LangmuirHinshelwood, Indeterminate };
std::string to_string(Verdict v);

struct MechanismCall {
  Verdict verdict = Verdict::Indeterminate;
  std::vector<std::string> reactants;
  std::vector<double> correlations;  // reactant -> product
  std::string notes;
};

inline constexpr double kErMagnitudeTolerance = 0.1;

MechanismCall classify_correlations(double corr_first, double corr_second, double tol = kErMagnitudeTolerance);
MechanismCall classify_mechanism(const RcdcMatrix& m, const std::vector<std::string>& reactants,
                                 const std::string& product, double tol = kErMagnitudeTolerance);

}  // namespace tapkin::mechanism
