#include "tapkin/mechanism.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "tapkin/error.hpp"

namespace tapkin::mechanism {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pearson_dense(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return kNaN;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

void finite_pairs(std::span<const double> a, std::span<const double> b, std::vector<double>& xa,
                  std::vector<double>& xb) {
  if (a.size() != b.size()) throw ValidationError("correlation: series lengths differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      xa.push_back(a[i]);
      xb.push_back(b[i]);
    }
  }
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  std::vector<double> xa, xb;
  finite_pairs(a, b, xa, xb);
  return pearson_dense(xa, xb);
}

double quantile_type7(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty series");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double robust_correlation(std::span<const double> a, std::span<const double> b, double trim) {
  if (!(trim >= 0.0 && trim <= 0.25)) throw ValidationError("trim must lie in [0, 0.25]");
  std::vector<double> xa, xb;
  finite_pairs(a, b, xa, xb);
  if (xa.size() < kMinAlignedPoints) {
    throw ValidationError("robust correlation needs at least 50 points, found " + std::to_string(xa.size()));
  }
  if (trim > 0.0) {
    for (auto* v : {&xa, &xb}) {
      const double lo = quantile_type7(*v, trim);
      const double hi = quantile_type7(*v, 1.0 - trim);
      for (double& x : *v) x = std::clamp(x, lo, hi);
    }
  }
  return pearson_dense(xa, xb);
}

double RcdcMatrix::at(const std::string& a, const std::string& b) const {
  const auto ia = std::find(labels.begin(), labels.end(), a);
  const auto ib = std::find(labels.begin(), labels.end(), b);
  if (ia == labels.end() || ib == labels.end()) {
    throw ValidationError("RCDC matrix has no entry for '" + a + "' and '" + b + "'");
  }
  return corr(ia - labels.begin(), ib - labels.begin());
}

RcdcMatrix rcdc(std::span<const features::RcdSeries> series, std::optional<double> trim) {
  if (series.size() < 2) throw ValidationError("RCDC needs at least two series");
  const std::size_t n = series[0].values.size();
  for (const auto& s : series) {
    if (s.values.size() != n || s.retained.size() != n) {
      throw ValidationError("RCDC: series '" + s.gas_id + "' is not on the common grid");
    }
  }
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n; ++k) {
    bool keep = true;
    for (const auto& s : series) keep = keep && s.retained[k] && std::isfinite(s.values[k]);
    if (keep) idx.push_back(k);
  }
  if (idx.size() < kMinAlignedPoints) {
    throw ValidationError("RCDC needs at least 50 aligned points, found " + std::to_string(idx.size()));
  }
  RcdcMatrix m;
  const auto p = static_cast<Eigen::Index>(series.size());
  m.corr = Eigen::MatrixXd::Constant(p, p, kNaN);
  m.n_points = idx.size();
  m.trim = trim;
  std::vector<std::vector<double>> dense(series.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    m.labels.push_back(series[s].gas_id);
    m.roles.push_back(series[s].role);
    m.transforms.push_back(series[s].transform);
    for (std::size_t k : idx) dense[s].push_back(series[s].values[k]);
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      const double c = trim ? robust_correlation(dense[i], dense[j], *trim) : pearson_dense(dense[i], dense[j]);
      m.corr(i, j) = m.corr(j, i) = (i == j && std::isfinite(c)) ? 1.0 : c;
    }
  }
  return m;
}

std::vector<features::RcdSeries> co_oxidation_rcd(const reactor::SimulationResult& sim) {
  using features::RcdRole;
  using features::RcdTransform;
  std::vector<features::RcdSeries> out;
  out.push_back(features::compute_rcd(features::extract_thin_zone_features(sim, "O2"), RcdRole::Reactant,
                                      RcdTransform::Sqrt));
  out.push_back(features::compute_rcd(features::extract_thin_zone_features(sim, "CO"), RcdRole::Reactant,
                                      RcdTransform::Identity));
  out.push_back(features::compute_rcd(features::extract_thin_zone_features(sim, "CO2"), RcdRole::Product,
                                      RcdTransform::Identity));
  return out;
}

std::array<double, 3> co_oxidation_correlations(const reactor::SimulationResult& sim) {
  const auto series = co_oxidation_rcd(sim);
  const RcdcMatrix m = rcdc(series);
  return {m.corr(0, 2), m.corr(1, 2), m.corr(0, 1)};
}

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::ErIrreversible: return "er-irrev";
    case SweepKind::LhIrreversible: return "lh-irrev";
    case SweepKind::LhReversible: return "lh-rev";
  }
  return "?";
}

SweepKind sweep_kind_from_string(const std::string& name) {
  for (auto k : {SweepKind::ErIrreversible, SweepKind::LhIrreversible, SweepKind::LhReversible})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown sweep '" + name + "' (expected er-irrev, lh-irrev or lh-rev)");
}

std::vector<double> default_k_grid() {
  std::vector<double> g;
  for (int i = 2; i <= 50; ++i) g.push_back(i / 50.0);
  return g;
}

std::vector<double> coarse_k_grid() { return {0.04, 0.28, 0.52, 0.76, 1.00}; }

reactor::MechanismSpec sweep_mechanism(SweepKind kind, double axis1, double axis2, const SweepOptions& opts) {
  reactor::MechanismSpec m;
  m.n_sites = opts.n_sites;
  m.shared_o2_sites = opts.shared_o2_sites;
  switch (kind) {
    case SweepKind::ErIrreversible:
      m.kind = reactor::MechanismKind::EleyRideal;
      m.k_forward = {{"O2", axis1}, {"CO", axis2}};
      break;
    case SweepKind::LhIrreversible:
      m.kind = reactor::MechanismKind::LangmuirHinshelwood;
      m.k_forward = {{"O2", axis1}, {"CO", axis2}, {"CO2", opts.k_co2}};
      break;
    case SweepKind::LhReversible:
      m.kind = reactor::MechanismKind::LangmuirHinshelwood;
      m.k_forward = {{"O2", opts.k_o_fixed}, {"CO", axis1}, {"CO2", opts.k_co2}};
      m.k_reverse = {{"CO", axis2}};
      break;
  }
  return m;
}

namespace {

void check_axis(std::span<const double> axis, const char* name) {
  if (axis.empty()) throw ValidationError(std::string(name) + " grid is empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!(axis[i] >= 0.0) || !std::isfinite(axis[i])) {
      throw ValidationError(std::string(name) + " grid values must be finite and non-negative");
    }
    if (i > 0 && !(axis[i] > axis[i - 1])) throw ValidationError(std::string(name) + " grid must be strictly increasing");
  }
}

CorrelationGrid sweep(SweepKind kind, std::span<const double> a1, std::span<const double> a2, const SweepOptions& opts) {
  check_axis(a1, "axis1");
  check_axis(a2, "axis2");
  opts.config.validate();
  CorrelationGrid g;
  g.kind = kind;
  g.axis1.assign(a1.begin(), a1.end());
  g.axis2.assign(a2.begin(), a2.end());
  if (kind == SweepKind::LhReversible) {
    g.axis1_name = "k_CO_fwd";
    g.axis2_name = "k_CO_rev";
  } else {
    g.axis1_name = "k_O2";
    g.axis2_name = "k_CO";
  }
  g.pairs = {"corr_O2_CO2", "corr_CO_CO2", "corr_O2_CO"};
  const std::size_t cells = a1.size() * a2.size();
  g.cells.assign(g.pairs.size(), std::vector<double>(cells, kNaN));
  std::vector<double> defect(cells, 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t i = c / a2.size();
      const std::size_t j = c % a2.size();
      try {
        const auto mech = sweep_mechanism(kind, a1[i], a2[j], opts);
        const auto sim = reactor::simulate_pulse(opts.config, mech);
        defect[c] = sim.mass_balance_defect;
        const auto corr = co_oxidation_correlations(sim);
        for (std::size_t p = 0; p < 3; ++p) g.cells[p][c] = corr[p];
      } catch (const Error&) {
        // cell stays invalid
      }
    }
  };
  unsigned n_threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cells));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t c = 0; c < cells; ++c) {
    bool bad = false;
    for (const auto& col : g.cells) bad = bad || !std::isfinite(col[c]);
    if (bad) ++g.invalid;
    g.max_mass_defect = std::max(g.max_mass_defect, defect[c]);
  }
  return g;
}

}  // namespace

CorrelationGrid grid_sweep_irreversible(SweepKind kind, std::span<const double> k_o, std::span<const double> k_co,
                                        const SweepOptions& opts) {
  if (kind == SweepKind::LhReversible) {
    throw ValidationError("grid_sweep_irreversible takes er-irrev or lh-irrev");
  }
  return sweep(kind, k_o, k_co, opts);
}

CorrelationGrid grid_sweep_reversible(std::span<const double> k_co_fwd, std::span<const double> k_co_rev,
                                      const SweepOptions& opts) {
  return sweep(SweepKind::LhReversible, k_co_fwd, k_co_rev, opts);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::EleyRideal: return "EleyRideal";
    case Verdict::LangmuirHinshelwood: return "LangmuirHinshelwood";
    case Verdict::Indeterminate: return "Indeterminate";
  }
  return "?";
}

MechanismCall classify_correlations(double c1, double c2, double tol) {
  MechanismCall call;
  call.correlations = {c1, c2};
  if (!std::isfinite(c1) || !std::isfinite(c2)) {
    call.notes = "a reactant-product correlation is undefined";
    return call;
  }
  if (c1 < 0.0 && c2 < 0.0) {
    call.verdict = Verdict::LangmuirHinshelwood;
    call.notes = "both reactants parasitic to the product";
  } else if ((c1 < 0.0) != (c2 < 0.0) && c1 != 0.0 && c2 != 0.0) {
    if (std::abs(std::abs(c1) - std::abs(c2)) <= tol) {
      call.verdict = Verdict::EleyRideal;
      call.notes = "opposite signs with matching magnitudes";
    } else {
      call.notes = "opposite signs but magnitudes differ by more than the tolerance";
    }
  } else {
    call.notes = "sign pattern matches no rule";
  }
  return call;
}

MechanismCall classify_mechanism(const RcdcMatrix& m, const std::vector<std::string>& reactants,
                                 const std::string& product, double tol) {
  if (reactants.size() != 2) throw ValidationError("classification takes exactly two reactants");
  MechanismCall call = classify_correlations(m.at(reactants[0], product), m.at(reactants[1], product), tol);
  call.reactants = reactants;
  return call;
}

}  // namespace tapkin::mechanism
