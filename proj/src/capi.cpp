#include "tapkin_c.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tapkin/error.hpp"
#include "tapkin/features.hpp"
#include "tapkin/io.hpp"
#include "tapkin/mechanism.hpp"
#include "tapkin/reactor.hpp"
#include "tapkin/regress.hpp"

using tapkin::io::json;

struct tapkin_features {
  std::vector<tapkin::features::TransientFeatures> set;
  std::optional<tapkin::reactor::SimulationResult> sim;
  tapkin::features::IngestReport ingest;
  tapkin::io::Provenance prov;
};

struct tapkin_fit {
  tapkin::regress::RegressionFit fit;
  std::optional<tapkin::regress::SelectionMetrics> metrics;
  tapkin::io::Provenance prov;
};

struct tapkin_rcdc {
  tapkin::mechanism::RcdcMatrix matrix;
  tapkin::mechanism::MechanismCall call;
  std::string verdict;
  tapkin::io::Provenance prov;
};

struct tapkin_grid {
  tapkin::mechanism::CorrelationGrid grid;
  tapkin::io::Provenance prov;
};

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

thread_local std::string last_error;

template <class F>
tapkin_status guard(F&& body) {
  try {
    body();
    last_error.clear();
    return TAPKIN_OK;
  } catch (const tapkin::io::IoError& e) {
    last_error = e.what();
    return TAPKIN_ERR_IO;
  } catch (const tapkin::ValidationError& e) {
    last_error = e.what();
    return TAPKIN_ERR_VALIDATION;
  } catch (const tapkin::NumericalError& e) {
    last_error = e.what();
    return TAPKIN_ERR_NUMERICAL;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TAPKIN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TAPKIN_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return TAPKIN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw tapkin::ValidationError(std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_config(const char* text, const char* what) { return tapkin::io::parse_json(text ? text : "", what); }

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& what) {
  if (!j.is_object()) throw tapkin::ValidationError(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw tapkin::ValidationError(what + ": unknown field '" + key + "'");
  }
}

std::uint64_t seed_of(const json& j) {
  if (!j.contains("seed")) return 0;
  if (!j["seed"].is_number_unsigned()) throw tapkin::ValidationError("seed must be a non-negative integer");
  return j["seed"].get<std::uint64_t>();
}

template <class T>
T value_or(const json& j, const char* key, T fallback, const std::string& what) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw tapkin::ValidationError(what + ": field '" + key + "' has the wrong type");
  }
}

void write_stream(const std::string& path, const std::function<void(std::ostream&)>& emit) {
  std::ostringstream os;
  emit(os);
  tapkin::io::write_text_file(path, os.str());
}

std::vector<double> grid_axis(const json& j, const char* key, const std::vector<double>& fallback) {
  if (!j.contains(key)) return fallback;
  auto v = value_or<std::vector<double>>(j, key, {}, "grid config");
  if (v.empty()) throw tapkin::ValidationError(std::string("grid config: '") + key + "' is empty");
  return v;
}

}  // namespace

extern "C" {

const char* tapkin_version(void) { return tapkin::io::version(); }

const char* tapkin_last_error(void) { return last_error.c_str(); }

void tapkin_string_free(char* s) { std::free(s); }

tapkin_status tapkin_list_presets(char** json_out) {
  return guard([&] {
    require(json_out, "json_out");
    json arr = json::array();
    for (const auto& p : tapkin::reactor::presets()) arr.push_back({{"name", p.name}, {"description", p.description}});
    *json_out = dup_string(arr.dump(2));
  });
}

tapkin_status tapkin_simulate(const char* config_json, tapkin_features** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    const json cfg = parse_config(config_json, "simulation config");
    reject_unknown(cfg, {"preset", "reactor", "mechanism", "seed"}, "simulation config");
    const std::string name = value_or<std::string>(cfg, "preset", "inert", "simulation config");
    const auto& preset = tapkin::reactor::preset(name);
    auto config = preset.config;
    auto mech = preset.mechanism;
    if (cfg.contains("reactor")) tapkin::io::apply_json(cfg["reactor"], config);
    if (cfg.contains("mechanism")) tapkin::io::apply_json(cfg["mechanism"], mech);

    auto h = std::make_unique<tapkin_features>();
    h->sim = tapkin::reactor::simulate_pulse(config, mech);
    h->set = tapkin::features::extract_all(*h->sim);
    h->prov.seed = seed_of(cfg);
    h->prov.config = {{"mode", "simulate"},
                      {"preset", name},
                      {"reactor", tapkin::io::to_json(config)},
                      {"mechanism", tapkin::io::to_json(mech)}};
    *out = h.release();
  });
}

tapkin_status tapkin_features_load(const char* path, tapkin_features** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<tapkin_features>();
    h->set = tapkin::io::load_features_csv(path, &h->ingest);
    h->prov.config = {{"mode", "features"}, {"features_file", path}};
    *out = h.release();
  });
}

void tapkin_features_free(tapkin_features* f) { delete f; }

size_t tapkin_features_gas_count(const tapkin_features* f) { return f ? f->set.size() : 0; }

size_t tapkin_features_point_count(const tapkin_features* f) { return f && !f->set.empty() ? f->set[0].size() : 0; }

const char* tapkin_features_gas(const tapkin_features* f, size_t i) {
  return f && i < f->set.size() ? f->set[i].gas_id.c_str() : nullptr;
}

tapkin_status tapkin_features_series(const tapkin_features* f, const char* gas, const char* series, double* out,
                                     size_t capacity, size_t* count) {
  return guard([&] {
    require(f, "features");
    require(gas, "gas");
    require(series, "series");
    const auto& g = tapkin::features::find_gas(f->set, gas);
    const std::string s = series;
    const std::vector<double>* v = nullptr;
    if (s == "t") {
      v = &g.t;
    } else if (s == "rate") {
      v = &g.rate;
    } else if (s == "concentration") {
      v = &g.concentration;
    } else if (s == "uptake") {
      v = &g.uptake;
    } else {
      throw tapkin::ValidationError("unknown series '" + s + "' (t, rate, concentration, uptake)");
    }
    if (count) *count = v->size();
    if (out) std::copy_n(v->begin(), std::min(capacity, v->size()), out);
  });
}

tapkin_status tapkin_features_summary(const tapkin_features* f, char** json_out) {
  return guard([&] {
    require(f, "features");
    require(json_out, "json_out");
    json s;
    s["gases"] = json::array();
    for (const auto& g : f->set) s["gases"].push_back(g.gas_id);
    s["points"] = tapkin_features_point_count(f);
    s["interpolated"] = f->ingest.interpolated;
    if (f->sim) {
      s["mass_balance_defect"] = f->sim->mass_balance_defect;
      s["integrator"] = {{"steps", f->sim->integrator.steps},
                         {"rejected", f->sim->integrator.rejected},
                         {"jacobians", f->sim->integrator.jac_evals}};
      json moles = json::object();
      for (const auto& g : f->sim->gases) moles[g.gas] = g.moles_out;
      s["moles_out"] = moles;
    }
    *json_out = dup_string(s.dump(2));
  });
}

tapkin_status tapkin_features_write_csv(const tapkin_features* f, const char* path) {
  return guard([&] {
    require(f, "features");
    require(path, "path");
    write_stream(path, [&](std::ostream& os) { tapkin::io::write_features_csv(os, f->set, f->prov); });
  });
}

tapkin_status tapkin_features_write_flux_csv(const tapkin_features* f, const char* path) {
  return guard([&] {
    require(f, "features");
    require(path, "path");
    if (!f->sim) throw tapkin::ValidationError("outlet flux is only available for simulated features");
    tapkin::io::FluxTable table;
    table.t = f->sim->t;
    for (const auto& g : f->sim->gases) {
      table.gases.push_back(g.gas);
      table.flux.push_back(g.outlet_flux);
      table.calibration.emplace_back();
    }
    write_stream(path, [&](std::ostream& os) { tapkin::io::write_flux_csv(os, table, f->prov); });
  });
}

tapkin_status tapkin_preprocess_flux(const char* in_path, const char* out_path, const char* config_json,
                                     char** report_json) {
  return guard([&] {
    require(in_path, "in_path");
    require(out_path, "out_path");
    const json cfg = parse_config(config_json, "preprocess config");
    reject_unknown(cfg, {"seed"}, "preprocess config");
    auto table = tapkin::io::load_flux_csv(in_path);
    const auto res = tapkin::io::preprocess_flux(table);
    json corr = json::array();
    for (const auto& c : res.corrections) {
      corr.push_back({{"gas", c.gas},
                      {"mu", c.mu},
                      {"baseline_start", c.baseline_start},
                      {"baseline_end", c.baseline_end},
                      {"baseline_samples", c.baseline_samples},
                      {"baseline", tapkin::io::round12(c.baseline)}});
    }
    tapkin::io::Provenance prov;
    prov.seed = seed_of(cfg);
    prov.config = {{"mode", "features"}, {"flux_file", in_path}, {"corrections", corr}};
    write_stream(out_path, [&](std::ostream& os) { tapkin::io::write_flux_csv(os, res.table, prov); });
    if (report_json) {
      json r = {{"corrections", corr}, {"warnings", res.warnings}};
      *report_json = dup_string(r.dump(2));
    }
  });
}

tapkin_status tapkin_fit_run(const tapkin_features* f, const char* fit_json, tapkin_fit** out) {
  return guard([&] {
    require(f, "features");
    require(out, "out");
    *out = nullptr;
    const json cfg = parse_config(fit_json, "fit config");
    reject_unknown(cfg, {"gas", "terms", "penalty", "truth", "seed"}, "fit config");
    if (f->set.empty()) throw tapkin::ValidationError("features hold no gases");
    const std::string gas = value_or<std::string>(cfg, "gas", f->set[0].gas_id, "fit config");
    const std::string terms_spec = value_or<std::string>(cfg, "terms", "full", "fit config");
    tapkin::regress::PenaltySpec pen;
    if (cfg.contains("penalty")) tapkin::io::apply_json(cfg["penalty"], pen);
    if (cfg.contains("seed")) pen.seed = seed_of(cfg);
    pen.validate();

    const auto& target = tapkin::features::find_gas(f->set, gas);
    const auto terms = tapkin::regress::parse_terms(terms_spec, gas);
    const auto dm = tapkin::regress::build_design_matrix(f->set, terms, target.rate);

    auto h = std::make_unique<tapkin_fit>();
    h->fit = tapkin::regress::fit(dm, pen);
    json fit_cfg = {{"gas", gas}, {"terms", terms_spec}, {"penalty", tapkin::io::to_json(pen)}};
    if (cfg.contains("truth")) {
      const auto truth = value_or<std::vector<double>>(cfg, "truth", {}, "fit config");
      if (truth.size() != terms.size()) {
        throw tapkin::ValidationError("fit config: truth has " + std::to_string(truth.size()) + " values for " +
                                      std::to_string(terms.size()) + " terms");
      }
      h->metrics = tapkin::regress::compute_selection_metrics(h->fit, truth, pen.zero_tol);
      fit_cfg["truth"] = truth;
    }
    h->prov.seed = pen.seed;
    h->prov.config = f->prov.config;
    h->prov.config["fit"] = fit_cfg;
    *out = h.release();
  });
}

void tapkin_fit_free(tapkin_fit* fit) { delete fit; }

size_t tapkin_fit_term_count(const tapkin_fit* fit) { return fit ? fit->fit.terms.size() : 0; }

const char* tapkin_fit_term(const tapkin_fit* fit, size_t i) {
  return fit && i < fit->fit.terms.size() ? fit->fit.terms[i].c_str() : nullptr;
}

double tapkin_fit_beta(const tapkin_fit* fit, size_t i) {
  return fit && i < fit->fit.terms.size() ? fit->fit.beta(static_cast<Eigen::Index>(i)) : kNaN;
}

double tapkin_fit_lambda(const tapkin_fit* fit) { return fit ? fit->fit.lambda_chosen : kNaN; }

double tapkin_fit_npv(const tapkin_fit* fit) {
  return fit && fit->metrics && fit->metrics->npv ? *fit->metrics->npv : kNaN;
}

tapkin_status tapkin_fit_report(const tapkin_fit* fit, char** json_out) {
  return guard([&] {
    require(fit, "fit");
    require(json_out, "json_out");
    *json_out = dup_string(tapkin::io::dump_report(tapkin::io::fit_report(fit->fit, fit->metrics, fit->prov)));
  });
}

tapkin_status tapkin_fit_write_report(const tapkin_fit* fit, const char* path) {
  return guard([&] {
    require(fit, "fit");
    require(path, "path");
    tapkin::io::write_text_file(path,
                                tapkin::io::dump_report(tapkin::io::fit_report(fit->fit, fit->metrics, fit->prov)));
  });
}

tapkin_status tapkin_rcdc_run(const tapkin_features* f, const char* rcdc_json, tapkin_rcdc** out) {
  using tapkin::features::RcdRole;
  using tapkin::features::RcdTransform;
  return guard([&] {
    require(f, "features");
    require(out, "out");
    *out = nullptr;
    const std::string what = "rcdc config";
    const json cfg = parse_config(rcdc_json, what.c_str());
    reject_unknown(cfg, {"reactants", "product", "trim", "c_floor_rel", "seed"}, what);

    std::vector<std::pair<std::string, bool>> reactants;
    if (cfg.contains("reactants")) {
      for (const auto& r : cfg["reactants"]) {
        reject_unknown(r, {"gas", "sqrt"}, what + " reactant");
        reactants.emplace_back(value_or<std::string>(r, "gas", "", what), value_or<bool>(r, "sqrt", false, what));
      }
    } else {
      reactants = {{"O2", true}, {"CO", false}};
    }
    const std::string product = value_or<std::string>(cfg, "product", "CO2", what);
    const double floor_rel = value_or<double>(cfg, "c_floor_rel", tapkin::features::kDefaultRelativeFloor, what);
    if (!(floor_rel >= 0.0 && floor_rel < 1.0)) throw tapkin::ValidationError(what + ": c_floor_rel must lie in [0, 1)");
    std::optional<double> trim;
    if (cfg.contains("trim") && !cfg["trim"].is_null()) trim = value_or<double>(cfg, "trim", 0.0, what);

    std::vector<tapkin::features::RcdSeries> series;
    std::vector<std::string> reactant_names;
    for (const auto& [gas, root] : reactants) {
      const auto& feat = tapkin::features::find_gas(f->set, gas);
      double c_max = 0.0;
      for (double c : feat.concentration)
        if (std::isfinite(c)) c_max = std::max(c_max, c);
      series.push_back(tapkin::features::compute_rcd(feat, RcdRole::Reactant,
                                                     root ? RcdTransform::Sqrt : RcdTransform::Identity,
                                                     floor_rel * c_max));
      reactant_names.push_back(gas);
    }
    series.push_back(tapkin::features::compute_rcd(tapkin::features::find_gas(f->set, product), RcdRole::Product,
                                                   RcdTransform::Identity));

    auto h = std::make_unique<tapkin_rcdc>();
    h->matrix = tapkin::mechanism::rcdc(series, trim);
    if (reactant_names.size() == 2) {
      h->call = tapkin::mechanism::classify_mechanism(h->matrix, reactant_names, product);
    } else {
      h->call.notes = "classification needs exactly two reactants";
    }
    h->verdict = tapkin::mechanism::to_string(h->call.verdict);
    json rs = json::array();
    for (const auto& [gas, root] : reactants) rs.push_back({{"gas", gas}, {"sqrt", root}});
    h->prov.seed = seed_of(cfg);
    h->prov.config = f->prov.config;
    h->prov.config["rcdc"] = {{"reactants", rs},
                              {"product", product},
                              {"c_floor_rel", floor_rel},
                              {"trim", trim ? json(*trim) : json(nullptr)}};
    *out = h.release();
  });
}

void tapkin_rcdc_free(tapkin_rcdc* m) { delete m; }

const char* tapkin_rcdc_verdict(const tapkin_rcdc* m) { return m ? m->verdict.c_str() : nullptr; }

double tapkin_rcdc_corr(const tapkin_rcdc* m, const char* a, const char* b) {
  if (!m || !a || !b) return kNaN;
  try {
    return m->matrix.at(a, b);
  } catch (const std::exception& e) {
    last_error = e.what();
    return kNaN;
  }
}

tapkin_status tapkin_rcdc_report(const tapkin_rcdc* m, char** json_out) {
  return guard([&] {
    require(m, "rcdc");
    require(json_out, "json_out");
    *json_out = dup_string(tapkin::io::dump_report(tapkin::io::rcdc_report(m->matrix, m->call, m->prov)));
  });
}

tapkin_status tapkin_rcdc_write_csv(const tapkin_rcdc* m, const char* path) {
  return guard([&] {
    require(m, "rcdc");
    require(path, "path");
    write_stream(path, [&](std::ostream& os) { tapkin::io::write_rcdc_csv(os, m->matrix, m->prov); });
  });
}

tapkin_status tapkin_grid_run(const char* grid_json, tapkin_grid** out) {
  using namespace tapkin::mechanism;
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    const std::string what = "grid config";
    const json cfg = parse_config(grid_json, what.c_str());
    reject_unknown(cfg, {"sweep", "axis1", "axis2", "coarse", "reactor", "n_sites", "k_co2", "k_o", "threads", "shared_o2_sites", "seed"},
                   what);
    if (!cfg.contains("sweep")) throw tapkin::ValidationError(what + ": 'sweep' is required");
    const SweepKind kind = sweep_kind_from_string(value_or<std::string>(cfg, "sweep", "", what));
    const bool coarse = value_or<bool>(cfg, "coarse", false, what);
    const auto fallback = coarse ? coarse_k_grid() : default_k_grid();
    const auto axis1 = grid_axis(cfg, "axis1", fallback);
    const auto axis2 = grid_axis(cfg, "axis2", fallback);

    SweepOptions opts;
    opts.config = tapkin::reactor::preset("inert").config;
    if (cfg.contains("reactor")) tapkin::io::apply_json(cfg["reactor"], opts.config);
    opts.n_sites = value_or<double>(cfg, "n_sites", opts.n_sites, what);
    opts.k_co2 = value_or<double>(cfg, "k_co2", opts.k_co2, what);
    opts.k_o_fixed = value_or<double>(cfg, "k_o", opts.k_o_fixed, what);
    opts.threads = value_or<unsigned>(cfg, "threads", 0u, what);
    opts.shared_o2_sites = value_or<bool>(cfg, "shared_o2_sites", false, what);

    auto h = std::make_unique<tapkin_grid>();
    h->grid = kind == SweepKind::LhReversible ? grid_sweep_reversible(axis1, axis2, opts)
                                              : grid_sweep_irreversible(kind, axis1, axis2, opts);
    h->prov.seed = seed_of(cfg);
    h->prov.config = {{"mode", "grid"},
                      {"sweep", to_string(kind)},
                      {"axis1", axis1},
                      {"axis2", axis2},
                      {"reactor", tapkin::io::to_json(opts.config)},
                      {"n_sites", opts.n_sites},
                      {"k_co2", opts.k_co2},
                      {"shared_o2_sites", opts.shared_o2_sites}};
    if (kind == SweepKind::LhReversible) h->prov.config["k_o"] = opts.k_o_fixed;
    *out = h.release();
  });
}

void tapkin_grid_free(tapkin_grid* g) { delete g; }

size_t tapkin_grid_axis1_size(const tapkin_grid* g) { return g ? g->grid.axis1.size() : 0; }

size_t tapkin_grid_axis2_size(const tapkin_grid* g) { return g ? g->grid.axis2.size() : 0; }

size_t tapkin_grid_invalid(const tapkin_grid* g) { return g ? g->grid.invalid : 0; }

double tapkin_grid_cell(const tapkin_grid* g, const char* pair, size_t i, size_t j) {
  if (!g || !pair || i >= g->grid.axis1.size() || j >= g->grid.axis2.size()) return kNaN;
  for (std::size_t p = 0; p < g->grid.pairs.size(); ++p)
    if (g->grid.pairs[p] == pair) return g->grid.at(p, i, j);
  return kNaN;
}

tapkin_status tapkin_grid_write_csv(const tapkin_grid* g, const char* path) {
  return guard([&] {
    require(g, "grid");
    require(path, "path");
    write_stream(path, [&](std::ostream& os) { tapkin::io::write_grid_csv(os, g->grid, g->prov); });
  });
}

}  // extern "C"
