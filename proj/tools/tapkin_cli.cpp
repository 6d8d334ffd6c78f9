// tapkin command line: simulate, features, fit, rcdc, grid.
//
// Exit codes: 0 success, 1 invalid input (bad flags, schema or I/O errors),
// 2 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tapkin_c.h"

using json = nlohmann::json;

namespace {

struct Failure {
  int code;
};

int exit_code(tapkin_status s) {
  switch (s) {
    case TAPKIN_OK: return 0;
    case TAPKIN_ERR_VALIDATION:
    case TAPKIN_ERR_IO: return 1;
    default: return 2;
  }
}

void check(tapkin_status s, const char* what) {
  if (s == TAPKIN_OK) return;
  std::cerr << "tapkin " << what << ": " << tapkin_last_error() << '\n';
  throw Failure{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "tapkin: " << msg << '\n';
  throw Failure{1};
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) usage_error("cannot open config '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) usage_error("config '" + path + "' must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    usage_error("config '" + path + "': " + e.what());
  }
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  tapkin_string_free(s);
  return out;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) usage_error(std::string(flag) + ": empty list");
  return out;
}

struct FeatureSource {
  std::string features;
  std::string preset;
};

struct Features {
  tapkin_features* h = nullptr;
  ~Features() { tapkin_features_free(h); }
};

void open_features(const FeatureSource& src, const json& sim_cfg, Features& out) {
  if (!src.features.empty() && !src.preset.empty()) usage_error("--features and --preset are exclusive");
  if (!src.features.empty()) {
    check(tapkin_features_load(src.features.c_str(), &out.h), "features");
    return;
  }
  json cfg = sim_cfg;
  if (!src.preset.empty()) cfg["preset"] = src.preset;
  if (!cfg.contains("preset")) usage_error("one of --features or --preset is required");
  check(tapkin_simulate(cfg.dump().c_str(), &out.h), "simulate");
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    std::cerr << "tapkin: cannot write '" << path << "'\n";
    throw Failure{1};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tapkin: thin-zone TAP kinetics: simulation, sparse regression and mechanism correlation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tapkin_version()));

  std::string config_path, out_path;
  std::uint64_t seed = 0;
  FeatureSource src;

  auto* sim = app.add_subcommand("simulate", "simulate a pulse and write the thin-zone features CSV");
  std::string flux_out;
  bool list = false;
  sim->add_option("--preset", src.preset, "named configuration (see --list)");
  sim->add_option("--config", config_path, "JSON with preset/reactor/mechanism overrides")->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "features CSV");
  sim->add_option("--flux-out", flux_out, "outlet flux CSV");
  sim->add_option("--seed", seed, "recorded in the outputs");
  sim->add_flag("--list", list, "print the presets and exit");

  auto* feat = app.add_subcommand("features", "baseline-correct and calibrate a flux CSV");
  std::string flux_in;
  feat->add_option("--flux", flux_in, "flux CSV (sidecar <file>.calib optional)")->required();
  feat->add_option("--out", out_path, "corrected flux CSV")->required();
  feat->add_option("--seed", seed, "recorded in the outputs");

  auto* fit = app.add_subcommand("fit", "fit the rate-reactivity model of one gas");
  std::string gas, terms, method, truth, lambda;
  int folds = 0;
  bool random_folds = false, standardize = false;
  fit->add_option("--features", src.features, "features CSV");
  fit->add_option("--preset", src.preset, "simulate a preset instead of reading features");
  fit->add_option("--config", config_path, "JSON fit config")->check(CLI::ExistingFile);
  fit->add_option("--gas", gas, "response gas (default: first gas)");
  fit->add_option("--terms", terms, "full | custom:C,CU,U,...");
  fit->add_option("--method", method, "ols | lasso | scad")->check(CLI::IsMember({"ols", "lasso", "scad"}));
  fit->add_option("--folds", folds, "cross-validation folds")->check(CLI::Range(2, 1000));
  fit->add_option("--lambda", lambda, "fixed penalty instead of cross-validation");
  fit->add_flag("--random-folds", random_folds, "shuffle rows into folds with --seed");
  fit->add_flag("--standardize", standardize, "penalize columns on unit variance");
  fit->add_option("--truth", truth, "known coefficients, comma separated, for NPV/RMSE");
  fit->add_option("--seed", seed, "fold shuffling seed");
  fit->add_option("--out", out_path, "JSON report (default: stdout)");

  auto* rc = app.add_subcommand("rcdc", "rate-concentration dependency correlations and mechanism call");
  std::string reactants, product, csv_out;
  double trim = -1.0, floor_rel = -1.0;
  rc->add_option("--features", src.features, "features CSV");
  rc->add_option("--preset", src.preset, "simulate a preset instead of reading features");
  rc->add_option("--config", config_path, "JSON rcdc config")->check(CLI::ExistingFile);
  rc->add_option("--reactants", reactants, "e.g. O2:sqrt,CO (default)");
  rc->add_option("--product", product, "product gas (default CO2)");
  rc->add_option("--trim", trim, "winsorizing fraction; enables the robust correlation")->check(CLI::Range(0.0, 0.25));
  rc->add_option("--floor", floor_rel, "reactant concentration floor relative to its maximum")
      ->check(CLI::Range(0.0, 1.0));
  rc->add_option("--seed", seed, "recorded in the outputs");
  rc->add_option("--out", out_path, "JSON report (default: stdout)");
  rc->add_option("--csv", csv_out, "correlation matrix CSV");

  auto* gr = app.add_subcommand("grid", "sweep rate constants and write the correlation grid CSV");
  std::string sweep, axis1, axis2;
  bool coarse = false;
  unsigned threads = 0;
  gr->add_option("--sweep", sweep, "er-irrev | lh-irrev | lh-rev")
      ->check(CLI::IsMember({"er-irrev", "lh-irrev", "lh-rev"}));
  gr->add_option("--config", config_path, "JSON grid config")->check(CLI::ExistingFile);
  gr->add_option("--axis1", axis1, "comma-separated values (k_O2, or forward k_CO for lh-rev)");
  gr->add_option("--axis2", axis2, "comma-separated values (k_CO, or reverse k_CO for lh-rev)");
  gr->add_flag("--coarse", coarse, "5 x 5 grid instead of 49 x 49");
  gr->add_option("--threads", threads, "worker threads (0: all cores)");
  gr->add_option("--seed", seed, "recorded in the outputs");
  gr->add_option("--out", out_path, "grid CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  auto seeded = [&](const CLI::App* cmd, json& cfg) {
    if (cmd->count("--seed")) cfg["seed"] = seed;
  };

  try {
    json cfg = load_config(config_path);

    if (*sim) {
      if (list) {
        char* s = nullptr;
        check(tapkin_list_presets(&s), "simulate");
        std::cout << take_string(s) << '\n';
        return 0;
      }
      if (out_path.empty() && flux_out.empty()) usage_error("simulate: --out or --flux-out is required");
      if (!src.preset.empty()) cfg["preset"] = src.preset;
      seeded(sim, cfg);
      Features f;
      check(tapkin_simulate(cfg.dump().c_str(), &f.h), "simulate");
      if (!out_path.empty()) check(tapkin_features_write_csv(f.h, out_path.c_str()), "simulate");
      if (!flux_out.empty()) check(tapkin_features_write_flux_csv(f.h, flux_out.c_str()), "simulate");
      char* s = nullptr;
      check(tapkin_features_summary(f.h, &s), "simulate");
      std::cerr << take_string(s) << '\n';
      return 0;
    }

    if (*feat) {
      seeded(feat, cfg);
      char* report = nullptr;
      check(tapkin_preprocess_flux(flux_in.c_str(), out_path.c_str(), cfg.dump().c_str(), &report), "features");
      std::cout << take_string(report) << '\n';
      return 0;
    }

    if (*fit) {
      json sim_cfg = cfg.value("simulate", json::object());
      cfg.erase("simulate");
      if (!gas.empty()) cfg["gas"] = gas;
      if (!terms.empty()) cfg["terms"] = terms;
      json& pen = cfg["penalty"];
      if (pen.is_null()) pen = json::object();
      if (!method.empty()) pen["method"] = method;
      if (folds) pen["cv_folds"] = folds;
      if (!lambda.empty()) pen["lambda"] = parse_list(lambda, "--lambda").front();
      if (random_folds) pen["random_folds"] = true;
      if (standardize) pen["standardize"] = true;
      if (!truth.empty()) cfg["truth"] = parse_list(truth, "--truth");
      seeded(fit, cfg);
      Features f;
      open_features(src, sim_cfg, f);
      tapkin_fit* h = nullptr;
      check(tapkin_fit_run(f.h, cfg.dump().c_str(), &h), "fit");
      char* report = nullptr;
      const tapkin_status s = tapkin_fit_report(h, &report);
      tapkin_fit_free(h);
      check(s, "fit");
      emit(take_string(report), out_path);
      return 0;
    }

    if (*rc) {
      json sim_cfg = cfg.value("simulate", json::object());
      cfg.erase("simulate");
      if (!reactants.empty()) {
        json arr = json::array();
        std::stringstream ss(reactants);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto colon = item.find(':');
          const std::string name = item.substr(0, colon);
          const std::string mod = colon == std::string::npos ? "" : item.substr(colon + 1);
          if (name.empty() || (!mod.empty() && mod != "sqrt")) usage_error("--reactants: bad entry '" + item + "'");
          arr.push_back({{"gas", name}, {"sqrt", mod == "sqrt"}});
        }
        cfg["reactants"] = arr;
      }
      if (!product.empty()) cfg["product"] = product;
      if (trim >= 0.0) cfg["trim"] = trim;
      if (floor_rel >= 0.0) cfg["c_floor_rel"] = floor_rel;
      seeded(rc, cfg);
      Features f;
      open_features(src, sim_cfg, f);
      tapkin_rcdc* h = nullptr;
      check(tapkin_rcdc_run(f.h, cfg.dump().c_str(), &h), "rcdc");
      char* report = nullptr;
      tapkin_status s = tapkin_rcdc_report(h, &report);
      if (s == TAPKIN_OK && !csv_out.empty()) s = tapkin_rcdc_write_csv(h, csv_out.c_str());
      tapkin_rcdc_free(h);
      check(s, "rcdc");
      emit(take_string(report), out_path);
      return 0;
    }

    if (*gr) {
      if (!sweep.empty()) cfg["sweep"] = sweep;
      if (!cfg.contains("sweep")) usage_error("grid: --sweep is required");
      if (coarse) cfg["coarse"] = true;
      if (!axis1.empty()) cfg["axis1"] = parse_list(axis1, "--axis1");
      if (!axis2.empty()) cfg["axis2"] = parse_list(axis2, "--axis2");
      if (gr->count("--threads")) cfg["threads"] = threads;
      seeded(gr, cfg);
      tapkin_grid* h = nullptr;
      check(tapkin_grid_run(cfg.dump().c_str(), &h), "grid");
      const std::size_t invalid = tapkin_grid_invalid(h);
      const std::size_t cells = tapkin_grid_axis1_size(h) * tapkin_grid_axis2_size(h);
      const tapkin_status s = tapkin_grid_write_csv(h, out_path.c_str());
      tapkin_grid_free(h);
      check(s, "grid");
      std::cerr << cells << " cells, " << invalid << " invalid\n";
      return 0;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 1;
}
