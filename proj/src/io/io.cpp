#include "tapkin/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace tapkin::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool skip_line(const std::string& line) {
  return line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos;
}

std::optional<double> to_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s.empty()) return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

void write_provenance(std::ostream& out, const Provenance& prov) {
  out << "# tapkin " << version() << '\n';
  out << "# seed: " << prov.seed << '\n';
  out << "# config: " << prov.config.dump() << '\n';
}

json rounded(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

json rounded(std::span<const double> v) {
  json arr = json::array();
  for (double x : v) arr.push_back(rounded(x));
  return arr;
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": field '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ValidationError(what + ": unknown field '" + key + "'");
    }
  }
}

}  // namespace

const char* version() { return TAPKIN_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

void FluxTable::validate() const {
  if (flux.size() != gases.size()) throw ValidationError("flux table: " + std::to_string(gases.size()) + " gases but " +
                                                         std::to_string(flux.size()) + " columns");
  if (calibration.size() != gases.size()) throw ValidationError("flux table: calibration missing for some gases");
  for (std::size_t g = 0; g < gases.size(); ++g) {
    if (flux[g].size() != t.size()) {
      throw ValidationError("flux table: column '" + gases[g] + "' has " + std::to_string(flux[g].size()) +
                            " samples, time has " + std::to_string(t.size()));
    }
    for (std::size_t h = 0; h < g; ++h)
      if (gases[h] == gases[g]) throw ValidationError("flux table: gas '" + gases[g] + "' appears twice");
  }
  features::check_uniform_grid(t, "flux table");
}

PreprocessResult preprocess_flux(const FluxTable& table) {
  table.validate();
  PreprocessResult res;
  res.table = table;
  const double t0 = table.t.front();
  const double t1 = table.t.back();
  for (std::size_t g = 0; g < table.gases.size(); ++g) {
    const auto& cal = table.calibration[g];
    const std::string& gas = table.gases[g];
    if (!(cal.mu > 0.0) || !std::isfinite(cal.mu)) {
      throw ValidationError("calibration of '" + gas + "': mu must be > 0, got " + format_number(cal.mu));
    }
    Correction c;
    c.gas = gas;
    c.mu = cal.mu;
    c.baseline_start = cal.baseline_start.value_or(t0);
    c.baseline_end = cal.baseline_end.value_or(t0 + 0.05 * (t1 - t0));
    if (!(c.baseline_end > c.baseline_start) || c.baseline_start < t0 || c.baseline_end > t1) {
      throw ValidationError("calibration of '" + gas + "': baseline window [" + format_number(c.baseline_start) + ", " +
                            format_number(c.baseline_end) + "] is empty or outside the record [" + format_number(t0) +
                            ", " + format_number(t1) + "]");
    }
    const auto& col = table.flux[g];
    double sum = 0.0;
    double col_max = 0.0;
    for (std::size_t k = 0; k < col.size(); ++k) {
      if (!std::isfinite(col[k])) throw ValidationError("flux column '" + gas + "' row " + std::to_string(k + 1) + " is not finite");
      col_max = std::max(col_max, std::abs(col[k]));
      if (table.t[k] >= c.baseline_start && table.t[k] <= c.baseline_end) {
        sum += col[k];
        ++c.baseline_samples;
      }
    }
    if (c.baseline_samples == 0) {
      throw ValidationError("calibration of '" + gas + "': baseline window contains no samples");
    }
    c.baseline = sum / static_cast<double>(c.baseline_samples);
    if (std::abs(c.baseline) > 0.1 * col_max) {
      res.warnings.push_back("gas '" + gas + "': baseline mean " + format_number(c.baseline) +
                             " exceeds 10% of the column maximum; the window may overlap the pulse");
    }
    auto& out = res.table.flux[g];
    for (double& v : out) v = c.mu * (v - c.baseline);
    res.table.calibration[g] = CalibrationSpec{1.0, std::nullopt, std::nullopt};
    res.corrections.push_back(c);
  }
  return res;
}

FluxTable read_flux_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    header = split(line);
    break;
  }
  if (header.empty()) throw ValidationError("flux CSV: empty file (expected header 'time_s,<gas>,...')");
  if (header[0] != "time_s") {
    throw ValidationError("flux CSV line " + std::to_string(line_no) + ", column 1: expected 'time_s', found '" +
                          header[0] + "'");
  }
  if (header.size() < 2) throw ValidationError("flux CSV line " + std::to_string(line_no) + ": no gas columns");
  FluxTable table;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw ValidationError("flux CSV column " + std::to_string(c + 1) + ": empty gas label");
    table.gases.push_back(header[c]);
  }
  table.flux.resize(table.gases.size());
  table.calibration.resize(table.gases.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ValidationError("flux CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = to_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ValidationError("flux CSV line " + std::to_string(line_no) + ", column '" + header[c] +
                              "': expected a finite number, found '" + cells[c] + "'");
      }
      if (c == 0) {
        table.t.push_back(*v);
      } else {
        table.flux[c - 1].push_back(*v);
      }
    }
  }
  table.validate();
  return table;
}

void read_calibration(std::istream& in, FluxTable& table) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split(line);
    const std::string where = "calibration line " + std::to_string(line_no);
    const auto it = std::find(table.gases.begin(), table.gases.end(), cells[0]);
    if (it == table.gases.end()) throw ValidationError(where + ": gas '" + cells[0] + "' is not a flux column");
    auto& cal = table.calibration[static_cast<std::size_t>(it - table.gases.begin())];
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const auto eq = cells[i].find('=');
      if (eq == std::string::npos) throw ValidationError(where + ": expected key=value, found '" + cells[i] + "'");
      const std::string key = trim(cells[i].substr(0, eq));
      const auto v = to_double(trim(cells[i].substr(eq + 1)));
      if (!v || !std::isfinite(*v)) throw ValidationError(where + ": '" + key + "' is not a finite number");
      if (key == "mu") {
        cal.mu = *v;
      } else if (key == "baseline_start") {
        cal.baseline_start = *v;
      } else if (key == "baseline_end") {
        cal.baseline_end = *v;
      } else {
        throw ValidationError(where + ": unknown key '" + key + "'");
      }
    }
  }
}

FluxTable load_flux_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open flux file '" + path + "'");
  FluxTable table = read_flux_csv(in);
  const std::string sidecar = path + ".calib";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream cal(sidecar);
    if (!cal) throw IoError("cannot open calibration file '" + sidecar + "'");
    read_calibration(cal, table);
  }
  return table;
}

std::vector<features::TransientFeatures> load_features_csv(const std::string& path, features::IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open features file '" + path + "'");
  return features::ingest_features(in, report);
}

void write_features_csv(std::ostream& out, std::span<const features::TransientFeatures> set, const Provenance& prov) {
  if (set.empty()) throw ValidationError("write_features_csv: no gases");
  const auto& t = set.front().t;
  for (const auto& f : set) {
    if (f.t != t || f.rate.size() != t.size() || f.concentration.size() != t.size() || f.uptake.size() != t.size()) {
      throw ValidationError("write_features_csv: gas '" + f.gas_id + "' is not on the shared time grid");
    }
  }
  write_provenance(out, prov);
  out << "time_s";
  for (const auto& f : set) out << ",r_" << f.gas_id << ",C_" << f.gas_id << ",U_" << f.gas_id;
  out << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << format_number(t[k]);
    for (const auto& f : set) {
      out << ',' << format_number(f.rate[k]) << ',' << format_number(f.concentration[k]) << ','
          << format_number(f.uptake[k]);
    }
    out << '\n';
  }
}

void write_flux_csv(std::ostream& out, const FluxTable& table, const Provenance& prov) {
  write_provenance(out, prov);
  out << "time_s";
  for (const auto& g : table.gases) out << ',' << g;
  out << '\n';
  for (std::size_t k = 0; k < table.t.size(); ++k) {
    out << format_number(table.t[k]);
    for (const auto& col : table.flux) out << ',' << format_number(col[k]);
    out << '\n';
  }
}

void write_grid_csv(std::ostream& out, const mechanism::CorrelationGrid& grid, const Provenance& prov) {
  write_provenance(out, prov);
  out << "# sweep: " << mechanism::to_string(grid.kind) << '\n';
  out << "# axes: " << grid.axis1_name << ',' << grid.axis2_name << '\n';
  out << "k_axis1,k_axis2";
  for (const auto& p : grid.pairs) out << ',' << p;
  out << '\n';
  for (std::size_t i = 0; i < grid.axis1.size(); ++i) {
    for (std::size_t j = 0; j < grid.axis2.size(); ++j) {
      out << format_number(grid.axis1[i]) << ',' << format_number(grid.axis2[j]);
      for (std::size_t p = 0; p < grid.pairs.size(); ++p) out << ',' << format_number(grid.at(p, i, j));
      out << '\n';
    }
  }
}

mechanism::CorrelationGrid read_grid_csv(std::istream& in) {
  mechanism::CorrelationGrid grid;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# sweep: ", 0) == 0) grid.kind = mechanism::sweep_kind_from_string(trim(line.substr(9)));
    if (line.rfind("# axes: ", 0) == 0) {
      const auto names = split(line.substr(8));
      if (names.size() == 2) {
        grid.axis1_name = names[0];
        grid.axis2_name = names[1];
      }
    }
    if (skip_line(line)) continue;
    header = split(line);
    break;
  }
  if (header.size() < 3 || header[0] != "k_axis1" || header[1] != "k_axis2") {
    throw ValidationError("grid CSV line " + std::to_string(line_no) + ": expected header 'k_axis1,k_axis2,corr_...'");
  }
  grid.pairs.assign(header.begin() + 2, header.end());
  std::vector<double> a1, a2;
  std::vector<std::vector<double>> vals(grid.pairs.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ValidationError("grid CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = to_double(cells[c]);
      if (!v || (c < 2 && !std::isfinite(*v))) {
        throw ValidationError("grid CSV line " + std::to_string(line_no) + ", column '" + header[c] +
                              "': cannot parse '" + cells[c] + "'");
      }
      row.push_back(*v);
    }
    a1.push_back(row[0]);
    a2.push_back(row[1]);
    for (std::size_t p = 0; p < grid.pairs.size(); ++p) vals[p].push_back(row[2 + p]);
  }
  if (a1.empty()) throw ValidationError("grid CSV: no rows");
  for (double v : a1)
    if (grid.axis1.empty() || grid.axis1.back() != v) grid.axis1.push_back(v);
  const std::size_t n2 = a1.size() / grid.axis1.size();
  grid.axis2.assign(a2.begin(), a2.begin() + static_cast<std::ptrdiff_t>(n2));
  if (grid.axis1.size() * n2 != a1.size()) throw ValidationError("grid CSV: rows do not form a full grid");
  for (std::size_t r = 0; r < a1.size(); ++r) {
    if (a1[r] != grid.axis1[r / n2] || a2[r] != grid.axis2[r % n2]) {
      throw ValidationError("grid CSV row " + std::to_string(r + 1) + ": cells are not in axis1-major order");
    }
  }
  grid.cells = std::move(vals);
  for (std::size_t c = 0; c < a1.size(); ++c) {
    for (const auto& p : grid.cells)
      if (std::isnan(p[c])) {
        ++grid.invalid;
        break;
      }
  }
  return grid;
}

void write_rcdc_csv(std::ostream& out, const mechanism::RcdcMatrix& m, const Provenance& prov) {
  write_provenance(out, prov);
  out << "# aligned points: " << m.n_points << '\n';
  out << "rcd";
  for (const auto& l : m.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out << m.labels[i];
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      out << ',' << format_number(m.corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
}

json fit_report(const regress::RegressionFit& fit, const std::optional<regress::SelectionMetrics>& metrics,
                const Provenance& prov) {
  json r;
  r["tool"] = std::string("tapkin ") + version();
  r["seed"] = prov.seed;
  r["config"] = prov.config;
  r["method"] = regress::to_string(fit.method);
  json coefs = json::array();
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    coefs.push_back({{"term", fit.terms[j]},
                     {"beta", rounded(fit.beta(static_cast<Eigen::Index>(j)))},
                     {"selected", static_cast<bool>(fit.selected[j])}});
  }
  r["coefficients"] = coefs;
  r["intercept"] = rounded(fit.intercept);
  r["lambda"] = rounded(fit.lambda_chosen);
  r["lambda_grid"] = rounded(fit.lambda_grid);
  r["cv_mse"] = rounded(fit.cv_curve);
  r["residual_rmse"] = rounded(fit.residual_rmse);
  r["objective"] = rounded(fit.objective);
  r["iterations"] = fit.iterations;
  r["warnings"] = fit.warnings;
  if (metrics) {
    json m;
    m["npv"] = metrics->npv ? rounded(*metrics->npv) : json(nullptr);
    m["coef_rmse"] = rounded(metrics->coef_rmse);
    m["true_negatives"] = metrics->true_negatives;
    m["predicted_negatives"] = metrics->predicted_negatives;
    r["selection"] = m;
  }
  return r;
}

json rcdc_report(const mechanism::RcdcMatrix& m, const mechanism::MechanismCall& call, const Provenance& prov) {
  json r;
  r["tool"] = std::string("tapkin ") + version();
  r["seed"] = prov.seed;
  r["config"] = prov.config;
  r["labels"] = m.labels;
  r["aligned_points"] = m.n_points;
  r["correlation_kind"] = m.trim ? "robust" : "pearson";
  r["trim"] = m.trim ? json(*m.trim) : json(nullptr);
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.corr.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.corr.cols(); ++j) row.push_back(rounded(m.corr(i, j)));
    rows.push_back(row);
  }
  r["correlation"] = rows;
  r["verdict"] = mechanism::to_string(call.verdict);
  r["reactants"] = call.reactants;
  r["reactant_product_correlation"] = rounded(call.correlations);
  r["notes"] = call.notes;
  return r;
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

json to_json(const reactor::ReactorConfig& c) {
  return {{"length", c.length},
          {"porosity", c.porosity},
          {"diffusivity", c.diffusivity},
          {"pulse_moles", c.pulse_moles},
          {"t_end", c.t_end},
          {"dt_out", c.dt_out},
          {"n_cells", c.n_cells},
          {"catalyst_cell", c.thin_zone()},
          {"rtol", c.rtol},
          {"atol", c.atol}};
}

json to_json(const reactor::MechanismSpec& m) {
  return {{"kind", reactor::to_string(m.kind)},
          {"k_forward", m.k_forward},
          {"k_reverse", m.k_reverse},
          {"n_sites", m.n_sites},
          {"co_delay", m.co_delay},
          {"shared_o2_sites", m.shared_o2_sites}};
}

json to_json(const regress::PenaltySpec& p) {
  json j = {{"method", regress::to_string(p.method)},
            {"a", p.a},
            {"cv_folds", p.cv_folds},
            {"grid_size", p.grid_size},
            {"grid_ratio", p.grid_ratio},
            {"seed", p.seed},
            {"random_folds", p.random_folds},
            {"standardize", p.standardize},
            {"max_iter", p.max_iter},
            {"tol", p.tol},
            {"zero_tol", p.zero_tol}};
  j["lambda"] = p.lambda ? json(*p.lambda) : json(nullptr);
  if (!p.lambda_grid.empty()) j["lambda_grid"] = p.lambda_grid;
  return j;
}

void apply_json(const json& j, reactor::ReactorConfig& c) {
  const std::string what = "reactor config";
  reject_unknown(j, {"length", "porosity", "diffusivity", "pulse_moles", "t_end", "dt_out", "n_cells", "catalyst_cell",
                     "rtol", "atol"},
                 what);
  if (j.contains("length")) c.length = get_field<double>(j, "length", what);
  if (j.contains("porosity")) c.porosity = get_field<double>(j, "porosity", what);
  if (j.contains("diffusivity")) c.diffusivity = get_field<double>(j, "diffusivity", what);
  if (j.contains("pulse_moles")) c.pulse_moles = get_field<double>(j, "pulse_moles", what);
  if (j.contains("t_end")) c.t_end = get_field<double>(j, "t_end", what);
  if (j.contains("dt_out")) c.dt_out = get_field<double>(j, "dt_out", what);
  if (j.contains("n_cells")) {
    c.n_cells = get_field<std::size_t>(j, "n_cells", what);
    c.catalyst_cell.reset();
  }
  if (j.contains("catalyst_cell")) {
    if (j["catalyst_cell"].is_null()) {
      c.catalyst_cell.reset();
    } else {
      c.catalyst_cell = get_field<std::size_t>(j, "catalyst_cell", what);
    }
  }
  if (j.contains("rtol")) c.rtol = get_field<double>(j, "rtol", what);
  if (j.contains("atol")) c.atol = get_field<double>(j, "atol", what);
}

void apply_json(const json& j, reactor::MechanismSpec& m) {
  const std::string what = "mechanism config";
  reject_unknown(j, {"kind", "k_forward", "k_reverse", "n_sites", "co_delay", "shared_o2_sites"}, what);
  if (j.contains("kind")) m.kind = reactor::mechanism_kind_from_string(get_field<std::string>(j, "kind", what));
  if (j.contains("k_forward")) m.k_forward = get_field<std::map<std::string, double>>(j, "k_forward", what);
  if (j.contains("k_reverse")) m.k_reverse = get_field<std::map<std::string, double>>(j, "k_reverse", what);
  if (j.contains("n_sites")) m.n_sites = get_field<double>(j, "n_sites", what);
  if (j.contains("co_delay")) m.co_delay = get_field<double>(j, "co_delay", what);
  if (j.contains("shared_o2_sites")) m.shared_o2_sites = get_field<bool>(j, "shared_o2_sites", what);
}

void apply_json(const json& j, regress::PenaltySpec& p) {
  const std::string what = "penalty config";
  reject_unknown(j, {"method", "lambda", "a", "cv_folds", "lambda_grid", "grid_size", "grid_ratio", "seed",
                     "random_folds", "standardize", "max_iter", "tol", "zero_tol"},
                 what);
  if (j.contains("method")) p.method = regress::method_from_string(get_field<std::string>(j, "method", what));
  if (j.contains("lambda")) {
    if (j["lambda"].is_null()) {
      p.lambda.reset();
    } else {
      p.lambda = get_field<double>(j, "lambda", what);
    }
  }
  if (j.contains("a")) p.a = get_field<double>(j, "a", what);
  if (j.contains("cv_folds")) p.cv_folds = get_field<int>(j, "cv_folds", what);
  if (j.contains("lambda_grid")) p.lambda_grid = get_field<std::vector<double>>(j, "lambda_grid", what);
  if (j.contains("grid_size")) p.grid_size = get_field<std::size_t>(j, "grid_size", what);
  if (j.contains("grid_ratio")) p.grid_ratio = get_field<double>(j, "grid_ratio", what);
  if (j.contains("seed")) p.seed = get_field<std::uint64_t>(j, "seed", what);
  if (j.contains("random_folds")) p.random_folds = get_field<bool>(j, "random_folds", what);
  if (j.contains("standardize")) p.standardize = get_field<bool>(j, "standardize", what);
  if (j.contains("max_iter")) p.max_iter = get_field<std::size_t>(j, "max_iter", what);
  if (j.contains("tol")) p.tol = get_field<double>(j, "tol", what);
  if (j.contains("zero_tol")) p.zero_tol = get_field<double>(j, "zero_tol", what);
}

json parse_json(const std::string& text, const std::string& what) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": invalid JSON (" + e.what() + ")");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write '" + path + "'");
  }
}

}  // namespace tapkin::io
