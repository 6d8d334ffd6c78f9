#include "tapkin/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

#include "tapkin/error.hpp"

namespace tapkin::features {

std::vector<double> compute_uptake(std::span<const std::vector<double>> rates, std::span<const double> stoich,
                                   std::span<const double> t) {
  if (rates.size() != stoich.size()) {
    throw ValidationError("compute_uptake: " + std::to_string(rates.size()) + " rate series but " +
                          std::to_string(stoich.size()) + " stoichiometric coefficients");
  }
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i].size() != t.size()) {
      throw ValidationError("compute_uptake: rate series " + std::to_string(i) + " has " +
                            std::to_string(rates[i].size()) + " points, grid has " + std::to_string(t.size()));
    }
  }
  std::vector<double> uptake(t.size(), 0.0);
  if (t.empty()) return uptake;
  auto net = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) s += stoich[i] * rates[i][k];
    return s;
  };
  double prev = net(0);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double cur = net(k);
    uptake[k] = uptake[k - 1] + 0.5 * (t[k] - t[k - 1]) * (prev + cur);
    prev = cur;
  }
  return uptake;
}

RcdSeries compute_rcd(const TransientFeatures& f, RcdRole role, RcdTransform transform, std::optional<double> c_floor) {
  if (f.rate.size() != f.size() || f.concentration.size() != f.size()) {
    throw ValidationError("compute_rcd: series of gas '" + f.gas_id + "' do not share one grid");
  }
  RcdSeries out;
  out.gas_id = f.gas_id;
  out.role = role;
  out.transform = transform;
  out.values.assign(f.size(), std::numeric_limits<double>::quiet_NaN());
  out.retained.assign(f.size(), false);

  if (role == RcdRole::Product) {
    if (transform != RcdTransform::Identity) {
      throw ValidationError("compute_rcd: product gas '" + f.gas_id + "' takes the rate itself; no transform");
    }
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (std::isfinite(f.rate[k])) {
        out.values[k] = f.rate[k];
        out.retained[k] = true;
      } else {
        ++out.masked;
      }
    }
  } else {
    double c_max = 0.0;
    for (double c : f.concentration)
      if (std::isfinite(c)) c_max = std::max(c_max, c);
    out.c_floor = c_floor.value_or(kDefaultRelativeFloor * c_max);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double c = f.concentration[k];
      const double r = f.rate[k];
      // Non-positive concentrations are masked even under a zero floor.
      if (!std::isfinite(c) || !std::isfinite(r) || c < out.c_floor || c <= 0.0) {
        ++out.masked;
        continue;
      }
      double q = r / c;
      if (transform == RcdTransform::Sqrt) {
        if (q < 0.0) {
          ++out.clipped;
          q = 0.0;
        }
        q = std::sqrt(q);
      }
      out.values[k] = q;
      out.retained[k] = true;
    }
  }
  if (out.masked == f.size()) {
    throw ValidationError("compute_rcd: every point of gas '" + f.gas_id +
                          "' is masked; the reactant concentration is unmeasurable");
  }
  return out;
}

TransientFeatures extract_thin_zone_features(const reactor::SimulationResult& sim, const std::string& gas_id) {
  const auto& trace = sim.gas(gas_id);
  TransientFeatures f;
  f.gas_id = gas_id;
  f.t = sim.t;
  f.rate = trace.rate;
  f.concentration = trace.concentration;
  f.stoichiometry = trace.uptake_stoichiometry;
  std::vector<std::vector<double>> rates;
  std::vector<double> nu;
  for (const auto& term : f.stoichiometry) {
    rates.push_back(sim.gas(term.gas).rate);
    nu.push_back(term.nu);
  }
  f.uptake = compute_uptake(rates, nu, f.t);
  return f;
}

std::vector<TransientFeatures> extract_all(const reactor::SimulationResult& sim) {
  std::vector<TransientFeatures> out;
  for (const auto& g : sim.gases) out.push_back(extract_thin_zone_features(sim, g.gas));
  return out;
}

const TransientFeatures& find_gas(const std::vector<TransientFeatures>& set, const std::string& gas_id) {
  for (const auto& f : set)
    if (f.gas_id == gas_id) return f;
  std::string known;
  for (const auto& f : set) known += (known.empty() ? "" : ", ") + f.gas_id;
  throw ValidationError("unknown gas '" + gas_id + "' (features hold: " + known + ")");
}

void check_uniform_grid(std::span<const double> t, const std::string& what) {
  if (t.size() < 2) throw ValidationError(what + ": need at least two time points");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) {
      throw ValidationError(what + ": time is not strictly increasing at row " + std::to_string(k + 1));
    }
  }
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double step = t[k] - t[k - 1];
    const double tol = 1e-9 * std::max({dt, std::abs(t[k]), std::abs(t[k - 1])});
    if (std::abs(step - dt) > tol) {
      std::ostringstream os;
      os << what << ": non-uniform time grid at row " << k + 1 << " (step " << step << ", expected " << dt << ")";
      throw ValidationError(os.str());
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    if (s == "nan" || s == "NaN" || s == "NAN" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("features CSV row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
                          s + "' as a number");
  }
  return v;
}

// Fills NaN runs of at most `max_run` samples by linear interpolation.
std::size_t fill_short_gaps(std::vector<double>& v, std::size_t max_run, const std::string& column,
                            std::size_t first_row) {
  std::size_t filled = 0;
  std::size_t k = 0;
  while (k < v.size()) {
    if (!std::isnan(v[k])) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < v.size() && std::isnan(v[end])) ++end;
    const std::size_t run = end - k;
    if (run > max_run) {
      throw ValidationError("features CSV column '" + column + "': NaN run of " + std::to_string(run) +
                            " samples starting at row " + std::to_string(first_row + k) + " exceeds 5");
    }
    for (std::size_t i = k; i < end; ++i) {
      if (k == 0 && end == v.size()) {
        throw ValidationError("features CSV column '" + column + "' holds no numbers");
      } else if (k == 0) {
        v[i] = v[end];
      } else if (end == v.size()) {
        v[i] = v[k - 1];
      } else {
        const double w = static_cast<double>(i - k + 1) / static_cast<double>(run + 1);
        v[i] = (1.0 - w) * v[k - 1] + w * v[end];
      }
      ++filled;
    }
    k = end;
  }
  return filled;
}

}  // namespace

std::vector<TransientFeatures> ingest_features(std::istream& in, IngestReport* report) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw ValidationError("features CSV: empty file (expected header 'time_s,r_<gas>,C_<gas>,U_<gas>')");
  if (header[0] != "time_s") {
    throw ValidationError("features CSV line " + std::to_string(line_no) + ", column 1: expected 'time_s', found '" +
                          header[0] + "'");
  }
  if (header.size() < 4 || (header.size() - 1) % 3 != 0) {
    throw ValidationError("features CSV line " + std::to_string(line_no) + ": expected r_/C_/U_ column triples per gas, found " +
                          std::to_string(header.size() - 1) + " data columns");
  }
  const std::size_t n_gas = (header.size() - 1) / 3;
  std::vector<std::string> gases(n_gas);
  for (std::size_t g = 0; g < n_gas; ++g) {
    const std::string& r = header[1 + 3 * g];
    if (r.rfind("r_", 0) != 0 || r.size() < 3) {
      throw ValidationError("features CSV column " + std::to_string(2 + 3 * g) + ": expected 'r_<gas>', found '" + r + "'");
    }
    gases[g] = r.substr(2);
    const std::string want_c = "C_" + gases[g];
    const std::string want_u = "U_" + gases[g];
    if (header[2 + 3 * g] != want_c) {
      throw ValidationError("features CSV column " + std::to_string(3 + 3 * g) + ": expected '" + want_c + "', found '" +
                            header[2 + 3 * g] + "'");
    }
    if (header[3 + 3 * g] != want_u) {
      throw ValidationError("features CSV column " + std::to_string(4 + 3 * g) + ": expected '" + want_u + "', found '" +
                            header[3 + 3 * g] + "'");
    }
    for (std::size_t h = 0; h < g; ++h)
      if (gases[h] == gases[g]) throw ValidationError("features CSV: gas '" + gases[g] + "' appears twice");
  }

  std::vector<std::vector<double>> cols(header.size());
  const std::size_t first_data_line = line_no + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ValidationError("features CSV line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) cols[c].push_back(parse_number(cells[c], line_no, header[c]));
  }
  if (cols[0].size() < 2) throw ValidationError("features CSV: fewer than two data rows");
  for (std::size_t k = 0; k < cols[0].size(); ++k) {
    if (!std::isfinite(cols[0][k])) {
      throw ValidationError("features CSV data row " + std::to_string(k + 1) + ": time_s is not a finite number");
    }
  }
  check_uniform_grid(cols[0], "features CSV");

  IngestReport rep;
  rep.rows = cols[0].size();
  for (std::size_t c = 1; c < cols.size(); ++c) rep.interpolated += fill_short_gaps(cols[c], 5, header[c], first_data_line);
  if (report) *report = rep;

  std::vector<TransientFeatures> out(n_gas);
  for (std::size_t g = 0; g < n_gas; ++g) {
    out[g].gas_id = gases[g];
    out[g].t = cols[0];
    out[g].rate = std::move(cols[1 + 3 * g]);
    out[g].concentration = std::move(cols[2 + 3 * g]);
    out[g].uptake = std::move(cols[3 + 3 * g]);
  }
  return out;
}

}  // namespace tapkin::features
