#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tapkin/error.hpp"
#include "tapkin/features.hpp"
#include "tapkin/mechanism.hpp"
#include "tapkin/reactor.hpp"
#include "tapkin/regress.hpp"

namespace tapkin::io {

using json = nlohmann::json;

const char* version();

// 12 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);
double round12(double v);

class IoError : public Error {
 public:
  using Error::Error;
};

struct CalibrationSpec {
  double mu = 1.0;  // mol/s per instrument unit
  std::optional<double> baseline_start;
  std::optional<double> baseline_end;  // default window: first 5% of the record
};

struct FluxTable {
  std::vector<double> t;
  std::vector<std::string> gases;
  std::vector<std::vector<double>> flux;  // flux[gas][k]
  std::vector<CalibrationSpec> calibration;

  void validate() const;
};

struct Correction {
  std::string gas;
  double mu = 1.0;
  double baseline_start = 0.0;
  double baseline_end = 0.0;
  std::size_t baseline_samples = 0;
  double baseline = 0.0;
};

struct PreprocessResult {
  FluxTable table;
  std::vector<Correction> corrections;
  std::vector<std::string> warnings;
};

// mu * (F - mean of F over the baseline window), per gas.
PreprocessResult preprocess_flux(const FluxTable& table);

FluxTable read_flux_csv(std::istream& in);
// `<gas>,mu=<float>,baseline_start=<float>,baseline_end=<float>`; any key
// may be omitted.
void read_calibration(std::istream& in, FluxTable& table);
// Reads `path` and, when present, the sidecar `path + ".calib"`.
FluxTable load_flux_csv(const std::string& path);

std::vector<features::TransientFeatures> load_features_csv(const std::string& path,
                                                           features::IngestReport* report = nullptr);

// Written as '#' lines at the top of every output.
struct Provenance {
  std::uint64_t seed = 0;
  json config = json::object();
};

void write_features_csv(std::ostream& out, std::span<const features::TransientFeatures> set, const Provenance& prov);
void write_flux_csv(std::ostream& out, const FluxTable& table, const Provenance& prov);
void write_grid_csv(std::ostream& out, const mechanism::CorrelationGrid& grid, const Provenance& prov);
mechanism::CorrelationGrid read_grid_csv(std::istream& in);
void write_rcdc_csv(std::ostream& out, const mechanism::RcdcMatrix& m, const Provenance& prov);

json fit_report(const regress::RegressionFit& fit, const std::optional<regress::SelectionMetrics>& metrics,
                const Provenance& prov);
json rcdc_report(const mechanism::RcdcMatrix& m, const mechanism::MechanismCall& call, const Provenance& prov);
std::string dump_report(const json& report);

json to_json(const reactor::ReactorConfig& c);
json to_json(const reactor::MechanismSpec& m);
json to_json(const regress::PenaltySpec& p);
// Overrides the fields present in `j`; unknown keys are rejected.
void apply_json(const json& j, reactor::ReactorConfig& c);
void apply_json(const json& j, reactor::MechanismSpec& m);
void apply_json(const json& j, regress::PenaltySpec& p);

json parse_json(const std::string& text, const std::string& what);
std::string read_text_file(const std::string& path);
// Writes through a temporary file so a failed run leaves no partial output.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace tapkin::io
