#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robmarg/dataset.hpp"
#include "robmarg/marginal.hpp"
#include "robmarg/propensity.hpp"
#include "robmarg/simlab.hpp"

namespace robmarg {

// Numeric CSV with a header row. Blank cells and "NA" are NaN.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int column_index(const std::string& name) const;  // -1 if absent
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

struct RegressionChoice {
  std::string name;  // label used in reports, e.g. "nonlinear"
  ModelId model = ModelId::exp_linear;
  bool hard_rejection = false;
};

struct EstimateConfig {
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::string> z;
  std::vector<MarginalMethod> estimators{MarginalMethod::ipw, MarginalMethod::conv,
                                         MarginalMethod::aipw};
  std::vector<PropensityMethod> propensities{PropensityMethod::logistic,
                                             PropensityMethod::kernel,
                                             PropensityMethod::constant};
  std::vector<RegressionChoice> regressions;
  LocationSettings location;
  double propensity_floor = kDefaultPropensityFloor;
  std::optional<double> a_n;      // default n^(-1/3)
  // Units of a_n: raw z units, or multiples of sd(z) or range(z).
  enum class BandwidthUnits { raw, sd, range } a_n_units = BandwidthUnits::raw;
  std::vector<double> bandwidth_fractions;  // times range(z); empty = default grid
  int mm_subsets = 500;
  std::uint64_t mm_seed = 20190501;
  bool jackknife = true;
  double level = 0.95;
  unsigned workers = 0;
};

EstimateConfig parse_estimate_config(const nlohmann::json& j);

// x holds the covariates in config order; delta_i = 1 iff the response and
// every covariate outside z are present.
ObservedDataset build_dataset(const CsvTable& table, const EstimateConfig& cfg);

struct EstimateRow {
  MarginalMethod estimator;
  PropensityMethod propensity;
  std::string regression;  // empty unless conv
  double theta_mean = 0.0;
  double theta_median = 0.0;
  double theta_m = 0.0;
  double scale = 0.0;
  std::optional<double> se{};
  std::optional<std::pair<double, double>> ci{};
  std::size_t jackknife_n = 0;
  bool negative_aipw_weights = false;
  bool fit_converged = true;
};

struct EstimateReport {
  std::size_t n = 0;
  std::size_t complete_cases = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_by_column;
  std::optional<Eigen::VectorXd> logistic_coefficients;
  std::optional<double> kernel_bandwidth;
  std::optional<double> constant_propensity;
  double a_n = 0.0;
  std::vector<std::pair<std::string, Eigen::VectorXd>> regression_coefficients;
  std::vector<EstimateRow> rows;
};

EstimateReport run_estimate(const CsvTable& table, const EstimateConfig& cfg);
nlohmann::ordered_json report_json(const EstimateReport& report);
// M-location estimates as a grid: one row per estimator (conv split by
// regression), one column per propensity.
std::string report_table_csv(const EstimateReport& report);
// One row per estimate with its interval, for plotting.
std::string report_intervals_csv(const EstimateReport& report);

struct SimulateConfig {
  std::vector<std::pair<std::string, ScenarioConfig>> scenarios;
};
SimulateConfig parse_simulate_config(const nlohmann::json& j);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Entry points used by the executable; they return the process exit code.
int cmd_estimate(const std::filesystem::path& data, const std::filesystem::path& config,
                 const std::filesystem::path& out);
int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& out);
int cmd_targets(std::size_t reps, std::size_t n, std::uint64_t seed);

}  // namespace robmarg
