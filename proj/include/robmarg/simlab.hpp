#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "robmarg/dataset.hpp"
#include "robmarg/marginal.hpp"
#include "robmarg/propensity.hpp"

namespace robmarg {

enum class Contamination { C0, C1 };
enum class Missingness { M1, MH };
enum class SimPropensity { true_p, logistic, kernel, constant };
enum class RegressionSpec { true_nonlinear, misspecified_linear };
enum class Functional { mean, median, m_est };

// Population values of the three functionals used as bias targets.
struct TargetValues {
  double mean = 16.030;
  double median = 13.690;
  double m_est = 15.399;
};

// M(H) response model P(delta = 1 | x1) = 1 / (1 + exp(-slope x1 - intercept)).
struct MissingLogistic {
  double intercept = 0.2;
  double slope = 0.2;
  double operator()(double x1) const;
};

struct ScenarioConfig {
  std::size_t n = 100;
  std::size_t reps = 1000;
  std::uint64_t seed = 20190501;
  Contamination contamination = Contamination::C0;
  Missingness missing = Missingness::MH;
  SimPropensity propensity = SimPropensity::true_p;
  RegressionSpec regression = RegressionSpec::true_nonlinear;
  std::vector<MarginalMethod> estimators{MarginalMethod::ipw, MarginalMethod::conv,
                                         MarginalMethod::aipw};
  std::vector<Functional> functionals{Functional::mean, Functional::median, Functional::m_est};
  MissingLogistic missing_model;
  TargetValues targets;
  unsigned workers = 0;  // 0 = hardware concurrency
};

// What the generator knows but the analyst does not.
struct TruthRecord {
  Eigen::VectorXd y_clean;
  Eigen::VectorXd y_contaminated;
  Eigen::VectorXd x2;
  Eigen::VectorXd mu;
  std::vector<std::size_t> contaminated_rows;
};

struct SimSample {
  ObservedDataset data;
  TruthRecord truth;
};

// mu(x) = 0.1 x2 + 5 exp(2 x1).
double true_regression(double x1, double x2);
// 1 / (1 + exp(-0.2 x1 - 0.2)).
double true_propensity(double x1);

// x = (x1, x2) with z = x1. Contaminated rows (C1) and the missingness
// indicators are drawn in every configuration, so C0/C1 and M1/MH samples
// built from one seed share their covariates and errors.
SimSample generate_sample(std::size_t n, std::uint64_t seed, Contamination contamination,
                          Missingness missing, const MissingLogistic& missing_model = {});

// Independent stream for replication j.
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t j);

// Runs body(j) for j in [0, count) on `workers` threads (0 = hardware
// concurrency). Each index is visited exactly once.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body);

// Bandwidth grid for the kernel propensity: 0.05, 0.10, ..., 0.5 times the
// range of z (first z column).
std::vector<double> default_bandwidth_grid(const Eigen::MatrixXd& z);

PropensityFit fit_sim_propensity(const ObservedDataset& data, SimPropensity method,
                                 const MissingLogistic& missing_model = {});

struct SummaryRow {
  Functional functional;
  MarginalMethod estimator;
  SimPropensity propensity;
  // Complete-data estimator on all n generated responses (no missingness).
  bool complete_data = false;
  double bias = 0.0;
  double sd = 0.0;
  double mse = 0.0;
  double L10 = 0.0;
  double L20 = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::size_t reps_used = 0;
  std::size_t failures = 0;
  double observed_fraction = 0.0;
};

// Rows ordered functional-major; within a functional the complete-data row
// comes first, then the configured estimators in order.
SummaryTable run_scenario(const ScenarioConfig& cfg);

std::string to_string(Contamination v);
std::string to_string(Missingness v);
std::string to_string(SimPropensity v);
std::string to_string(RegressionSpec v);
std::string to_string(Functional v);
std::string to_string(MarginalMethod v);
std::string to_string(PropensityMethod v);

std::string summary_csv(const SummaryTable& table);
std::string summary_json(const SummaryTable& table);

struct LMeasures {
  double L1 = 0.0;
  double L2 = 0.0;
};
LMeasures l_measures(const std::vector<double>& est, const std::vector<double>& ref);

struct TargetEstimate {
  double mean = 0.0;
  double median = 0.0;
  double m_est = 0.0;
  double se_mean = 0.0;
  double se_median = 0.0;
  double se_m_est = 0.0;
};

// Draws n responses for one replication.
using ResponseGenerator = std::function<std::vector<double>(std::size_t n, std::uint64_t seed)>;
std::vector<double> clean_responses(std::size_t n, std::uint64_t seed);

TargetEstimate target_values(std::size_t reps, std::size_t n, std::uint64_t seed,
                             const ResponseGenerator& generator = clean_responses,
                             unsigned workers = 0);

}  // namespace robmarg
