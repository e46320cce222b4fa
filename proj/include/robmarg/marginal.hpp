#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "robmarg/dataset.hpp"
#include "robmarg/distweight.hpp"
#include "robmarg/propensity.hpp"
#include "robmarg/regfit.hpp"
#include "robmarg/score.hpp"

namespace robmarg {

enum class MarginalMethod { ipw, conv, aipw };

// Where the preliminary scale is centered. `median` evaluates the M-scale at
// the weighted median; `minimized` uses the full S-scale (minimized over the
// center).
enum class ScaleCentering { median, minimized };

struct LocationSettings {
  ScoreFamily location = ScoreFamily::bisquare_location();
  ScoreFamily rho0 = ScoreFamily::bisquare_scale();
  double b = kScaleB;
  ScaleCentering centering = ScaleCentering::median;
};

struct MarginalEstimate {
  WeightedSample distribution;
  double scale = 0.0;
  double theta_mean = 0.0;
  double theta_median = 0.0;
  double theta_m = 0.0;
  MarginalMethod method = MarginalMethod::ipw;
  PropensityMethod propensity_tag = PropensityMethod::known;
  // AIPW only: some composite weights were negative and got floored at 0.
  bool negative_weights_floored = false;
  // AIPW only: the unfloored signed CDF, clipped to [0, 1] and made monotone
  // by a running maximum, stored as its increments.
  std::optional<WeightedSample> signed_distribution{};
};

// Scale and the three functionals (mean, median, M) of a distribution.
MarginalEstimate summarize_distribution(WeightedSample ws, const LocationSettings& settings);

MarginalEstimate estimate_ipw(const ObservedDataset& data, const PropensityFit& pf,
                              const LocationSettings& settings = {});

// Convolution of the complete-case residual law with the IPW law of the fitted
// values. Beyond kConvMaxGrid complete cases the fitted-value grid is
// subsampled (with a warning).
inline constexpr std::size_t kConvMaxGrid = 2000;
MarginalEstimate estimate_conv(const ObservedDataset& data, const PropensityFit& pf,
                               const RegressionModel& model, const RegressionFit& fit,
                               const LocationSettings& settings = {});

// Biweight kernel 15/16 (1 - t^2)^2 on |t| < 1.
double biweight(double t);

using ConditionalCdf =
    std::function<double(double y, const Eigen::Ref<const Eigen::RowVectorXd>& z)>;

// Nadaraya-Watson estimate of P(y_i <= y | z) from the complete cases. Empty
// kernel windows fall back to the complete-case ECDF.
ConditionalCdf conditional_cdf_kernel(const ObservedDataset& data, double a_n);

// n^(-1/3).
double default_aipw_bandwidth(std::size_t n);

MarginalEstimate estimate_aipw(const ObservedDataset& data, const PropensityFit& pf,
                               double a_n, const LocationSettings& settings = {});

// zeta_j + varpi_j for every row (zero on incomplete rows), before any
// flooring. They sum to n.
Eigen::VectorXd aipw_raw_weights(const ObservedDataset& data, const PropensityFit& pf,
                                 double a_n);

}  // namespace robmarg
