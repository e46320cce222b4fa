#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "robmarg/dataset.hpp"
#include "robmarg/propensity.hpp"
#include "robmarg/score.hpp"

namespace robmarg {

enum class VarianceMethod { jackknife, plugin_known, plugin_kernel };

struct VarianceEstimate {
  double se = 0.0;
  VarianceMethod method = VarianceMethod::jackknife;
  std::size_t n_effective = 0;
};

using Pipeline = std::function<double(const ObservedDataset&)>;

// Delete-one jackknife over every row; the pipeline refits everything it
// needs. Rows whose refit throws are skipped (warning above 5%). Replicates
// run on `workers` threads (0 = hardware concurrency).
VarianceEstimate jackknife_se(const Pipeline& estimator, const ObservedDataset& data,
                              unsigned workers = 0);

// Same for a pipeline producing several estimates at once. A NaN entry (or
// a throwing refit) counts as a failure for that entry only; an entry with
// fewer than two good replicates gets se = NaN.
using MultiPipeline = std::function<std::vector<double>(const ObservedDataset&)>;
std::vector<VarianceEstimate> jackknife_se_multi(const MultiPipeline& estimator,
                                                 const ObservedDataset& data,
                                                 unsigned workers = 0);

enum class PluginVariant { known, kernel };

// Plug-in standard error of the IPW M-location. The kernel variant subtracts
// the projection term built from a Nadaraya-Watson regression of psi on z
// (Epanechnikov kernel at the propensity bandwidth), so `pf` must then be a
// kernel fit.
VarianceEstimate plugin_var_ipw(const ObservedDataset& data, const PropensityFit& pf,
                                double theta, double scale, const ScoreFamily& sf,
                                PluginVariant variant);

std::pair<double, double> confidence_interval(double theta, const VarianceEstimate& ve,
                                              double level);

}  // namespace robmarg
