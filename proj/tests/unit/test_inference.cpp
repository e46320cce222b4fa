#include <doctest.h>

#include <cmath>
#include <random>

#include "robmarg/error.hpp"
#include "robmarg/inference.hpp"
#include "robmarg/marginal.hpp"
#include "robmarg/scaleloc.hpp"
#include "robmarg/simlab.hpp"

using namespace robmarg;

namespace {

ObservedDataset normal_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(4.0, 2.0);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    y(i) = g(rng);
    x(i, 0) = static_cast<double>(i) / n;
  }
  return ObservedDataset(y, x, {0}, std::vector<int>(n, 1));
}

}  // namespace

TEST_CASE("jackknife of the mean is s / sqrt(n)") {
  const ObservedDataset d = normal_data(50, 1);
  const VarianceEstimate ve =
      jackknife_se([](const ObservedDataset& s) { return s.y().mean(); }, d, 2);
  const double n = 50.0;
  const double sd = std::sqrt((d.y().array() - d.y().mean()).square().sum() / (n - 1));
  CHECK(ve.se == doctest::Approx(sd / std::sqrt(n)).epsilon(1e-10));
  CHECK(ve.n_effective == 50);
  CHECK(ve.method == VarianceMethod::jackknife);
}

TEST_CASE("jackknife of a constant is zero") {
  const ObservedDataset d = normal_data(20, 2);
  CHECK(jackknife_se([](const ObservedDataset&) { return 7.0; }, d).se == 0.0);
}

TEST_CASE("jackknife needs ten rows") {
  const ObservedDataset d = normal_data(9, 3);
  CHECK_THROWS_AS(jackknife_se([](const ObservedDataset&) { return 1.0; }, d), InputError);
}

TEST_CASE("jackknife skips failing replicates per entry") {
  set_warnings_enabled(false);
  const ObservedDataset d = normal_data(30, 4);
  const std::vector<VarianceEstimate> ve = jackknife_se_multi(
      [](const ObservedDataset& s) {
        return std::vector<double>{s.y().mean(), s.y()(0) > 100.0 ? 1.0 : std::nan("")};
      },
      d, 1);
  set_warnings_enabled(true);
  REQUIRE(ve.size() == 2);
  CHECK(ve[0].n_effective == 30);
  CHECK(ve[0].se > 0.0);
  CHECK(std::isnan(ve[1].se));
  CHECK(ve[1].n_effective == 0);
  set_warnings_enabled(false);
  CHECK_THROWS_AS(jackknife_se([](const ObservedDataset&) { return std::nan(""); }, d),
                  NumericalError);
  set_warnings_enabled(true);
}

TEST_CASE("jackknife is independent of the worker count") {
  const ObservedDataset d = normal_data(40, 5);
  const Pipeline median = [](const ObservedDataset& s) {
    std::vector<double> v(s.y().begin(), s.y().end());
    return weighted_median(WeightedSample::uniform(v));
  };
  CHECK(jackknife_se(median, d, 1).se == jackknife_se(median, d, 3).se);
}

TEST_CASE("normal confidence interval") {
  const auto ci = confidence_interval(0.0, VarianceEstimate{1.0, VarianceMethod::jackknife, 10}, 0.95);
  CHECK(ci.first == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK(ci.second == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(confidence_interval(0.0, VarianceEstimate{}, 1.0), InputError);
}

TEST_CASE("plug-in variance of the mean under full observation") {
  const ObservedDataset d = normal_data(200, 6);
  const double theta = d.y().mean();
  const VarianceEstimate ve = plugin_var_ipw(d, PropensityFit::constant(1.0), theta, 1.7,
                                             ScoreFamily::square(), PluginVariant::known);
  const double pop_sd = std::sqrt((d.y().array() - theta).square().mean());
  CHECK(ve.se == doctest::Approx(pop_sd / std::sqrt(200.0)).epsilon(1e-10));
  CHECK(ve.method == VarianceMethod::plugin_known);
}

TEST_CASE("kernel projection never increases the plug-in variance") {
  set_warnings_enabled(false);
  const SimSample s = generate_sample(300, 12, Contamination::C0, Missingness::MH);
  const PropensityFit pf = fit_sim_propensity(s.data, SimPropensity::kernel);
  const MarginalEstimate e = estimate_ipw(s.data, pf);
  const ScoreFamily sf = ScoreFamily::bisquare_location();
  const double known = plugin_var_ipw(s.data, pf, e.theta_m, e.scale, sf, PluginVariant::known).se;
  const double kern = plugin_var_ipw(s.data, pf, e.theta_m, e.scale, sf, PluginVariant::kernel).se;
  set_warnings_enabled(true);
  CHECK(kern <= known);
  CHECK(kern > 0.0);
  CHECK_THROWS_AS(plugin_var_ipw(s.data, PropensityFit::constant(0.5), e.theta_m, e.scale, sf,
                                 PluginVariant::kernel),
                  InputError);
}

TEST_CASE("flat score throws") {
  const ObservedDataset d = normal_data(50, 7);
  CHECK_THROWS_AS(plugin_var_ipw(d, PropensityFit::constant(1.0), 1e6, 1.0,
                                 ScoreFamily::bisquare_location(), PluginVariant::known),
                  NumericalError);
}

TEST_CASE("jackknife is invariant to row order") {
  const ObservedDataset d = normal_data(30, 8);
  std::vector<std::size_t> rev(30);
  for (std::size_t i = 0; i < 30; ++i) rev[i] = 29 - i;
  const Pipeline trimmed = [](const ObservedDataset& s) {
    std::vector<double> v(s.y().begin(), s.y().end());
    const WeightedSample ws = WeightedSample::uniform(v);
    return m_location(ws, ScoreFamily::huber(1.345), 1.0, weighted_median(ws));
  };
  CHECK(jackknife_se(trimmed, d, 1).se ==
        doctest::Approx(jackknife_se(trimmed, d.select_rows(rev), 1).se).epsilon(1e-12));
}

TEST_CASE("degenerate interval") {
  const auto ci = confidence_interval(2.5, VarianceEstimate{0.0, VarianceMethod::jackknife, 10}, 0.9);
  CHECK(ci.first == 2.5);
  CHECK(ci.second == 2.5);
}

TEST_CASE("kernel projection vanishes when z is independent of y") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  const std::size_t n = 4000;
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, 1);
  std::vector<int> delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    y(i) = g(rng);
    x(i, 0) = u(rng);
    delta[i] = u(rng) < 0.4 + 0.4 * x(i, 0) ? 1 : 0;
  }
  const ObservedDataset d(y, x, {0}, delta);
  const PropensityFit pf = kernel_propensity(d.z(), d.delta(), 0.2);
  const ScoreFamily sf = ScoreFamily::bisquare_location();
  const double known = plugin_var_ipw(d, pf, 0.0, 1.0, sf, PluginVariant::known).se;
  const double kern = plugin_var_ipw(d, pf, 0.0, 1.0, sf, PluginVariant::kernel).se;
  CHECK(kern == doctest::Approx(known).epsilon(0.03));
}
