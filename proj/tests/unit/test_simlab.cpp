#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "robmarg/error.hpp"
#include <json.hpp>

#include "robmarg/simlab.hpp"

using namespace robmarg;

TEST_CASE("observed fraction matches the integrated response model") {
  const double expected = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
      [](double x) { return true_propensity(x); }, 0.0, 1.0);
  CHECK(expected == doctest::Approx(0.574).epsilon(1e-3));
  const SimSample s = generate_sample(200000, 99, Contamination::C0, Missingness::MH);
  const double frac = static_cast<double>(s.data.complete_count()) / 200000.0;
  CHECK(std::abs(frac - expected) < 0.005);
}

TEST_CASE("missing rows hide the response and x2 but keep x1") {
  const SimSample s = generate_sample(500, 3, Contamination::C0, Missingness::MH);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    CHECK(std::isfinite(s.data.x()(r, 0)));
    if (s.data.delta()[i]) {
      CHECK(s.data.y()[r] == s.truth.y_clean[r]);
    } else {
      CHECK(std::isnan(s.data.y()[r]));
      CHECK(std::isnan(s.data.x()(r, 1)));
    }
  }
}

TEST_CASE("contamination doubles the mean on exactly a tenth of the rows") {
  const SimSample c1 = generate_sample(100, 17, Contamination::C1, Missingness::M1);
  const SimSample c0 = generate_sample(100, 17, Contamination::C0, Missingness::M1);
  REQUIRE(c1.truth.contaminated_rows.size() == 10);
  CHECK(c0.truth.contaminated_rows.empty());
  int changed = 0;
  for (Eigen::Index i = 0; i < 100; ++i) {
    if (c1.data.y()[i] != c0.data.y()[i]) {
      ++changed;
      CHECK(c1.data.y()[i] == doctest::Approx(2.0 * c1.truth.mu[i]));
    }
  }
  CHECK(changed == 10);
  CHECK(c1.truth.y_clean == c0.truth.y_clean);
}

TEST_CASE("generator is deterministic and seeds differ") {
  const SimSample a = generate_sample(50, 5, Contamination::C1, Missingness::MH);
  const SimSample b = generate_sample(50, 5, Contamination::C1, Missingness::MH);
  CHECK(a.truth.y_contaminated == b.truth.y_contaminated);
  CHECK(a.data.delta() == b.data.delta());
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 2) == replication_seed(1, 2));
}

TEST_CASE("true regression") {
  CHECK(true_regression(0.0, 0.0) == 5.0);
  CHECK(true_regression(0.5, 10.0) == doctest::Approx(1.0 + 5.0 * std::exp(1.0)));
  CHECK(true_propensity(0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.2))));
}

TEST_CASE("l measures") {
  CHECK(l_measures({3.0, 4.0}, {3.0, 4.0}).L2 == 0.0);
  CHECK(l_measures({1.0, 0.0}, {0.0, 1.0}).L1 == 1.0);
  CHECK(l_measures({0.5, 1.5}, {0.0, 0.0}).L2 == doctest::Approx(1.25));
  const LMeasures l = l_measures({1.0, 2.0}, {0.0, 4.0});
  CHECK(l.L1 == doctest::Approx(1.5));
  CHECK(l.L2 == doctest::Approx(2.5));
  CHECK_THROWS_AS(l_measures({1.0}, {}), InputError);
}

TEST_CASE("bandwidth grid and simulated propensities") {
  Eigen::MatrixXd z(3, 1);
  z << 1.0, 3.0, 2.0;
  const std::vector<double> g = default_bandwidth_grid(z);
  REQUIRE(g.size() == 10);
  CHECK(g.front() == doctest::Approx(0.1));
  CHECK(g.back() == doctest::Approx(1.0));

  set_warnings_enabled(false);
  const SimSample full = generate_sample(60, 1, Contamination::C0, Missingness::M1);
  const PropensityFit pf = fit_sim_propensity(full.data, SimPropensity::logistic);
  CHECK(pf.predict(Eigen::RowVectorXd::Constant(1, 0.3)) == 1.0);
  const SimSample s = generate_sample(300, 1, Contamination::C0, Missingness::MH);
  CHECK(fit_sim_propensity(s.data, SimPropensity::true_p).predict(Eigen::RowVectorXd::Constant(1, 0.5)) ==
        doctest::Approx(true_propensity(0.5)));
  CHECK(fit_sim_propensity(s.data, SimPropensity::kernel).method() == PropensityMethod::kernel);
  set_warnings_enabled(true);
}

TEST_CASE("parallel_for visits each index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](std::size_t j) { hits[j] += 1; });
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("scenario tables are reproducible and ordered") {
  set_warnings_enabled(false);
  ScenarioConfig cfg;
  cfg.n = 60;
  cfg.reps = 6;
  cfg.propensity = SimPropensity::logistic;
  cfg.workers = 1;
  const SummaryTable a = run_scenario(cfg);
  cfg.workers = 3;
  const SummaryTable b = run_scenario(cfg);
  set_warnings_enabled(true);
  CHECK(summary_csv(a) == summary_csv(b));
  CHECK(a.reps_used == 6);
  REQUIRE(a.rows.size() == 12);
  CHECK(a.rows[0].complete_data);
  CHECK(a.rows[0].functional == Functional::mean);
  CHECK(a.rows[1].estimator == MarginalMethod::ipw);
  CHECK(a.rows[4].functional == Functional::median);
  CHECK(a.observed_fraction > 0.3);
  CHECK(a.observed_fraction < 0.85);
  for (const SummaryRow& r : a.rows) {
    CHECK(r.mse == doctest::Approx(r.bias * r.bias + r.sd * r.sd).epsilon(1e-9));
    // no contamination: both reference samples coincide
    CHECK(r.L1 == r.L10);
  }
  CHECK(summary_csv(a).rfind("functional,estimator,propensity,bias,sd,mse,L10,L20,L1,L2\n", 0) == 0);
  const auto j = nlohmann::json::parse(summary_json(a));
  CHECK(j["rows"].size() == 12);
}

TEST_CASE("targets of a symmetric law") {
  const ResponseGenerator symmetric = [](std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> y(n);
    for (double& v : y) v = g(rng);
    return y;
  };
  const TargetEstimate t = target_values(8, 20000, 3, symmetric, 2);
  CHECK(std::abs(t.mean) < 4 * t.se_mean + 1e-3);
  CHECK(std::abs(t.m_est) < 0.01);
  // sd of the sample median is about sqrt(pi/2) / sqrt(n)
  const double med_sd = std::sqrt(std::acos(-1.0) / 2.0 / 20000.0);
  CHECK(std::abs(t.median) < 4 * med_sd / std::sqrt(8.0));
  CHECK(t.se_mean > 0.0);
  CHECK_THROWS_AS(target_values(0, 10, 1), InputError);
}

TEST_CASE("target median satisfies the binomial bound") {
  const std::size_t reps = 4, n = 100000;
  const TargetEstimate t = target_values(reps, n, 11, clean_responses, 2);
  std::size_t below = 0;
  for (std::size_t j = 0; j < reps; ++j) {
    for (double v : clean_responses(n, replication_seed(11, j))) below += v <= t.median ? 1 : 0;
  }
  const double f = static_cast<double>(below) / static_cast<double>(n * reps);
  const double tol = 2.0 / std::sqrt(static_cast<double>(n * reps));
  CHECK(f >= 0.5 - tol);
  CHECK(f <= 0.5 + tol);
}
