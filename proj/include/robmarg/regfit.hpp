#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "robmarg/dataset.hpp"
#include "robmarg/score.hpp"

namespace robmarg {

enum class ModelId { exp_linear, linear };

// Which exponential-growth form an exp_linear model uses:
//   simulation  m(x, b) = b2 x2 + b3 exp(b1 x1)
//   ozone       m(x, b) = b1 exp(b2 x1) + b3 + b4 x2
enum class ExpVariant { simulation, ozone };

// Parametric regression function m(x, beta). Every supported model is
// separable: fixing at most one nonlinear coefficient (the exponential rate)
// leaves a linear least-squares problem, which the elemental-subset search
// exploits.
class RegressionModel {
 public:
  static RegressionModel exp_linear(ExpVariant variant);
  // beta_1 x_1 + ... + beta_d x_d + beta_{d+1}.
  static RegressionModel linear(int num_covariates);

  ModelId id() const { return id_; }
  ExpVariant variant() const { return variant_; }
  int dim_beta() const { return dim_beta_; }
  int num_covariates() const { return num_covariates_; }

  double mean(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                           const Eigen::VectorXd& beta) const;

  // Separable form: index of the nonlinear coefficient in beta (-1 if none),
  // the regressors multiplying the linear coefficients given that rate, and
  // the reassembly of a full beta.
  int nonlinear_index() const { return nonlinear_index_; }
  Eigen::RowVectorXd linear_design(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                   double rate) const;
  Eigen::VectorXd assemble(double rate, const Eigen::VectorXd& linear_coefficients) const;

 private:
  RegressionModel(ModelId id, ExpVariant variant, int dim_beta, int num_covariates,
                  int nonlinear_index)
      : id_(id), variant_(variant), dim_beta_(dim_beta),
        num_covariates_(num_covariates), nonlinear_index_(nonlinear_index) {}
  void check_dims(Eigen::Index x_size, Eigen::Index beta_size) const;

  ModelId id_;
  ExpVariant variant_;
  int dim_beta_;
  int num_covariates_;
  int nonlinear_index_;
};

struct RegressionFit {
  Eigen::VectorXd beta;
  double residual_scale = 0.0;
  std::optional<Eigen::VectorXd> weights_used;
  std::size_t complete_case_count = 0;
  bool converged = false;
  // S-step solution, kept for diagnostics and the MM dominance check.
  Eigen::VectorXd s_beta;
};

using CovariateWeights = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

struct MMOptions {
  int subsets = 500;
  std::uint64_t seed = 20190501;
  ScoreFamily s_rho = ScoreFamily::bisquare_scale();
  double b = kScaleB;
  ScoreFamily m_rho = ScoreFamily::bisquare_location();
  int s_refine_steps = 20;
  double tolerance = 1e-8;
};

// Simplified MM fit on the complete cases (delta = 1): S-step over random
// elemental subsets, Gauss-Newton refinement of the best candidate, then a
// weighted IRWLS Gauss-Newton M-step with the S residual scale held fixed.
RegressionFit fit_mm(const RegressionModel& model, const ObservedDataset& data,
                     const CovariateWeights& covariate_weights = {},
                     const MMOptions& options = {});

double predict(const RegressionModel& model, const RegressionFit& fit,
               const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Exact least squares through the given rows (size dim_beta + 1 in the
// S-step). For exp_linear models the rate is searched on
// [-rate_limit, rate_limit] and then polished by Gauss-Newton.
Eigen::VectorXd elemental_fit(const RegressionModel& model, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, double rate_limit);

// Ordinary (nonlinear) least squares on the complete cases.
Eigen::VectorXd least_squares_fit(const RegressionModel& model, const ObservedDataset& data);

// Smooth hard-rejection weights on one covariate: with t the covariate
// standardized by the complete-case median and normalized MAD, w = 1 for
// |t| <= 2, (1 - (|t| - 2)^2)^2 for 2 < |t| < 3 and 0 beyond.
CovariateWeights hard_rejection_weights(const ObservedDataset& data, int column);

}  // namespace robmarg
