#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace robmarg {

enum class PropensityMethod { known, constant, logistic, kernel };

inline constexpr double kDefaultPropensityFloor = 0.01;

// Fitted missingness model p(z) = P(delta = 1 | z). Every prediction is
// clamped to [floor, 1], so inverse-probability weights stay finite.
class PropensityFit {
 public:
  using KnownFunction = std::function<double(std::span<const double>)>;

  static PropensityFit known(KnownFunction p, double floor = kDefaultPropensityFloor);
  static PropensityFit constant(double p, double floor = kDefaultPropensityFloor);
  static PropensityFit logistic(Eigen::VectorXd gamma, double floor = kDefaultPropensityFloor);
  static PropensityFit kernel(Eigen::MatrixXd z, std::vector<int> delta,
                              double bandwidth, double floor = kDefaultPropensityFloor);

  PropensityMethod method() const { return method_; }
  double floor() const { return floor_; }
  // Intercept first, then one slope per z column (logistic only).
  const Eigen::VectorXd& coefficients() const { return gamma_; }
  double bandwidth() const { return bandwidth_; }
  double constant_value() const { return constant_; }

  double predict(std::span<const double> z) const;
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& z) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& z) const;

 private:
  PropensityFit(PropensityMethod method, double floor);
  double clamp(double p) const;

  PropensityMethod method_;
  double floor_;
  KnownFunction known_;
  double constant_ = 1.0;
  Eigen::VectorXd gamma_;
  Eigen::MatrixXd z_;
  std::vector<int> delta_;
  double bandwidth_ = 0.0;
  double fallback_ = 1.0;
};

// Product Epanechnikov kernel 0.75 (1 - t^2) on |t| <= 1 per coordinate.
double epanechnikov(double t);
double product_epanechnikov(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b,
                            double bandwidth);

// Logistic MLE with intercept by damped Newton (gradient tolerance 1e-10,
// 100 steps, up to 30 halvings per step). Throws NumericalError("separation")
// when the coefficients diverge.
PropensityFit fit_logistic(const Eigen::MatrixXd& z, std::span<const int> delta,
                           double floor = kDefaultPropensityFloor);

// Nadaraya-Watson smoother of delta on z. Empty kernel windows fall back to
// the overall observed fraction.
PropensityFit kernel_propensity(const Eigen::MatrixXd& z, std::span<const int> delta,
                                double bandwidth,
                                double floor = kDefaultPropensityFloor);

// Leave-one-out squared error sum_i (delta_i - p^{(-i)}(z_i))^2 of the kernel
// smoother, one entry per bandwidth.
std::vector<double> loo_kernel_errors(const Eigen::MatrixXd& z, std::span<const int> delta,
                                      std::span<const double> grid);

// Grid bandwidth minimizing the leave-one-out error; ties go to the smaller
// bandwidth.
double cv_bandwidth(const Eigen::MatrixXd& z, std::span<const int> delta,
                    std::span<const double> grid);

// MCAR fit: p = max(mean(delta), floor).
PropensityFit constant_propensity(std::span<const int> delta,
                                  double floor = kDefaultPropensityFloor);

// Logistic log-likelihood of delta at gamma (intercept first).
double logistic_log_likelihood(const Eigen::MatrixXd& z, std::span<const int> delta,
                               const Eigen::VectorXd& gamma);

}  // namespace robmarg
