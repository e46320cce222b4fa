#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace robmarg {

// A discrete distribution: atoms carrying nonnegative weights. The weights
// need not be normalized; every query works on the normalized view.
//
// Atoms may be given in any order. Zero-weight atoms are kept in atoms() /
// weights() but ignored by every distributional query.
class WeightedSample {
 public:
  WeightedSample(std::vector<double> atoms, std::vector<double> weights);

  // Equal weights.
  static WeightedSample uniform(std::vector<double> atoms);

  std::span<const double> atoms() const { return atoms_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }
  double total_weight() const { return total_; }

  // Distinct positive-weight atoms in increasing order and the normalized
  // cumulative mass at each of them (last entry is exactly 1).
  std::span<const double> support() const { return support_; }
  std::span<const double> cumulative() const { return cumulative_; }

  // Same atoms, weights divided by their total.
  std::vector<double> normalized_weights() const;

 private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
  double total_ = 0.0;
  std::vector<double> support_;
  std::vector<double> cumulative_;
};

// F(y) = mass of atoms <= y.
double weighted_cdf(const WeightedSample& ws, double y);

// Smallest atom a with F(a) >= q (lower quantile); q must lie in (0, 1).
double weighted_quantile(const WeightedSample& ws, double q);

double weighted_median(const WeightedSample& ws);

double weighted_mean(const WeightedSample& ws);

// sup_y |F1(y) - F2(y)|. Both CDFs are step functions, so the supremum is
// attained at one of the atoms of either sample.
double kolmogorov_distance(const WeightedSample& first,
                           const WeightedSample& second);

// Compensated (Neumaier) summation, used wherever the order of a long sum
// must not matter beyond rounding.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace robmarg
