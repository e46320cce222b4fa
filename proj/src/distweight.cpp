#include "robmarg/distweight.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robmarg/error.hpp"

namespace robmarg {

void CompensatedSum::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

WeightedSample::WeightedSample(std::vector<double> atoms,
                               std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty()) throw InputError("empty distribution");
  if (atoms_.size() != weights_.size()) {
    throw InputError("atoms and weights differ in length");
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!std::isfinite(atoms_[i])) throw InputError("non-finite atom");
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw InputError("weights must be finite and nonnegative");
    }
    total.add(weights_[i]);
  }
  total_ = total.value();
  if (!(total_ > 0.0)) throw InputError("empty distribution: zero total weight");

  std::vector<std::size_t> order;
  order.reserve(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (weights_[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    return atoms_[a] < atoms_[b];
  });

  CompensatedSum running;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double a = atoms_[order[k]];
    running.add(weights_[order[k]]);
    if (!support_.empty() && support_.back() == a) {
      cumulative_.back() = running.value() / total_;
    } else {
      support_.push_back(a);
      cumulative_.push_back(running.value() / total_);
    }
  }
  cumulative_.back() = 1.0;
}

WeightedSample WeightedSample::uniform(std::vector<double> atoms) {
  std::vector<double> w(atoms.size(), 1.0);
  return WeightedSample(std::move(atoms), std::move(w));
}

std::vector<double> WeightedSample::normalized_weights() const {
  std::vector<double> out(weights_);
  for (double& w : out) w /= total_;
  return out;
}

double weighted_cdf(const WeightedSample& ws, double y) {
  const auto support = ws.support();
  const auto it = std::upper_bound(support.begin(), support.end(), y);
  if (it == support.begin()) return 0.0;
  return ws.cumulative()[static_cast<std::size_t>(it - support.begin()) - 1];
}

double weighted_quantile(const WeightedSample& ws, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InputError("quantile level must lie in (0, 1)");
  }
  // The slack absorbs rounding in the cumulative sums, so that e.g. the
  // median of four equal atoms is the second one.
  constexpr double kSlack = 1e-12;
  const auto cum = ws.cumulative();
  const auto it = std::lower_bound(cum.begin(), cum.end(), q - kSlack);
  return ws.support()[static_cast<std::size_t>(it - cum.begin())];
}

double weighted_median(const WeightedSample& ws) {
  return weighted_quantile(ws, 0.5);
}

double weighted_mean(const WeightedSample& ws) {
  CompensatedSum s;
  const auto a = ws.atoms();
  const auto w = ws.weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (w[i] > 0.0) s.add(w[i] * a[i]);
  }
  return s.value() / ws.total_weight();
}

double kolmogorov_distance(const WeightedSample& first,
                           const WeightedSample& second) {
  const auto s1 = first.support();
  const auto c1 = first.cumulative();
  const auto s2 = second.support();
  const auto c2 = second.cumulative();
  // Merge walk over the union of supports; both CDFs are constant between
  // consecutive union points, so left limits are the previous right values.
  std::size_t i = 0;
  std::size_t j = 0;
  double f1 = 0.0;
  double f2 = 0.0;
  double best = 0.0;
  while (i < s1.size() || j < s2.size()) {
    double next;
    if (j == s2.size() || (i < s1.size() && s1[i] <= s2[j])) {
      next = s1[i];
    } else {
      next = s2[j];
    }
    while (i < s1.size() && s1[i] == next) f1 = c1[i++];
    while (j < s2.size() && s2[j] == next) f2 = c2[j++];
    best = std::max(best, std::abs(f1 - f2));
  }
  return best;
}

}  // namespace robmarg
