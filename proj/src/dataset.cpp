#include "robmarg/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "robmarg/error.hpp"

namespace robmarg {

ObservedDataset::ObservedDataset(Eigen::VectorXd y, Eigen::MatrixXd x,
                                 std::vector<int> z_index, std::vector<int> delta)
    : y_(std::move(y)), x_(std::move(x)), z_index_(std::move(z_index)),
      delta_(std::move(delta)) {
  const auto n = y_.size();
  if (x_.rows() != n || static_cast<Eigen::Index>(delta_.size()) != n) {
    throw InputError("y, x and delta differ in length");
  }
  if (z_index_.empty()) throw InputError("at least one always-observed column is required");
  for (int c : z_index_) {
    if (c < 0 || c >= x_.cols()) throw InputError("z column index out of range");
  }
  bool any_complete = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c : z_index_) {
      if (!std::isfinite(x_(i, c))) throw InputError("z must be fully observed");
    }
    const int d = delta_[static_cast<std::size_t>(i)];
    if (d != 0 && d != 1) throw InputError("delta entries must be 0 or 1");
    if (d == 1) {
      any_complete = true;
      if (!std::isfinite(y_[i]) || !x_.row(i).allFinite()) {
        throw InputError("complete rows must have observed y and x");
      }
    }
  }
  if (!any_complete) throw InputError("no complete cases");
}

Eigen::MatrixXd ObservedDataset::z() const {
  Eigen::MatrixXd out(x_.rows(), static_cast<Eigen::Index>(z_index_.size()));
  for (std::size_t k = 0; k < z_index_.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = x_.col(z_index_[k]);
  }
  return out;
}

Eigen::RowVectorXd ObservedDataset::z_row(std::size_t i) const {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(z_index_.size()));
  for (std::size_t k = 0; k < z_index_.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = x_(static_cast<Eigen::Index>(i), z_index_[k]);
  }
  return out;
}

std::size_t ObservedDataset::complete_count() const {
  return static_cast<std::size_t>(std::count(delta_.begin(), delta_.end(), 1));
}

std::vector<std::size_t> ObservedDataset::complete_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < delta_.size(); ++i) {
    if (delta_[i] == 1) rows.push_back(i);
  }
  return rows;
}

ObservedDataset ObservedDataset::select_rows(const std::vector<std::size_t>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m);
  Eigen::MatrixXd x(m, x_.cols());
  std::vector<int> delta(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(rows[r]);
    y[static_cast<Eigen::Index>(r)] = y_[i];
    x.row(static_cast<Eigen::Index>(r)) = x_.row(i);
    delta[r] = delta_[rows[r]];
  }
  return ObservedDataset(std::move(y), std::move(x), z_index_, std::move(delta));
}

ObservedDataset ObservedDataset::without_row(std::size_t i) const {
  std::vector<std::size_t> rows;
  rows.reserve(size() - 1);
  for (std::size_t r = 0; r < size(); ++r) {
    if (r != i) rows.push_back(r);
  }
  return select_rows(rows);
}

}  // namespace robmarg
