#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace robmarg {

// Triplets (y_i, x_i, delta_i). Columns listed in z_index form the always
// observed block z; delta_i = 1 marks rows where y and every other column are
// observed. Entries of incomplete rows outside z may be NaN.
class ObservedDataset {
 public:
  ObservedDataset(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<int> z_index,
                  std::vector<int> delta);

  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<int>& z_index() const { return z_index_; }
  const std::vector<int>& delta() const { return delta_; }

  // n x k matrix of the always-observed columns.
  Eigen::MatrixXd z() const;
  Eigen::RowVectorXd z_row(std::size_t i) const;

  std::size_t complete_count() const;
  std::vector<std::size_t> complete_rows() const;

  ObservedDataset without_row(std::size_t i) const;
  ObservedDataset select_rows(const std::vector<std::size_t>& rows) const;

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  std::vector<int> z_index_;
  std::vector<int> delta_;
};

}  // namespace robmarg
