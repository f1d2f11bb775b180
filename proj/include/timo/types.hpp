#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace timo {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Per-class sample blocks. Block i holds the rows of class i; block heights may differ.
using ClassBank = std::vector<Matrix>;

inline std::size_t total_rows(const ClassBank& bank) {
  std::size_t n = 0;
  for (const auto& block : bank) n += static_cast<std::size_t>(block.rows());
  return n;
}

}  // namespace timo
