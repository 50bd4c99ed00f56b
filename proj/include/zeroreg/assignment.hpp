#pragma once

#include <Eigen/Core>
#include <vector>

namespace zeroreg {

/// Minimum-cost rectangular linear assignment. Every row of the smaller side is
/// matched exactly once. Returns, for each row, the assigned column or -1
/// (only when rows outnumber columns). Costs must be finite.
std::vector<int> solve_linear_assignment(const Eigen::MatrixXd& cost);

}  // namespace zeroreg
