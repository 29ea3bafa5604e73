#pragma once

#include "oostrack/types.hpp"

#include <limits>
#include <vector>

namespace oostrack {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rows are tasks, columns are options; +inf marks a forbidden pair.
using CostMatrix = Matrix;

struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Minimum-cost injective row -> column assignment (rows <= cols). Among
/// optimal assignments the lexicographically smallest one is returned.
/// Throws InfeasibleAssignment when no finite assignment exists.
[[nodiscard]] Assignment solve_assignment(const CostMatrix& cost);

/// Up to K cheapest distinct assignments ordered by (cost, row_to_col).
/// Empty when the problem is infeasible.
[[nodiscard]] std::vector<Assignment> murty_kbest(const CostMatrix& cost, int K);

/// Sum of the selected entries, added in row order.
[[nodiscard]] double assignment_cost(const CostMatrix& cost, const std::vector<int>& row_to_col);

}  // namespace oostrack
