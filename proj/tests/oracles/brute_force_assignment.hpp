#pragma once

#include "oostrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Every injective row -> column assignment with finite cost, sorted by
/// (cost, row_to_col).
inline std::vector<oostrack::Assignment> enumerate_assignments(const oostrack::CostMatrix& cost) {
    std::vector<oostrack::Assignment> out;
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    std::vector<int> current(rows, -1);
    std::vector<char> used(cols, 0);
    std::function<void(int)> rec = [&](int r) {
        if (r == rows) {
            double total = 0.0;
            for (int i = 0; i < rows; ++i) total += cost(i, current[i]);
            if (std::isfinite(total)) out.push_back({current, total});
            return;
        }
        for (int c = 0; c < cols; ++c) {
            if (used[c]) continue;
            used[c] = 1;
            current[r] = c;
            rec(r + 1);
            used[c] = 0;
        }
    };
    rec(0);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.row_to_col < b.row_to_col;
    });
    return out;
}

}  // namespace oracle
