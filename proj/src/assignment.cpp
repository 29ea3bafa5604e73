#include "oostrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

namespace oostrack {

namespace {

/// Square problem (real rows padded with zero-cost dummy rows) solved by
/// shortest augmenting paths with dual potentials.
struct SquareSolution {
    std::vector<int> row_col;  // size N, 0-based
    std::vector<int> col_row;
    std::vector<double> u;     // 1-based like the classic formulation
    std::vector<double> v;
};

double entry(const CostMatrix& a, int rows, int i, int j) { return i < rows ? a(i, j) : 0.0; }

bool solve_square(const CostMatrix& a, SquareSolution& out) {
    const int n = static_cast<int>(a.rows());
    const int N = static_cast<int>(a.cols());
    std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0), minv(N + 1);
    std::vector<int> p(N + 1, 0), way(N + 1, 0);
    std::vector<char> used(N + 1);
    for (int i = 1; i <= N; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= N; ++j) {
                if (used[j]) continue;
                const double c = entry(a, n, i0 - 1, j - 1);
                if (std::isfinite(c)) {
                    const double cur = c - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (j1 < 0) return false;
            for (int j = 0; j <= N; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    out.row_col.assign(N, -1);
    out.col_row.assign(N, -1);
    for (int j = 1; j <= N; ++j) {
        out.row_col[p[j] - 1] = j - 1;
        out.col_row[j - 1] = p[j] - 1;
    }
    out.u = std::move(u);
    out.v = std::move(v);
    return true;
}

/// Moves the optimal matching to the lexicographically smallest one over the
/// real rows. Optimal assignments are exactly the perfect matchings of the
/// tight-edge graph of any optimal dual.
void lexicographic_refine(const CostMatrix& a, SquareSolution& s) {
    const int n = static_cast<int>(a.rows());
    const int N = static_cast<int>(a.cols());
    double scale = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < N; ++j)
            if (std::isfinite(a(i, j))) scale = std::max(scale, std::abs(a(i, j)));
    const double eps = 1e-9 * scale;
    auto tight = [&](int i, int j) {
        const double c = entry(a, n, i, j);
        return std::isfinite(c) && c - s.u[i + 1] - s.v[j + 1] <= eps;
    };

    std::vector<char> locked_row(N, 0), locked_col(N, 0);
    std::vector<int> parent_row(N), parent_col(N);
    std::vector<char> seen(N);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < N; ++c) {
            if (locked_col[c] || !tight(r, c)) continue;
            if (s.row_col[r] == c) break;
            // Give c to r; the displaced row must reach r's old column.
            const int start = s.col_row[c];
            const int target = s.row_col[r];
            if (locked_row[start]) continue;
            std::fill(seen.begin(), seen.end(), 0);
            std::deque<int> queue{start};
            int found = -1;
            while (!queue.empty() && found < 0) {
                const int x = queue.front();
                queue.pop_front();
                for (int j = 0; j < N; ++j) {
                    if (seen[j] || locked_col[j] || j == c || !tight(x, j)) continue;
                    seen[j] = 1;
                    parent_row[j] = x;
                    if (j == target) {
                        found = j;
                        break;
                    }
                    const int owner = s.col_row[j];
                    if (owner == r || locked_row[owner]) continue;
                    queue.push_back(owner);
                }
            }
            if (found < 0) continue;
            // Walk back from target: each column takes its parent row.
            int j = found;
            while (true) {
                const int x = parent_row[j];
                const int prev = s.row_col[x];
                s.row_col[x] = j;
                s.col_row[j] = x;
                if (x == start) break;
                j = prev;
            }
            s.row_col[r] = c;
            s.col_row[c] = r;
            break;
        }
        locked_row[r] = 1;
        locked_col[s.row_col[r]] = 1;
    }
}

bool solve_lex(const CostMatrix& a, std::vector<int>& row_to_col) {
    if (a.rows() > a.cols()) return false;
    if (a.rows() == 0) {
        row_to_col.clear();
        return true;
    }
    SquareSolution s;
    if (!solve_square(a, s)) return false;
    lexicographic_refine(a, s);
    row_to_col.assign(s.row_col.begin(), s.row_col.begin() + a.rows());
    for (int i = 0; i < a.rows(); ++i)
        if (!std::isfinite(a(i, row_to_col[i]))) return false;
    return true;
}

struct MurtyNode {
    CostMatrix matrix;
    std::vector<char> forced;
    Assignment best;
};

bool better(const Assignment& x, const Assignment& y) {
    if (x.cost != y.cost) return x.cost < y.cost;
    return x.row_to_col < y.row_to_col;
}

}  // namespace

double assignment_cost(const CostMatrix& cost, const std::vector<int>& row_to_col) {
    double total = 0.0;
    for (std::size_t i = 0; i < row_to_col.size(); ++i) total += cost(static_cast<Eigen::Index>(i), row_to_col[i]);
    return total;
}

Assignment solve_assignment(const CostMatrix& cost) {
    Assignment out;
    if (!solve_lex(cost, out.row_to_col)) throw InfeasibleAssignment("no finite-cost assignment exists");
    out.cost = assignment_cost(cost, out.row_to_col);
    return out;
}

std::vector<Assignment> murty_kbest(const CostMatrix& cost, int K) {
    if (K < 1) throw InvalidArgument("murty_kbest: K must be >= 1");
    std::vector<Assignment> out;
    auto cmp = [](const MurtyNode& x, const MurtyNode& y) { return better(y.best, x.best); };
    std::priority_queue<MurtyNode, std::vector<MurtyNode>, decltype(cmp)> queue(cmp);

    MurtyNode root{cost, std::vector<char>(cost.rows(), 0), {}};
    if (!solve_lex(cost, root.best.row_to_col)) return out;
    root.best.cost = assignment_cost(cost, root.best.row_to_col);
    queue.push(std::move(root));

    const int n = static_cast<int>(cost.rows());
    while (!queue.empty() && static_cast<int>(out.size()) < K) {
        MurtyNode node = queue.top();
        queue.pop();
        out.push_back(node.best);
        if (static_cast<int>(out.size()) == K) break;
        const std::vector<int> s = node.best.row_to_col;
        CostMatrix m = std::move(node.matrix);
        std::vector<char> forced = std::move(node.forced);
        for (int i = 0; i < n; ++i) {
            if (forced[i]) continue;
            MurtyNode child{m, forced, {}};
            child.matrix(i, s[i]) = kInf;
            if (solve_lex(child.matrix, child.best.row_to_col)) {
                child.best.cost = assignment_cost(cost, child.best.row_to_col);
                queue.push(std::move(child));
            }
            const double keep = m(i, s[i]);
            m.row(i).setConstant(kInf);
            m.col(s[i]).setConstant(kInf);
            m(i, s[i]) = keep;
            forced[i] = 1;
        }
    }
    return out;
}

}  // namespace oostrack
