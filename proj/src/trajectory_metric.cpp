#include "oostrack/trajectory_metric.hpp"

#include "oostrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oostrack {

void MetricParams::validate() const {
    if (!(p >= 1.0)) throw InvalidArgument("metric.p must be >= 1");
    if (!(c > 0.0)) throw InvalidArgument("metric.c must be > 0");
    if (!(gamma > 0.0)) throw InvalidArgument("metric.gamma must be > 0");
}

namespace {

constexpr std::size_t kStateCap = 1500;

struct Costs {
    double loc = 0.0;
    double miss = 0.0;
    double fal = 0.0;
    double sw = 0.0;
    [[nodiscard]] double sum() const { return loc + miss + fal + sw; }
    Costs& operator+=(const Costs& o) {
        loc += o.loc;
        miss += o.miss;
        fal += o.fal;
        sw += o.sw;
        return *this;
    }
};

struct Problem {
    const std::vector<const Track*>& truth;
    const std::vector<const Track*>& est;
    const MetricParams& params;
    double cp;    // c^p
    double half;  // c^p / 2
    double gp;    // gamma^p
};

/// Cost of pairing truth i with estimate j at a step, split by category.
Costs pair_cost(const Problem& pr, const Track& t, const Track& e, int step) {
    Costs out;
    const bool tp = t.present(step);
    const bool ep = e.present(step);
    if (tp && ep) {
        const double d = (t.at(step) - e.at(step)).norm();
        if (d < pr.params.c) {
            out.loc = std::pow(d, pr.params.p);
        } else {
            out.miss = pr.half;
            out.fal = pr.half;
        }
    } else if (tp) {
        out.miss = pr.half;
    } else if (ep) {
        out.fal = pr.half;
    }
    return out;
}

/// Cost of an assignment (truth -> estimate or -1) at a single step.
Costs step_cost(const Problem& pr, const std::vector<int>& pi, int step) {
    Costs out;
    std::vector<char> used(pr.est.size(), 0);
    for (std::size_t i = 0; i < pi.size(); ++i) {
        if (pi[i] >= 0) {
            used[pi[i]] = 1;
            out += pair_cost(pr, *pr.truth[i], *pr.est[pi[i]], step);
        } else if (pr.truth[i]->present(step)) {
            out.miss += pr.half;
        }
    }
    for (std::size_t j = 0; j < pr.est.size(); ++j)
        if (!used[j] && pr.est[j]->present(step)) out.fal += pr.half;
    return out;
}

double switch_cost(const Problem& pr, const std::vector<int>& a, const std::vector<int>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) continue;
        s += (a[i] >= 0 && b[i] >= 0) ? 1.0 : 0.5;
    }
    return s * pr.gp;
}

void enumerate(const std::vector<std::vector<int>>& allowed, std::size_t i, std::vector<int>& cur,
               std::vector<char>& used, std::vector<std::vector<int>>& out, std::size_t cap) {
    if (out.size() > cap) return;
    if (i == allowed.size()) {
        out.push_back(cur);
        return;
    }
    cur[i] = -1;
    enumerate(allowed, i + 1, cur, used, out, cap);
    for (int j : allowed[i]) {
        if (used[j]) continue;
        used[j] = 1;
        cur[i] = j;
        enumerate(allowed, i + 1, cur, used, out, cap);
        used[j] = 0;
    }
    cur[i] = -1;
}

Costs solve_exact(const Problem& pr, const std::vector<std::vector<int>>& states, int lo, int hi) {
    const std::size_t S = states.size();
    std::vector<double> sw(S * S);
    for (std::size_t a = 0; a < S; ++a)
        for (std::size_t b = 0; b < S; ++b) sw[a * S + b] = switch_cost(pr, states[a], states[b]);

    const int steps = hi - lo + 1;
    std::vector<std::vector<Costs>> local(steps, std::vector<Costs>(S));
    for (int s = 0; s < steps; ++s)
        for (std::size_t a = 0; a < S; ++a) local[s][a] = step_cost(pr, states[a], lo + s);

    std::vector<double> value(S), next(S);
    std::vector<std::vector<int>> back(steps, std::vector<int>(S, -1));
    for (std::size_t a = 0; a < S; ++a) value[a] = local[0][a].sum();
    for (int s = 1; s < steps; ++s) {
        for (std::size_t b = 0; b < S; ++b) {
            double best = kInf;
            int arg = 0;
            for (std::size_t a = 0; a < S; ++a) {
                const double v = value[a] + sw[a * S + b];
                if (v < best) {
                    best = v;
                    arg = static_cast<int>(a);
                }
            }
            next[b] = best + local[s][b].sum();
            back[s][b] = arg;
        }
        value.swap(next);
    }
    std::size_t cur = static_cast<std::size_t>(std::min_element(value.begin(), value.end()) - value.begin());
    Costs total;
    for (int s = steps - 1; s >= 0; --s) {
        total += local[s][cur];
        if (s > 0) {
            const auto prev = static_cast<std::size_t>(back[s][cur]);
            total.sw += sw[prev * S + cur];
            cur = prev;
        }
    }
    return total;
}

/// Per-step assignment given the previous one; the switch term is separable
/// per truth so each step is a linear assignment problem.
std::vector<int> greedy_step(const Problem& pr, const std::vector<std::vector<int>>& allowed, const std::vector<int>* prev,
                             int step) {
    const int a = static_cast<int>(pr.truth.size());
    const int b = static_cast<int>(pr.est.size());
    CostMatrix m = CostMatrix::Constant(a + b, a + b, kInf);
    for (int i = 0; i < a; ++i) {
        for (int j : allowed[i]) {
            double adj = 0.0;
            if (prev) adj = (*prev)[i] == j ? 0.0 : ((*prev)[i] < 0 ? 0.5 : 1.0) * pr.gp;
            m(i, j) = pair_cost(pr, *pr.truth[i], *pr.est[j], step).sum() + adj;
        }
        const double adj = (prev && (*prev)[i] >= 0) ? 0.5 * pr.gp : 0.0;
        m(i, b + i) = (pr.truth[i]->present(step) ? pr.half : 0.0) + adj;
    }
    for (int j = 0; j < b; ++j) m(a + j, j) = pr.est[j]->present(step) ? pr.half : 0.0;
    m.bottomRightCorner(b, a).setZero();
    const Assignment sol = solve_assignment(m);
    std::vector<int> pi(a, -1);
    for (int i = 0; i < a; ++i)
        if (sol.row_to_col[i] < b) pi[i] = sol.row_to_col[i];
    return pi;
}

}  // namespace

MetricReport trajectory_distance(const std::vector<Track>& truth, const std::vector<Track>& estimate,
                                 const MetricParams& params, int horizon) {
    params.validate();
    MetricReport report;
    if (horizon < 1) return report;
    const double cp = std::pow(params.c, params.p);
    const int n = static_cast<int>(truth.size());
    const int m = static_cast<int>(estimate.size());

    auto clipped = [&](const Track& t, int& lo, int& hi) {
        lo = std::max(t.start_step, 1);
        hi = std::min(t.end_step(), horizon);
        return lo <= hi;
    };

    // Connected components of the "ever closer than c" graph.
    std::vector<int> parent(n + m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::vector<char>> edge(n, std::vector<char>(m, 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const int lo = std::max({truth[i].start_step, estimate[j].start_step, 1});
            const int hi = std::min({truth[i].end_step(), estimate[j].end_step(), horizon});
            for (int s = lo; s <= hi; ++s)
                if ((truth[i].at(s) - estimate[j].at(s)).norm() < params.c) {
                    edge[i][j] = 1;
                    parent[find(i)] = find(n + j);
                    break;
                }
        }
    }

    Costs total;
    double gap = 0.0;
    for (int root = 0; root < n + m; ++root) {
        if (find(root) != root) continue;
        std::vector<int> ti, ej;
        for (int i = 0; i < n; ++i)
            if (find(i) == root) ti.push_back(i);
        for (int j = 0; j < m; ++j)
            if (find(n + j) == root) ej.push_back(j);

        int lo = horizon + 1, hi = 0;
        for (int i : ti) {
            int a, b;
            if (clipped(truth[i], a, b)) lo = std::min(lo, a), hi = std::max(hi, b);
        }
        for (int j : ej) {
            int a, b;
            if (clipped(estimate[j], a, b)) lo = std::min(lo, a), hi = std::max(hi, b);
        }
        if (lo > hi) continue;

        std::vector<const Track*> tp, ep;
        for (int i : ti) tp.push_back(&truth[i]);
        for (int j : ej) ep.push_back(&estimate[j]);
        const Problem pr{tp, ep, params, cp, cp / 2.0, std::pow(params.gamma, params.p)};

        std::vector<std::vector<int>> allowed(ti.size());
        for (std::size_t a = 0; a < ti.size(); ++a)
            for (std::size_t b = 0; b < ej.size(); ++b)
                if (edge[ti[a]][ej[b]]) allowed[a].push_back(static_cast<int>(b));

        std::vector<std::vector<int>> states;
        std::vector<int> cur(ti.size(), -1);
        std::vector<char> used(ej.size(), 0);
        enumerate(allowed, 0, cur, used, states, kStateCap);

        if (states.size() <= kStateCap) {
            total += solve_exact(pr, states, lo, hi);
            continue;
        }

        // Fallback: switch-free per-step optimum below, greedy sequence above.
        report.exact = false;
        double lower = 0.0;
        Costs upper;
        std::vector<int> prev;
        for (int s = lo; s <= hi; ++s) {
            lower += step_cost(pr, greedy_step(pr, allowed, nullptr, s), s).sum();
            std::vector<int> pi = greedy_step(pr, allowed, s == lo ? nullptr : &prev, s);
            upper += step_cost(pr, pi, s);
            if (s > lo) upper.sw += switch_cost(pr, prev, pi);
            prev = std::move(pi);
        }
        gap += upper.sum() - lower;
        total += upper;
    }

    const double k = static_cast<double>(horizon);
    const double inv = 1.0 / params.p;
    report.total = std::pow(total.sum() / k, inv);
    report.localization = std::pow(total.loc / k, inv);
    report.missed = std::pow(total.miss / k, inv);
    report.false_cost = std::pow(total.fal / k, inv);
    report.switch_cost = std::pow(total.sw / k, inv);
    report.relaxation_gap = gap / k;
    return report;
}

double rms_error(const std::vector<double>& normalized_squared) {
    if (normalized_squared.empty()) throw InvalidArgument("rms_error: no runs");
    double s = 0.0;
    for (double v : normalized_squared) s += v;
    return std::sqrt(s / static_cast<double>(normalized_squared.size()));
}

}  // namespace oostrack
