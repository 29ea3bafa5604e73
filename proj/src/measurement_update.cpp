#include "oostrack/measurement_update.hpp"

#include "oostrack/assignment.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace oostrack {

double SensorModel::clutter_intensity(const Vector& z) const {
    if (clutter_rate <= 0.0) return 0.0;
    double volume = 1.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] < region_min[i] || z[i] > region_max[i]) return 0.0;
        volume *= region_max[i] - region_min[i];
    }
    return clutter_rate / volume;
}

double SensorModel::gate_threshold() const {
    const boost::math::chi_squared dist(static_cast<double>(measurement_dim()));
    return boost::math::quantile(dist, gate_quantile);
}

void SensorModel::validate(int state_dim) const {
    const int nz = measurement_dim();
    if (nz < 1 || H.cols() != state_dim) throw InvalidArgument("sensor.H must be n_z x n_x");
    if (R.rows() != nz || R.cols() != nz) throw InvalidArgument("sensor.R must be n_z x n_z");
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success || (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + R.cwiseAbs().maxCoeff()))
        throw InvalidArgument("sensor.R must be symmetric positive definite");
    if (!(p_detect >= 0.0 && p_detect <= 1.0)) throw InvalidArgument("sensor.pd must lie in [0, 1]");
    if (!(clutter_rate >= 0.0)) throw InvalidArgument("sensor.clutter_rate must be >= 0");
    if (!(gate_quantile > 0.0 && gate_quantile < 1.0)) throw InvalidArgument("sensor.gate_quantile must lie in (0, 1)");
    if (region_min.size() != nz || region_max.size() != nz) throw InvalidArgument("sensor region must have n_z bounds");
    if (clutter_rate > 0.0 && ((region_max - region_min).array() <= 0.0).any())
        throw InvalidArgument("sensor region must have positive volume");
}

SensorModel position_sensor(int dim, double sigma, double p_detect, double clutter_rate, Vector region_min,
                            Vector region_max) {
    SensorModel s;
    s.H = Matrix::Zero(dim, 2 * dim);
    s.H.leftCols(dim).setIdentity();
    s.R = sigma * sigma * Matrix::Identity(dim, dim);
    s.p_detect = p_detect;
    s.clutter_rate = clutter_rate;
    s.region_min = std::move(region_min);
    s.region_max = std::move(region_max);
    return s;
}

namespace detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMinWeight = 1e-300;

double log_sum_exp(const std::vector<double>& xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

struct Detectable {
    int component = 0;
    int block = 0;
    Innovation innovation;
};

/// Per-measurement log-likelihood of each gated detectable component.
struct GateTable {
    std::vector<Detectable> detectable;
    std::vector<std::vector<std::pair<int, double>>> gated;  ///< [z] -> (detectable index, log N)
};

GateTable gate(const TrajectoryMixture& mixture, const BlockSelector& select, const std::vector<Vector>& zs,
               const SensorModel& sensor, double threshold) {
    GateTable t;
    for (std::size_t c = 0; c < mixture.size(); ++c) {
        const int block = select(mixture[c]);
        if (block < 0) continue;
        t.detectable.push_back({static_cast<int>(c), block, innovation(mixture[c].state, block, sensor.H, sensor.R)});
    }
    t.gated.resize(zs.size());
    for (std::size_t z = 0; z < zs.size(); ++z) {
        for (std::size_t d = 0; d < t.detectable.size(); ++d) {
            const Innovation& inn = t.detectable[d].innovation;
            const double m2 = mahalanobis2(inn, zs[z]);
            if (m2 > threshold) continue;
            const double nz = static_cast<double>(zs[z].size());
            const double ll = -0.5 * (m2 + inn.log_det_S + nz * std::log(2.0 * std::numbers::pi));
            t.gated[z].emplace_back(static_cast<int>(d), ll);
        }
    }
    return t;
}

/// Detection-conditioned mixture: gated components Kalman-updated with
/// weights proportional to prior weight times likelihood.
TrajectoryMixture detected_mixture(const TrajectoryMixture& mixture, const GateTable& table, int z_index,
                                   const Vector& z, const SensorModel& sensor, double& log_mass) {
    std::vector<double> logs;
    TrajectoryMixture out;
    for (const auto& [d, ll] : table.gated[z_index]) {
        const Detectable& det = table.detectable[d];
        const TrajectoryComponent& src = mixture[det.component];
        if (!(src.weight > 0.0)) continue;
        TrajectoryComponent c = src;
        c.state.kalman_update(det.block, sensor.H, sensor.R, z);
        logs.push_back(std::log(src.weight) + ll);
        out.push_back(std::move(c));
    }
    log_mass = log_sum_exp(logs);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = std::exp(logs[i] - log_mass);
    return merge_by_key(std::move(out));
}

struct HypothesisInfo {
    bool usable = false;
    double log_miss = 0.0;
    double pd_mass = 0.0;
    GateTable table;
    std::vector<double> log_det;  ///< [z], -inf when not gated
};

struct NewTarget {
    double log_weight = kNegInf;  ///< log(lambda^C(z) + e(z))
    LocalHypothesis hypothesis;
    bool exists = false;
};

}  // namespace

PmbmPosterior association_update(PmbmPosterior posterior, const Scan& scan, const SensorModel& sensor,
                                 int max_globals, const BlockSelector& select) {
    const double pd = sensor.p_detect;
    const double log_pd = pd > 0.0 ? std::log(pd) : kNegInf;
    const double threshold = sensor.gate_threshold();
    const auto& all_z = scan.measurements;

    // Local hypothesis statistics.
    std::vector<std::vector<HypothesisInfo>> info(posterior.slots.size());
    for (std::size_t i = 0; i < posterior.slots.size(); ++i) {
        info[i].resize(posterior.slots[i].size());
        for (std::size_t j = 0; j < posterior.slots[i].size(); ++j) {
            const LocalHypothesis& hyp = posterior.slots[i][j];
            HypothesisInfo& h = info[i][j];
            if (!(hyp.existence > 0.0) || hyp.density.empty()) continue;
            h.usable = true;
            h.table = gate(hyp.density, select, all_z, sensor, threshold);
            for (const auto& d : h.table.detectable) h.pd_mass += hyp.density[d.component].weight;
            h.log_miss = std::log(std::max(1.0 - hyp.existence * pd * h.pd_mass, kMinWeight));
            h.log_det.assign(all_z.size(), kNegInf);
            if (pd <= 0.0) continue;
            for (std::size_t z = 0; z < all_z.size(); ++z) {
                std::vector<double> terms;
                for (const auto& [d, ll] : h.table.gated[z]) {
                    const double w = hyp.density[h.table.detectable[d].component].weight;
                    if (w > 0.0) terms.push_back(std::log(w) + ll);
                }
                if (!terms.empty()) h.log_det[z] = std::log(hyp.existence) + log_pd + log_sum_exp(terms);
            }
        }
    }

    // New targets from the PPP.
    const GateTable ppp_table = gate(posterior.ppp, select, all_z, sensor, threshold);
    std::vector<NewTarget> fresh(all_z.size());
    for (std::size_t z = 0; z < all_z.size(); ++z) {
        NewTarget& nt = fresh[z];
        const double clutter = sensor.clutter_intensity(all_z[z]);
        double log_e = kNegInf;
        TrajectoryMixture density;
        if (pd > 0.0 && !ppp_table.gated[z].empty())
            density = detected_mixture(posterior.ppp, ppp_table, static_cast<int>(z), all_z[z], sensor, log_e);
        if (log_e != kNegInf) log_e += log_pd;
        nt.log_weight = log_sum_exp({clutter > 0.0 ? std::log(clutter) : kNegInf, log_e});
        if (log_e != kNegInf) {
            nt.exists = true;
            nt.hypothesis.existence = std::min(1.0, std::exp(log_e - nt.log_weight));
            nt.hypothesis.log_weight = nt.log_weight;
            nt.hypothesis.density = std::move(density);
            nt.hypothesis.history = {HistoryEntry{scan.time, static_cast<int>(z)}};
        }
    }

    // Measurements nothing can explain do not discriminate between hypotheses.
    std::vector<int> kept;
    for (std::size_t z = 0; z < all_z.size(); ++z) {
        bool explained = fresh[z].log_weight != kNegInf;
        for (std::size_t i = 0; i < info.size() && !explained; ++i)
            for (const auto& h : info[i])
                if (h.usable && h.log_det[z] != kNegInf) {
                    explained = true;
                    break;
                }
        if (explained) kept.push_back(static_cast<int>(z));
    }
    const int m = static_cast<int>(kept.size());

    // Children are materialised on demand and shared between globals.
    PmbmPosterior out;
    out.state_dim = posterior.state_dim;
    out.current_step = posterior.current_step;
    out.step_times = posterior.step_times;
    out.oos = posterior.oos;
    out.oos_anchors = posterior.oos_anchors;
    const std::size_t n_old = posterior.slots.size();
    out.slots.resize(n_old + static_cast<std::size_t>(m));
    std::vector<std::map<std::pair<int, int>, int>> memo(n_old);

    auto child_index = [&](std::size_t i, int j, int option) -> int {
        auto [it, inserted] = memo[i].try_emplace({j, option}, -1);
        if (!inserted) return it->second;
        const LocalHypothesis& parent = posterior.slots[i][j];
        const HypothesisInfo& h = info[i][j];
        LocalHypothesis child;
        child.history = parent.history;
        if (option < 0) {
            child.history.push_back({scan.time, kMissed});
            child.log_weight = h.log_miss;
            const double keep = 1.0 - pd * h.pd_mass;
            if (keep > kMinWeight) {
                child.density = parent.density;
                for (const auto& d : h.table.detectable) child.density[d.component].weight *= (1.0 - pd);
                for (auto& c : child.density) c.weight /= keep;
                child.density = merge_by_key(std::move(child.density));
                child.existence = std::clamp(parent.existence * keep / std::exp(h.log_miss), 0.0, 1.0);
            }
        } else {
            const int z = kept[option];
            child.history.push_back({scan.time, z});
            child.log_weight = h.log_det[z];
            double log_mass = 0.0;
            child.density = detected_mixture(parent.density, h.table, z, all_z[z], sensor, log_mass);
            child.existence = 1.0;
        }
        if (!(child.existence > 0.0) || child.density.empty()) return it->second = kAbsent;
        it->second = static_cast<int>(out.slots[i].size());
        out.slots[i].push_back(std::move(child));
        return it->second;
    };
    std::vector<int> fresh_index(m, kAbsent);
    for (int t = 0; t < m; ++t) {
        NewTarget& nt = fresh[kept[t]];
        if (!nt.exists) continue;
        fresh_index[t] = 0;
        out.slots[n_old + t].push_back(std::move(nt.hypothesis));
    }

    std::vector<double> log_weights;
    std::vector<std::vector<int>> selections;
    for (const GlobalHypothesis& g : posterior.globals) {
        if (!(g.weight > 0.0)) continue;
        double base = std::log(g.weight);
        std::vector<int> columns;  // present slots with at least one gated measurement
        for (std::size_t i = 0; i < n_old; ++i) {
            const int j = g.selections[i];
            if (j == kAbsent || !info[i][j].usable) continue;
            base += info[i][j].log_miss;
            for (int t = 0; t < m; ++t)
                if (info[i][j].log_det[kept[t]] != kNegInf) {
                    columns.push_back(static_cast<int>(i));
                    break;
                }
        }

        // Rows that can only be new targets are fixed up front.
        std::vector<int> rows;
        bool feasible = true;
        for (int t = 0; t < m; ++t) {
            bool has_old = false;
            for (int i : columns)
                if (info[i][g.selections[i]].log_det[kept[t]] != kNegInf) {
                    has_old = true;
                    break;
                }
            if (has_old) {
                rows.push_back(t);
            } else if (fresh[kept[t]].log_weight == kNegInf) {
                feasible = false;
                break;
            } else {
                base += fresh[kept[t]].log_weight;
            }
        }
        if (!feasible) continue;

        const int nr = static_cast<int>(rows.size());
        const int nb = static_cast<int>(columns.size());
        CostMatrix cost = CostMatrix::Constant(nr, nb + nr, kInf);
        for (int r = 0; r < nr; ++r) {
            const int z = kept[rows[r]];
            for (int b = 0; b < nb; ++b) {
                const HypothesisInfo& h = info[columns[b]][g.selections[columns[b]]];
                if (h.log_det[z] != kNegInf) cost(r, b) = -(h.log_det[z] - h.log_miss);
            }
            if (fresh[z].log_weight != kNegInf) cost(r, nb + r) = -fresh[z].log_weight;
        }
        const int budget = std::max(1, static_cast<int>(std::ceil(max_globals * g.weight - 1e-9)));
        const std::vector<Assignment> ranked = murty_kbest(cost, budget);

        for (const Assignment& a : ranked) {
            std::vector<int> detected_by(n_old, -1);
            std::vector<char> is_new(m, 0);
            for (int t = 0; t < m; ++t) is_new[t] = 1;
            for (int r = 0; r < nr; ++r) {
                const int col = a.row_to_col[r];
                if (col < nb) {
                    detected_by[columns[col]] = rows[r];
                    is_new[rows[r]] = 0;
                }
            }
            std::vector<int> sel(n_old + m, kAbsent);
            for (std::size_t i = 0; i < n_old; ++i) {
                const int j = g.selections[i];
                if (j == kAbsent || !info[i][j].usable) continue;
                sel[i] = child_index(i, j, detected_by[i]);
            }
            for (int t = 0; t < m; ++t)
                if (is_new[t]) sel[n_old + t] = fresh_index[t];
            log_weights.push_back(base - a.cost);
            selections.push_back(std::move(sel));
        }
    }
    if (log_weights.empty()) throw NumericalFailure("measurement update: no feasible association");

    const double norm = log_sum_exp(log_weights);
    if (!std::isfinite(norm)) throw NumericalFailure("measurement update: global weights vanished");
    out.globals.clear();
    for (std::size_t a = 0; a < log_weights.size(); ++a)
        out.globals.push_back({std::exp(log_weights[a] - norm), std::move(selections[a])});
    normalize_globals(out);

    out.ppp = std::move(posterior.ppp);
    for (const auto& d : ppp_table.detectable) out.ppp[d.component].weight *= (1.0 - pd);
    std::erase_if(out.ppp, [](const TrajectoryComponent& c) { return !(c.weight > 0.0); });

    garbage_collect(out);
    return out;
}

}  // namespace detail

PmbmPosterior update(PmbmPosterior predicted, const Scan& scan, const SensorModel& sensor, int max_globals) {
    if (predicted.oos) throw InvalidArgument("update: posterior carries an unfinished OOS augmentation");
    if (scan.time != predicted.current_time()) throw InvalidArgument("update: scan time differs from the current step time");
    const int k = predicted.current_step;
    return detail::association_update(std::move(predicted), scan, sensor, max_globals,
                                      [k](const TrajectoryComponent& c) {
                                          return c.alive_at(k) && c.end_step == k ? c.position_of(k) : -1;
                                      });
}

}  // namespace oostrack
