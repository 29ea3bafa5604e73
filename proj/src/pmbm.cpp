#include "oostrack/pmbm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace oostrack {

bool component_key_less(const TrajectoryComponent& a, const TrajectoryComponent& b) {
    return std::tie(a.start_step, a.end_step, a.at_tau) < std::tie(b.start_step, b.end_step, b.at_tau);
}

bool component_key_equal(const TrajectoryComponent& a, const TrajectoryComponent& b) {
    return a.start_step == b.start_step && a.end_step == b.end_step && a.at_tau == b.at_tau;
}

TrajectoryMixture merge_by_key(TrajectoryMixture mixture) {
    std::erase_if(mixture, [](const TrajectoryComponent& c) { return !(c.weight > 0.0); });
    std::stable_sort(mixture.begin(), mixture.end(), component_key_less);
    TrajectoryMixture out;
    out.reserve(mixture.size());
    std::vector<const TrajectoryState*> states;
    std::vector<double> weights;
    for (std::size_t i = 0; i < mixture.size();) {
        std::size_t j = i + 1;
        while (j < mixture.size() && component_key_equal(mixture[i], mixture[j])) ++j;
        if (j == i + 1) {
            out.push_back(std::move(mixture[i]));
        } else {
            states.clear();
            weights.clear();
            double total = 0.0;
            for (std::size_t k = i; k < j; ++k) {
                states.push_back(&mixture[k].state);
                weights.push_back(mixture[k].weight);
                total += mixture[k].weight;
            }
            TrajectoryComponent merged = mixture[i];
            merged.state = merge_states(states, weights);
            merged.weight = total;
            out.push_back(std::move(merged));
        }
        i = j;
    }
    return out;
}

PmbmPosterior PmbmPosterior::empty(int state_dim, double t0) {
    PmbmPosterior p;
    p.state_dim = state_dim;
    p.step_times = {t0};
    return p;
}

PmbmPosterior predict(PmbmPosterior posterior, double new_time, const ContinuousModel& model) {
    if (posterior.oos) throw InvalidArgument("predict: posterior still carries OOS augmentation");
    if (!(new_time > posterior.current_time())) throw InvalidArgument("predict: time must increase");
    const int k = posterior.current_step;
    const double dt = new_time - posterior.current_time();
    const double ps = survival_probability(model.mu, dt);
    const DiscretizedKernel kernel = wiener_kernel(model.q, model.dim, dt);

    auto extend = [&](TrajectoryComponent& c) {
        c.state.append_transition(kernel.F, kernel.Q);
        c.end_step = k + 1;
    };

    for (auto& slot : posterior.slots) {
        for (auto& hyp : slot) {
            TrajectoryMixture next;
            next.reserve(hyp.density.size() + 1);
            for (auto& c : hyp.density) {
                if (c.alive_at(k) && c.end_step == k) {
                    TrajectoryComponent survived = c;
                    extend(survived);
                    survived.weight = c.weight * ps;
                    c.weight *= (1.0 - ps);
                    next.push_back(std::move(c));
                    next.push_back(std::move(survived));
                } else {
                    next.push_back(std::move(c));
                }
            }
            std::stable_sort(next.begin(), next.end(), component_key_less);
            hyp.density = std::move(next);
        }
    }

    for (auto& c : posterior.ppp) {
        if (c.end_step != k) continue;
        extend(c);
        c.weight *= ps;
    }
    std::erase_if(posterior.ppp, [&](const TrajectoryComponent& c) { return c.end_step != k + 1; });

    const GaussianBirthFit birth = birth_fit(model, dt);
    if (birth.expected_count > 0.0) {
        TrajectoryComponent b;
        b.start_step = k + 1;
        b.end_step = k + 1;
        b.weight = birth.expected_count;
        b.state = TrajectoryState(birth.mean, birth.cov, model.state_dim());
        posterior.ppp.push_back(std::move(b));
    }

    posterior.step_times.push_back(new_time);
    posterior.current_step = k + 1;
    return posterior;
}

PmbmPosterior lscan_truncate(PmbmPosterior posterior, int L) {
    if (L < 1) throw InvalidArgument("lscan_truncate: L must be >= 1");
    const int first_kept_step = posterior.current_step - L + 1;
    auto truncate = [&](TrajectoryComponent& c) {
        if (c.at_tau || c.start_step < 0) return;
        c.state.freeze_before(c.position_of(first_kept_step));
    };
    for (auto& slot : posterior.slots)
        for (auto& hyp : slot)
            for (auto& c : hyp.density) truncate(c);
    for (auto& c : posterior.ppp) truncate(c);
    return posterior;
}

void normalize_globals(PmbmPosterior& posterior) {
    auto& globals = posterior.globals;
    std::map<std::vector<int>, std::size_t> seen;
    std::vector<GlobalHypothesis> merged;
    merged.reserve(globals.size());
    for (auto& g : globals) {
        auto [it, inserted] = seen.try_emplace(g.selections, merged.size());
        if (inserted) merged.push_back(std::move(g));
        else merged[it->second].weight += g.weight;
    }
    double total = 0.0;
    for (const auto& g : merged) total += g.weight;
    if (!(total > 0.0)) throw NumericalFailure("global hypothesis weights sum to zero");
    for (auto& g : merged) g.weight /= total;
    globals = std::move(merged);
}

void garbage_collect(PmbmPosterior& posterior) {
    auto& slots = posterior.slots;
    auto& globals = posterior.globals;
    std::vector<BernoulliSlot> kept_slots;
    std::vector<std::size_t> kept_index;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        std::vector<int> remap(slots[i].size(), -1);
        for (const auto& g : globals) {
            const int s = g.selections[i];
            if (s != kAbsent) remap[s] = 0;
        }
        BernoulliSlot compact;
        for (std::size_t j = 0; j < slots[i].size(); ++j) {
            if (remap[j] < 0) continue;
            remap[j] = static_cast<int>(compact.size());
            compact.push_back(std::move(slots[i][j]));
        }
        if (compact.empty()) continue;
        for (auto& g : globals) {
            int& s = g.selections[i];
            if (s != kAbsent) s = remap[s];
        }
        kept_index.push_back(i);
        kept_slots.push_back(std::move(compact));
    }
    if (kept_index.size() != slots.size()) {
        for (auto& g : globals) {
            std::vector<int> sel;
            sel.reserve(kept_index.size());
            for (std::size_t i : kept_index) sel.push_back(g.selections[i]);
            g.selections = std::move(sel);
        }
    }
    slots = std::move(kept_slots);
}

PmbmPosterior prune(PmbmPosterior posterior, const PruneParams& params) {
    const int k = posterior.current_step;

    // Gamma_a: declare trajectories dead when the alive mass is negligible.
    for (auto& slot : posterior.slots) {
        for (auto& hyp : slot) {
            double alive = 0.0;
            for (const auto& c : hyp.density)
                if (c.alive_at(k) && c.end_step == k) alive += c.weight;
            if (alive > 0.0 && alive < params.alive_threshold) {
                std::erase_if(hyp.density, [&](const TrajectoryComponent& c) { return c.alive_at(k) && c.end_step == k; });
                double rest = 0.0;
                for (const auto& c : hyp.density) rest += c.weight;
                if (rest > 0.0) {
                    for (auto& c : hyp.density) c.weight /= rest;
                } else {
                    hyp.existence = 0.0;
                }
            }
        }
    }

    // Bernoullis with (near) zero existence become absent.
    for (std::size_t i = 0; i < posterior.slots.size(); ++i) {
        const auto& slot = posterior.slots[i];
        for (auto& g : posterior.globals) {
            int& s = g.selections[i];
            if (s == kAbsent) continue;
            const auto& hyp = slot[s];
            if (!(hyp.existence > 0.0) || hyp.existence < params.existence_threshold || hyp.density.empty()) s = kAbsent;
        }
    }
    normalize_globals(posterior);

    auto& globals = posterior.globals;
    std::stable_sort(globals.begin(), globals.end(),
                     [](const GlobalHypothesis& a, const GlobalHypothesis& b) { return a.weight > b.weight; });
    std::size_t keep = 0;
    while (keep < globals.size() && keep < static_cast<std::size_t>(std::max(1, params.max_globals))
           && (keep == 0 || globals[keep].weight >= params.hypothesis_threshold))
        ++keep;
    globals.resize(keep);
    normalize_globals(posterior);

    std::erase_if(posterior.ppp, [&](const TrajectoryComponent& c) { return c.weight < params.ppp_threshold; });
    garbage_collect(posterior);
    return posterior;
}

PmbmPosterior tpmb_project(PmbmPosterior posterior) {
    if (posterior.globals.empty()) throw InvalidArgument("tpmb_project: no global hypotheses");
    std::vector<BernoulliSlot> slots;
    for (std::size_t i = 0; i < posterior.slots.size(); ++i) {
        const auto& slot = posterior.slots[i];
        std::vector<double> marginal(slot.size(), 0.0);
        for (const auto& g : posterior.globals)
            if (g.selections[i] != kAbsent) marginal[g.selections[i]] += g.weight;
        double r = 0.0;
        std::size_t best = 0;
        double best_mass = -1.0;
        for (std::size_t j = 0; j < slot.size(); ++j) {
            const double mass = marginal[j] * slot[j].existence;
            r += mass;
            if (mass > best_mass) {
                best_mass = mass;
                best = j;
            }
        }
        if (!(r > 0.0)) continue;
        LocalHypothesis merged;
        merged.existence = std::min(r, 1.0);
        merged.history = slot[best].history;
        for (std::size_t j = 0; j < slot.size(); ++j) {
            const double mass = marginal[j] * slot[j].existence;
            if (!(mass > 0.0)) continue;
            for (const auto& c : slot[j].density) {
                TrajectoryComponent t = c;
                t.weight = c.weight * mass / r;
                merged.density.push_back(std::move(t));
            }
        }
        merged.density = merge_by_key(std::move(merged.density));
        slots.push_back(BernoulliSlot{std::move(merged)});
    }
    posterior.slots = std::move(slots);
    posterior.globals = {GlobalHypothesis{1.0, std::vector<int>(posterior.slots.size(), 0)}};
    return posterior;
}

namespace {

TrajectoryEstimate estimate_from(const LocalHypothesis& hyp) {
    std::map<int, double> end_mass;
    for (const auto& c : hyp.density)
        if (!c.at_tau && c.start_step >= 0) end_mass[c.end_step] += c.weight;
    int best_end = 0;
    double best = -1.0;
    for (const auto& [end, mass] : end_mass)
        if (mass >= best) {  // ties -> larger end step
            best = mass;
            best_end = end;
        }
    const TrajectoryComponent* chosen = nullptr;
    for (const auto& c : hyp.density) {
        if (c.at_tau || c.start_step < 0 || c.end_step != best_end) continue;
        if (!chosen || c.weight > chosen->weight) chosen = &c;
    }
    TrajectoryEstimate e;
    e.existence = hyp.existence;
    if (!chosen) return e;
    e.start_step = chosen->start_step;
    for (int i = 0; i < chosen->state.length(); ++i) e.states.push_back(chosen->state.state_mean(i));
    return e;
}

}  // namespace

std::vector<TrajectoryEstimate> estimate(const PmbmPosterior& posterior, EstimatorMode mode, double threshold) {
    std::vector<TrajectoryEstimate> out;
    if (mode == EstimatorMode::Tpmb && posterior.globals.size() > 1) {
        return estimate(tpmb_project(posterior), mode, threshold);
    }
    if (posterior.globals.empty()) return out;
    std::size_t best = 0;
    for (std::size_t a = 1; a < posterior.globals.size(); ++a)
        if (posterior.globals[a].weight > posterior.globals[best].weight) best = a;
    const auto& g = posterior.globals[best];
    for (std::size_t i = 0; i < posterior.slots.size(); ++i) {
        if (g.selections[i] == kAbsent) continue;
        const auto& hyp = posterior.slots[i][g.selections[i]];
        const bool report = mode == EstimatorMode::Tpmbm ? hyp.existence >= threshold : hyp.existence > threshold;
        if (!report) continue;
        TrajectoryEstimate e = estimate_from(hyp);
        if (!e.states.empty()) out.push_back(std::move(e));
    }
    return out;
}

void check_invariants(const PmbmPosterior& posterior, double tol) {
    auto fail = [](const std::string& msg) { throw InvalidArgument("invariant violated: " + msg); };
    if (static_cast<int>(posterior.step_times.size()) != posterior.current_step + 1) fail("step_times size");
    for (std::size_t i = 1; i < posterior.step_times.size(); ++i)
        if (!(posterior.step_times[i] > posterior.step_times[i - 1])) fail("step_times not increasing");

    auto check_component = [&](const TrajectoryComponent& c, bool alive_required) {
        const int n = posterior.state_dim;
        int expected = c.start_step < 0 ? 1 : c.end_step - c.start_step + 1 + (c.at_tau ? 1 : 0);
        if (c.state.length() != expected) fail("trajectory length inconsistent with (start, end)");
        if (c.state.state_dim() != n) fail("state dimension");
        if (c.start_step >= 0 && c.end_step < c.start_step) fail("end before start");
        if (alive_required && c.start_step >= 0 && c.end_step != posterior.current_step) fail("PPP component not alive");
        const Matrix& P = c.state.window_cov();
        if (P.size() > 0) {
            if ((P - P.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + P.cwiseAbs().maxCoeff())) fail("covariance not symmetric");
            Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, P.trace())) fail("covariance not PSD");
        }
    };

    for (const auto& c : posterior.ppp) {
        if (c.weight < 0.0) fail("negative PPP weight");
        check_component(c, true);
    }
    for (const auto& slot : posterior.slots) {
        for (const auto& hyp : slot) {
            if (hyp.existence < 0.0 || hyp.existence > 1.0 + tol) fail("existence outside [0,1]");
            double total = 0.0;
            for (std::size_t i = 0; i < hyp.density.size(); ++i) {
                const auto& c = hyp.density[i];
                total += c.weight;
                check_component(c, false);
                for (std::size_t j = 0; j < i; ++j)
                    if (component_key_equal(c, hyp.density[j])) fail("duplicate (start, end, u) in mixture");
            }
            if (!hyp.density.empty() && std::abs(total - 1.0) > tol) fail("mixture weights do not sum to one");
        }
    }
    double total = 0.0;
    for (const auto& g : posterior.globals) {
        if (g.selections.size() != posterior.slots.size()) fail("global hypothesis arity");
        for (std::size_t i = 0; i < g.selections.size(); ++i) {
            const int s = g.selections[i];
            if (s != kAbsent && (s < 0 || s >= static_cast<int>(posterior.slots[i].size()))) fail("selection out of range");
        }
        total += g.weight;
    }
    if (std::abs(total - 1.0) > tol) fail("global weights do not sum to one");
}

}  // namespace oostrack
