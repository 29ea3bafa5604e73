#include "oostrack/oos.hpp"

#include <algorithm>
#include <cmath>

namespace oostrack {

namespace {

/// Conditional density of the state at tau given its neighbours, in the form
/// y = G * window + offset + w, w ~ N(0, noise).
struct Retrodiction {
    Matrix G;
    Vector offset;
    Matrix noise;
};

struct Kernels {
    DiscretizedKernel k1;  // t_{k°-1} -> tau
    DiscretizedKernel k2;  // tau -> t_{k°}
    GaussianBirthFit birth;  // state at tau of a target born in (t_{k°-1}, tau)
};

Matrix selector_gain(const TrajectoryState& s, int position, const Matrix& block) {
    const int n = s.state_dim();
    const int w = s.window_index(position);
    if (w < 0) throw WindowError("retrodict: required state lies outside the L-scan window");
    Matrix G = Matrix::Zero(n, s.window_length() * n);
    G.middleCols(w * n, n) = block;
    return G;
}

/// Both neighbours exist.
Retrodiction between(const TrajectoryState& s, int before, const Kernels& k) {
    const Matrix& F1 = k.k1.F;
    const Matrix& F2 = k.k2.F;
    const Matrix& Q1 = k.k1.Q;
    const Matrix S = symmetrized(F2 * Q1 * F2.transpose() + k.k2.Q);
    const Matrix K = S.llt().solve(F2 * Q1).transpose();
    Retrodiction r;
    r.G = selector_gain(s, before, F1 - K * F2 * F1) + selector_gain(s, before + 1, K);
    r.offset = Vector::Zero(s.state_dim());
    r.noise = symmetrized(Q1 - K * F2 * Q1);
    return r;
}

/// Only the earlier neighbour exists.
Retrodiction after_last(const TrajectoryState& s, int before, const Kernels& k) {
    return {selector_gain(s, before, k.k1.F), Vector::Zero(s.state_dim()), k.k1.Q};
}

/// Only the later neighbour exists; the prior at tau is the birth fit.
Retrodiction before_first(const TrajectoryState& s, const Kernels& k) {
    const Matrix& F2 = k.k2.F;
    const Matrix& P = k.birth.cov;
    const Matrix S = symmetrized(F2 * P * F2.transpose() + k.k2.Q);
    const Matrix K = S.llt().solve(F2 * P).transpose();
    const int n = s.state_dim();
    Retrodiction r;
    r.G = selector_gain(s, 0, K);
    r.offset = (Matrix::Identity(n, n) - K * F2) * k.birth.mean;
    r.noise = symmetrized(P - K * F2 * P);
    return r;
}

TrajectoryComponent augmented(const TrajectoryComponent& c, const Retrodiction& r, double weight) {
    TrajectoryComponent out = c;
    out.state.append_linear(r.G, r.offset, r.noise);
    out.at_tau = true;
    out.weight = weight;
    return out;
}

/// Applies the four-case transition to one component, appending the result(s).
void retrodict_component(const TrajectoryComponent& c, const OosContext& ctx, const Kernels& k,
                         TrajectoryMixture& out) {
    const int kb = ctx.k_before;
    const int ka = ctx.k_after;
    if (c.start_step > ka || c.end_step < kb) {
        out.push_back(c);
    } else if (c.start_step <= kb && c.end_step >= ka) {
        out.push_back(augmented(c, between(c.state, c.position_of(kb), k), c.weight));
    } else if (c.end_step == kb) {
        TrajectoryComponent dead = c;
        dead.weight = c.weight * (1.0 - ctx.p1);
        out.push_back(std::move(dead));
        if (ctx.p1 > 0.0) out.push_back(augmented(c, after_last(c.state, c.position_of(kb), k), c.weight * ctx.p1));
    } else {  // start_step == ka
        TrajectoryComponent later = c;
        later.weight = c.weight * (1.0 - ctx.p2);
        out.push_back(std::move(later));
        if (ctx.p2 > 0.0) out.push_back(augmented(c, before_first(c.state, k), c.weight * ctx.p2));
    }
}

}  // namespace

PmbmPosterior retrodict(PmbmPosterior posterior, double tau, const ContinuousModel& model, int L) {
    if (posterior.oos) throw InvalidArgument("retrodict: posterior is already augmented");
    const auto& times = posterior.step_times;
    const int k = posterior.current_step;
    if (!(tau > times.front() && tau < times.back())) throw InvalidArgument("retrodict: tau must lie strictly inside (t_0, t_k)");
    const auto it = std::upper_bound(times.begin(), times.end(), tau);
    const int ka = static_cast<int>(it - times.begin());
    if (times[ka - 1] == tau) throw InvalidArgument("retrodict: tau coincides with a step time");
    if (L != kNoWindow && ka < k - L + 2) throw WindowError("retrodict: OOS time precedes the L-scan window");

    OosContext ctx;
    ctx.tau = tau;
    ctx.k_before = ka - 1;
    ctx.k_after = ka;
    ctx.dt1 = tau - times[ka - 1];
    ctx.dt2 = times[ka] - tau;
    const double interval = times[ka] - times[ka - 1];
    ctx.p1 = oos_survival_probability(model.mu, ctx.dt1, interval);
    ctx.p2 = oos_survival_probability(model.mu, ctx.dt2, interval);
    ctx.approximate = std::find(posterior.oos_anchors.begin(), posterior.oos_anchors.end(), ka) != posterior.oos_anchors.end();

    const Kernels kernels{wiener_kernel(model.q, model.dim, ctx.dt1), wiener_kernel(model.q, model.dim, ctx.dt2),
                          oos_birth_fit(model, ctx.dt1, ctx.dt2)};

    for (auto& slot : posterior.slots) {
        for (auto& hyp : slot) {
            TrajectoryMixture next;
            for (const auto& c : hyp.density) retrodict_component(c, ctx, kernels, next);
            hyp.density = merge_by_key(std::move(next));
        }
    }
    TrajectoryMixture ppp;
    for (const auto& c : posterior.ppp) retrodict_component(c, ctx, kernels, ppp);
    std::erase_if(ppp, [](const TrajectoryComponent& c) { return !(c.weight > 0.0); });
    if (kernels.birth.expected_count > 0.0) {
        TrajectoryComponent b;
        b.start_step = -1;
        b.end_step = -1;
        b.at_tau = true;
        b.weight = kernels.birth.expected_count;
        b.state = TrajectoryState(kernels.birth.mean, kernels.birth.cov, model.state_dim());
        ppp.push_back(std::move(b));
    }
    posterior.ppp = std::move(ppp);
    posterior.oos = ctx;
    return posterior;
}

PmbmPosterior oos_update(PmbmPosterior retro, const Scan& scan, const SensorModel& sensor, int max_globals) {
    if (!retro.oos) throw InvalidArgument("oos_update: posterior has not been retrodicted");
    if (scan.time != retro.oos->tau) throw InvalidArgument("oos_update: scan time differs from the retrodiction time");
    return detail::association_update(std::move(retro), scan, sensor, max_globals, [](const TrajectoryComponent& c) {
        return c.at_tau ? c.state.length() - 1 : -1;
    });
}

PmbmPosterior marginalize_oos(PmbmPosterior updated) {
    if (!updated.oos) throw InvalidArgument("marginalize_oos: posterior has not been retrodicted");
    auto strip = [](TrajectoryComponent& c) {
        if (!c.at_tau) return;
        c.state.drop_last();
        c.at_tau = false;
    };
    for (auto& slot : updated.slots) {
        for (auto& hyp : slot) {
            double outside = 0.0;
            for (const auto& c : hyp.density)
                if (c.start_step < 0) outside += c.weight;
            std::erase_if(hyp.density, [](const TrajectoryComponent& c) { return c.start_step < 0; });
            if (hyp.density.empty() || !(outside < 1.0)) {
                hyp.existence = 0.0;
                hyp.density.clear();
                continue;
            }
            if (outside > 0.0) {
                hyp.existence *= 1.0 - outside;
                for (auto& c : hyp.density) c.weight /= 1.0 - outside;
            }
            for (auto& c : hyp.density) strip(c);
            hyp.density = merge_by_key(std::move(hyp.density));
        }
    }
    std::erase_if(updated.ppp, [](const TrajectoryComponent& c) { return c.start_step < 0; });
    for (auto& c : updated.ppp) strip(c);
    updated.ppp = merge_by_key(std::move(updated.ppp));

    for (std::size_t i = 0; i < updated.slots.size(); ++i)
        for (auto& g : updated.globals) {
            int& s = g.selections[i];
            if (s != kAbsent && !(updated.slots[i][s].existence > 0.0)) s = kAbsent;
        }
    normalize_globals(updated);
    garbage_collect(updated);

    updated.oos_anchors.push_back(updated.oos->k_after);
    updated.oos.reset();
    return updated;
}

int snap_step(const PmbmPosterior& posterior, double tau) {
    const auto& times = posterior.step_times;
    if (posterior.current_step < 1) throw InvalidArgument("snap_step: no sample steps yet");
    int best = 1;
    for (int j = 2; j <= posterior.current_step; ++j)
        if (std::abs(times[j] - tau) < std::abs(times[best] - tau)) best = j;
    return best;
}

PmbmPosterior noos_update(PmbmPosterior posterior, const Scan& scan, const SensorModel& sensor, int max_globals,
                          int L) {
    if (posterior.oos) throw InvalidArgument("noos_update: posterior carries an unfinished OOS augmentation");
    const int j = snap_step(posterior, scan.time);
    if (L != kNoWindow && j < posterior.current_step - L + 1)
        throw WindowError("noos_update: snapped step lies outside the L-scan window");
    return detail::association_update(std::move(posterior), scan, sensor, max_globals,
                                      [j](const TrajectoryComponent& c) { return c.alive_at(j) ? c.position_of(j) : -1; });
}

PmbmPosterior process_oos(PmbmPosterior posterior, const Scan& scan, const ContinuousModel& model,
                          const SensorModel& sensor, int max_globals, int L) {
    const auto& times = posterior.step_times;
    if (std::find(times.begin(), times.end(), scan.time) != times.end())
        return noos_update(std::move(posterior), scan, sensor, max_globals, L);
    PmbmPosterior retro = retrodict(std::move(posterior), scan.time, model, L);
    return marginalize_oos(oos_update(std::move(retro), scan, sensor, max_globals));
}

}  // namespace oostrack
