#include "oostrack/experiment.hpp"

#include <algorithm>
#include <random>

namespace oostrack {

namespace {

Vector gaussian(std::mt19937_64& rng, const Vector& mean, const Matrix& cov) {
    std::normal_distribution<double> n01;
    Vector w(mean.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = n01(rng);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalFailure("sampling covariance is not positive definite");
    return mean + llt.matrixL() * w;
}

}  // namespace

Scenario sample_scenario(const ExperimentConfig& config, int run_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(run_index)};
    std::mt19937_64 rng(seq);
    const ContinuousModel& model = config.model;
    const SensorModel& sensor = config.sensor;
    const int n = config.n_scans;

    Scenario sc;
    sc.scans.resize(n);
    std::exponential_distribution<double> gap(config.scan_rate);
    double t = 0.0;
    for (int s = 0; s < n; ++s) {
        t += gap(rng);
        sc.scans[s].scan_index = s;
        sc.scans[s].time = t;
    }
    const double horizon = t;

    if (model.lambda > 0.0) {
        std::exponential_distribution<double> arrival(model.lambda);
        std::exponential_distribution<double> lifetime(model.mu);
        for (double a = arrival(rng); a < horizon; a += arrival(rng)) {
            TruthTrajectory tr;
            tr.appearance = a;
            tr.death = a + lifetime(rng);
            Vector x = gaussian(rng, model.mean_appearance, model.cov_appearance);
            double now = a;
            for (int s = 0; s < n; ++s) {
                const double ts = sc.scans[s].time;
                if (ts <= a) continue;
                if (ts >= tr.death) break;
                const DiscretizedKernel k = wiener_kernel(model.q, model.dim, ts - now);
                x = gaussian(rng, k.F * x, k.Q);
                now = ts;
                tr.scans.push_back(s);
                tr.states.push_back(x);
            }
            sc.truth.push_back(std::move(tr));
        }
    }

    std::bernoulli_distribution detect(sensor.p_detect);
    std::poisson_distribution<int> clutter_count(sensor.clutter_rate > 0.0 ? sensor.clutter_rate : 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vector zero = Vector::Zero(sensor.measurement_dim());
    for (int s = 0; s < n; ++s) {
        auto& z = sc.scans[s].measurements;
        for (const auto& tr : sc.truth) {
            const auto it = std::lower_bound(tr.scans.begin(), tr.scans.end(), s);
            if (it == tr.scans.end() || *it != s) continue;
            if (!detect(rng)) continue;
            z.push_back(sensor.H * tr.states[static_cast<std::size_t>(it - tr.scans.begin())] + gaussian(rng, zero, sensor.R));
        }
        const int nc = sensor.clutter_rate > 0.0 ? clutter_count(rng) : 0;
        for (int c = 0; c < nc; ++c) {
            Vector p(sensor.measurement_dim());
            for (Eigen::Index i = 0; i < p.size(); ++i)
                p[i] = sensor.region_min[i] + unit(rng) * (sensor.region_max[i] - sensor.region_min[i]);
            z.push_back(std::move(p));
        }
    }

    // Every oos_every-th scan is pushed back by a Poisson number of slots.
    std::poisson_distribution<int> delay(config.oos_delay_rate > 0.0 ? config.oos_delay_rate : 1.0);
    std::vector<std::pair<double, int>> keys;
    for (int s = 0; s < n; ++s) {
        double key = s + 1;
        if ((s + 1) % config.oos_every == 0) {
            sc.scans[s].delayed = true;
            sc.scans[s].delay = config.oos_delay_rate > 0.0 ? delay(rng) : 0;
            if (sc.scans[s].delay > 0) key += sc.scans[s].delay + 0.5;
        }
        keys.emplace_back(key, s);
    }
    std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double latest = 0.0;
    for (std::size_t d = 0; d < keys.size(); ++d) {
        ScanRecord& rec = sc.scans[keys[d].second];
        rec.delivery_position = static_cast<int>(d);
        rec.is_oos = rec.time < latest;
        latest = std::max(latest, rec.time);
        sc.delivery.push_back(rec.scan_index);
    }
    return sc;
}

std::vector<Track> truth_tracks(const Scenario& scenario, const std::vector<int>& steps, int dim) {
    std::vector<Track> out;
    for (const auto& tr : scenario.truth) {
        Track t;
        for (std::size_t j = 0; j < steps.size(); ++j) {
            const auto it = std::lower_bound(tr.scans.begin(), tr.scans.end(), steps[j]);
            if (it == tr.scans.end() || *it != steps[j]) continue;
            if (t.positions.empty()) t.start_step = static_cast<int>(j) + 1;
            t.positions.push_back(tr.states[static_cast<std::size_t>(it - tr.scans.begin())].head(dim));
        }
        if (!t.positions.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::vector<Track> estimate_tracks(const std::vector<TrajectoryEstimate>& estimates, int dim) {
    std::vector<Track> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) {
        Track t;
        t.start_step = e.start_step;
        for (const auto& x : e.states) t.positions.push_back(x.head(dim));
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace oostrack
