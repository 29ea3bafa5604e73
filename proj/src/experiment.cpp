#include "oostrack/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace oostrack {

RunResult run_filter(const ExperimentConfig& config, const Scenario& scenario, int run, const FilterVariant& filter,
                     int L) {
    RunResult result;
    result.run = run;
    result.filter = filter;
    result.L = L;
    const auto start = std::chrono::steady_clock::now();
    try {
        TrackerSettings settings = config.tracker;
        settings.L = L;
        Tracker tracker(config.model, config.sensor, filter, settings);
        std::vector<int> steps;
        double latest = 0.0;
        for (std::size_t d = 0; d < scenario.delivery.size(); ++d) {
            const ScanRecord& rec = scenario.scans[scenario.delivery[d]];
            tracker.process(Scan{rec.time, rec.measurements});
            if (rec.time > latest) {
                latest = rec.time;
                steps.push_back(rec.scan_index);
            }
            const int dim = config.model.dim;
            const auto truth = truth_tracks(scenario, steps, dim);
            const auto est = estimate_tracks(tracker.estimates(), dim);
            StepError e;
            e.run = run;
            e.delivery_index = static_cast<int>(d) + 1;
            e.scan_index = rec.scan_index + 1;
            e.report = trajectory_distance(truth, est, config.metric, static_cast<int>(steps.size()));
            result.steps.push_back(e);
        }
        result.window_rejections = tracker.window_rejections();
        result.approximate_oos = tracker.approximate_oos();
    } catch (const std::exception& e) {
        result.failed = true;
        result.failure = e.what();
        result.steps.clear();
    }
    result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    struct Task {
        int run;
        std::size_t filter;
        std::size_t window;
    };
    std::vector<Task> tasks;
    for (int r = 0; r < config.runs; ++r)
        for (std::size_t f = 0; f < config.filters.size(); ++f)
            for (std::size_t w = 0; w < config.windows.size(); ++w) tasks.push_back({r, f, w});

    ExperimentResult out;
    out.runs.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& t = tasks[i];
            const Scenario sc = sample_scenario(config, t.run);
            out.runs[i] = run_filter(config, sc, t.run, config.filters[t.filter], config.windows[t.window]);
        }
    };
    const int n_threads = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const auto& filter : config.filters) {
        for (int L : config.windows) {
            SummaryRow row;
            row.filter = filter;
            row.L = L;
            double tot = 0.0, loc = 0.0, fal = 0.0, mis = 0.0, swi = 0.0, runtime = 0.0;
            std::size_t count = 0;
            std::vector<double> by_delivery(static_cast<std::size_t>(config.n_scans), 0.0);
            for (const auto& r : out.runs) {
                if (!(r.filter == filter) || r.L != L) continue;
                if (r.failed) {
                    ++row.runs_failed;
                    continue;
                }
                ++row.runs_used;
                runtime += r.runtime_s;
                row.window_rejections += r.window_rejections;
                row.approximate_oos += r.approximate_oos;
                for (const auto& s : r.steps) {
                    const auto sq = [](double x) { return x * x; };
                    tot += sq(s.report.total);
                    loc += sq(s.report.localization);
                    fal += sq(s.report.false_cost);
                    mis += sq(s.report.missed);
                    swi += sq(s.report.switch_cost);
                    by_delivery[static_cast<std::size_t>(s.delivery_index - 1)] += sq(s.report.total);
                    ++count;
                }
            }
            if (count > 0) {
                const double c = static_cast<double>(count);
                row.rms_total = std::sqrt(tot / c);
                row.rms_loc = std::sqrt(loc / c);
                row.rms_false = std::sqrt(fal / c);
                row.rms_miss = std::sqrt(mis / c);
                row.rms_switch = std::sqrt(swi / c);
            }
            if (row.runs_used > 0) {
                row.mean_runtime_s = runtime / row.runs_used;
                for (double& v : by_delivery) v = std::sqrt(v / row.runs_used);
            }
            row.rms_by_delivery = std::move(by_delivery);
            out.summary.push_back(std::move(row));
        }
    }
    return out;
}

namespace {

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::string file_stem(const FilterVariant& f, int L) {
    std::string name = f.name();
    for (char& c : name)
        if (c == ':') c = '_';
    return name + "_L" + std::to_string(L);
}

}  // namespace

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "per_step.csv");
        os << "run,delivery_index,scan_index,filter,L,d_total,d_loc,d_miss,d_false,d_switch\n";
        for (const auto& r : result.runs)
            for (const auto& s : r.steps)
                os << s.run << ',' << s.delivery_index << ',' << s.scan_index << ',' << r.filter.name() << ',' << r.L << ','
                   << num(s.report.total) << ',' << num(s.report.localization) << ',' << num(s.report.missed) << ','
                   << num(s.report.false_cost) << ',' << num(s.report.switch_cost) << '\n';
    }
    {
        std::ofstream os(dir / "summary.csv");
        os << "filter,L,rms_total,rms_loc,rms_false,rms_miss,rms_switch,mean_runtime_s\n";
        for (const auto& row : result.summary)
            os << row.filter.name() << ',' << row.L << ',' << num(row.rms_total) << ',' << num(row.rms_loc) << ','
               << num(row.rms_false) << ',' << num(row.rms_miss) << ',' << num(row.rms_switch) << ','
               << num(row.mean_runtime_s) << '\n';
    }
    for (const auto& row : result.summary) {
        std::ofstream os(dir / ("rms_" + file_stem(row.filter, row.L) + ".dat"));
        os << "# measurement rms_total (" << row.filter.name() << ", L=" << row.L << ")\n";
        for (std::size_t d = 0; d < row.rms_by_delivery.size(); ++d) os << d + 1 << ' ' << num(row.rms_by_delivery[d]) << '\n';
    }
}

}  // namespace oostrack
