#include "oostrack/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace oostrack;

/// CSV with header trajectory_id,step,p1,...; rows of one trajectory must
/// cover consecutive steps.
std::vector<Track> read_tracks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
    std::map<std::string, std::vector<std::pair<int, Vector>>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, cell;
        std::getline(ss, id, ',');
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InvalidArgument(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        if (values.size() < 2) throw InvalidArgument(path + ":" + std::to_string(line_no) + ": need step and position");
        Vector p = Eigen::Map<const Vector>(values.data() + 1, static_cast<Eigen::Index>(values.size() - 1));
        rows[id].emplace_back(static_cast<int>(values[0]), std::move(p));
    }
    std::vector<Track> out;
    for (auto& [id, pts] : rows) {
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        Track t;
        t.start_step = pts.front().first;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].first != t.start_step + static_cast<int>(i))
                throw InvalidArgument(path + ": trajectory " + id + " has non-consecutive steps");
            t.positions.push_back(pts[i].second);
        }
        out.push_back(std::move(t));
    }
    return out;
}

void print_summary(const ExperimentResult& result) {
    std::printf("%-12s %3s %8s %8s %8s %8s %8s %10s\n", "filter", "L", "total", "loc", "false", "miss", "switch", "time[s]");
    for (const auto& row : result.summary) {
        std::printf("%-12s %3d %8.3f %8.3f %8.3f %8.3f %8.3f %10.3f\n", row.filter.name().c_str(), row.L, row.rms_total,
                    row.rms_loc, row.rms_false, row.rms_miss, row.rms_switch, row.mean_runtime_s);
        if (row.runs_failed > 0)
            std::fprintf(stderr, "warning: %s L=%d: %d run(s) failed and were excluded\n", row.filter.name().c_str(), row.L,
                         row.runs_failed);
        if (row.window_rejections > 0)
            std::fprintf(stderr, "note: %s L=%d: %d OOS scan(s) older than the window were discarded\n",
                         row.filter.name().c_str(), row.L, row.window_rejections);
        if (row.approximate_oos > 0)
            std::fprintf(stderr, "note: %s L=%d: %d OOS scan(s) shared an interval with an earlier one (approximate)\n",
                         row.filter.name().c_str(), row.L, row.approximate_oos);
    }
    for (const auto& r : result.runs)
        if (r.failed) std::fprintf(stderr, "warning: run %d %s L=%d failed: %s\n", r.run, r.filter.name().c_str(), r.L, r.failure.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-discrete trajectory PMBM tracking with out-of-sequence measurements"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "results", filters, windows;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs, threads, scans;
    auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment");
    run->add_option("--config", config_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override run.seed");
    run->add_option("--runs", runs, "Override run.runs");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--filters", filters, "Comma-separated variants, e.g. tpmbm:oos,tpmb:none");
    run->add_option("--L", windows, "Comma-separated L-scan windows");
    run->add_option("--threads", threads, "Worker threads");
    run->add_option("--scans", scans, "Override scenario.n_scans");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a configuration file");
    validate->add_option("--config", validate_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);

    std::string truth_path, estimate_path;
    MetricParams metric;
    int horizon = 0;
    auto* met = app.add_subcommand("metric", "Trajectory metric between two CSV track sets");
    met->add_option("--truth", truth_path, "CSV: trajectory_id,step,p1,p2,...")->required()->check(CLI::ExistingFile);
    met->add_option("--estimate", estimate_path, "CSV: trajectory_id,step,p1,p2,...")->required()->check(CLI::ExistingFile);
    met->add_option("--p", metric.p, "Order")->capture_default_str();
    met->add_option("--c", metric.c, "Cut-off")->capture_default_str();
    met->add_option("--gamma", metric.gamma, "Switch penalty")->capture_default_str();
    met->add_option("--horizon", horizon, "Last step (default: last step present in either file)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg = load_config(config_path);
            if (seed) cfg.seed = *seed;
            if (runs) cfg.runs = *runs;
            if (threads) cfg.threads = *threads;
            if (scans) cfg.n_scans = *scans;
            if (!filters.empty()) {
                cfg.filters.clear();
                std::stringstream ss(filters);
                for (std::string f; std::getline(ss, f, ',');) cfg.filters.push_back(FilterVariant::parse(f));
            }
            if (!windows.empty()) {
                cfg.windows.clear();
                std::stringstream ss(windows);
                for (std::string w; std::getline(ss, w, ',');) cfg.windows.push_back(std::stoi(w));
            }
            cfg.validate();
            const ExperimentResult result = run_experiment(cfg);
            write_outputs(result, out_dir);
            print_summary(result);
            return 0;
        }
        if (*validate) {
            const ExperimentConfig cfg = load_config(validate_path);
            std::printf("%s: ok (%zu filter(s), %zu window(s), %d run(s))\n", validate_path.c_str(), cfg.filters.size(),
                        cfg.windows.size(), cfg.runs);
            return 0;
        }
        if (*met) {
            const auto truth = read_tracks(truth_path);
            const auto est = read_tracks(estimate_path);
            if (horizon <= 0)
                for (const auto* set : {&truth, &est})
                    for (const auto& t : *set) horizon = std::max(horizon, t.end_step());
            const MetricReport r = trajectory_distance(truth, est, metric, horizon);
            std::printf("total %.10g\nlocalization %.10g\nmissed %.10g\nfalse %.10g\nswitch %.10g\n", r.total, r.localization,
                        r.missed, r.false_cost, r.switch_cost);
            if (!r.exact) std::printf("relaxation_gap %.10g\n", r.relaxation_gap);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
