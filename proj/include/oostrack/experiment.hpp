#pragma once

#include "oostrack/tracker.hpp"
#include "oostrack/trajectory_metric.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace oostrack {

struct ExperimentConfig {
    ContinuousModel model;
    SensorModel sensor;
    int n_scans = 120;
    double scan_rate = 1.0;       ///< mu_m, scan inter-arrival rate (1/s)
    int oos_every = 5;
    double oos_delay_rate = 1.0;  ///< Poisson mean of the delay in scan slots
    std::vector<FilterVariant> filters;
    std::vector<int> windows{5};
    TrackerSettings tracker;      ///< L is taken from `windows`
    MetricParams metric;
    int runs = 100;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

/// Parameters of the evaluation scenario described for the benchmark.
[[nodiscard]] ExperimentConfig paper_config();

/// Flat `key = value` format, `#` comments, dotted keys. Unknown keys and
/// malformed values raise InvalidArgument naming the source and line.
[[nodiscard]] ExperimentConfig parse_config(std::istream& in, const std::string& source);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

struct TruthTrajectory {
    double appearance = 0.0;
    double death = 0.0;
    std::vector<int> scans;      ///< scan indices (0-based, time order) at which it is alive
    std::vector<Vector> states;  ///< state at each of those scans
};

struct ScanRecord {
    int scan_index = 0;          ///< 0-based rank in time order
    double time = 0.0;
    std::vector<Vector> measurements;
    int delivery_position = 0;   ///< 0-based position in the arrival stream
    bool is_oos = false;
    bool delayed = false;        ///< selected for a delay draw
    int delay = 0;
};

struct Scenario {
    std::vector<TruthTrajectory> truth;
    std::vector<ScanRecord> scans;     ///< time order
    std::vector<int> delivery;         ///< scan indices in arrival order
};

[[nodiscard]] Scenario sample_scenario(const ExperimentConfig& config, int run_index);

/// Truth sampled at the given scan indices (the filter's step timeline);
/// step j of the result corresponds to steps[j - 1].
[[nodiscard]] std::vector<Track> truth_tracks(const Scenario& scenario, const std::vector<int>& steps, int dim);

[[nodiscard]] std::vector<Track> estimate_tracks(const std::vector<TrajectoryEstimate>& estimates, int dim);

struct StepError {
    int run = 0;
    int delivery_index = 0;  ///< 1-based
    int scan_index = 0;      ///< 1-based
    MetricReport report;
};

struct RunResult {
    int run = 0;
    FilterVariant filter;
    int L = 0;
    bool failed = false;
    std::string failure;
    double runtime_s = 0.0;
    int window_rejections = 0;
    int approximate_oos = 0;
    std::vector<StepError> steps;
};

/// One filter on one sampled scenario.
[[nodiscard]] RunResult run_filter(const ExperimentConfig& config, const Scenario& scenario, int run,
                                   const FilterVariant& filter, int L);

struct SummaryRow {
    FilterVariant filter;
    int L = 0;
    double rms_total = 0.0;
    double rms_loc = 0.0;
    double rms_false = 0.0;
    double rms_miss = 0.0;
    double rms_switch = 0.0;
    double mean_runtime_s = 0.0;
    int runs_used = 0;
    int runs_failed = 0;
    int window_rejections = 0;
    int approximate_oos = 0;
    std::vector<double> rms_by_delivery;
};

struct ExperimentResult {
    std::vector<RunResult> runs;  ///< ordered by (run, filter, L)
    std::vector<SummaryRow> summary;
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config);

/// per_step.csv, summary.csv and one rms_<filter>_L<L>.dat per series.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace oostrack
