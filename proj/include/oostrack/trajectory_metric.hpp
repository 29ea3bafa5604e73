#pragma once

#include "oostrack/types.hpp"

#include <vector>

namespace oostrack {

struct MetricParams {
    double p = 2.0;
    double c = 10.0;
    double gamma = 1.0;
    void validate() const;
};

/// Position sequence on consecutive steps start_step, start_step + 1, ...
struct Track {
    int start_step = 1;
    std::vector<Vector> positions;

    [[nodiscard]] int end_step() const { return start_step + static_cast<int>(positions.size()) - 1; }
    [[nodiscard]] bool present(int step) const { return step >= start_step && step <= end_step(); }
    [[nodiscard]] const Vector& at(int step) const { return positions[static_cast<std::size_t>(step - start_step)]; }
};

/// Metric values normalised by the horizon: each field is (cost / k)^(1/p),
/// so total^p equals the sum of the component p-th powers.
struct MetricReport {
    double total = 0.0;
    double localization = 0.0;
    double missed = 0.0;
    double false_cost = 0.0;
    double switch_cost = 0.0;
    /// Upper minus lower bound for components solved by the fallback
    /// (normalised like `total`'s p-th power); zero when solved exactly.
    double relaxation_gap = 0.0;
    bool exact = true;
};

/// Trajectory metric over steps 1..horizon. Absent steps are unassignable:
/// a pair of absent states costs nothing, one absent side costs c^p / 2.
[[nodiscard]] MetricReport trajectory_distance(const std::vector<Track>& truth, const std::vector<Track>& estimate,
                                               const MetricParams& params, int horizon);

/// sqrt of the mean of per-run normalised squared errors d^2 / k.
[[nodiscard]] double rms_error(const std::vector<double>& normalized_squared);

}  // namespace oostrack
