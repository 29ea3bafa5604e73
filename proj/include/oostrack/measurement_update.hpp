#pragma once

#include "oostrack/pmbm.hpp"

#include <functional>
#include <vector>

namespace oostrack {

/// Linear-Gaussian point-target sensor with uniform clutter on a box.
struct SensorModel {
    Matrix H;
    Matrix R;
    double p_detect = 0.9;
    double clutter_rate = 10.0;  ///< expected clutter count per scan
    Vector region_min;
    Vector region_max;
    double gate_quantile = 0.999;

    [[nodiscard]] int measurement_dim() const { return static_cast<int>(H.rows()); }
    /// lambda^C(z): clutter_rate / volume inside the box, 0 outside.
    [[nodiscard]] double clutter_intensity(const Vector& z) const;
    /// Squared Mahalanobis gate from the chi-square quantile.
    [[nodiscard]] double gate_threshold() const;
    void validate(int state_dim) const;
};

/// Position-only sensor for the Wiener velocity state layout.
[[nodiscard]] SensorModel position_sensor(int dim, double sigma, double p_detect, double clutter_rate,
                                          Vector region_min, Vector region_max);

struct Scan {
    double time = 0.0;
    std::vector<Vector> measurements;
};

/// In-sequence update at the current step. `scan.time` must equal the
/// posterior's current time.
[[nodiscard]] PmbmPosterior update(PmbmPosterior predicted, const Scan& scan, const SensorModel& sensor,
                                   int max_globals);

namespace detail {

/// Absolute state position observed by the scan, or -1 when the component
/// cannot generate a detection.
using BlockSelector = std::function<int(const TrajectoryComponent&)>;

/// PMBM association update shared by the in-sequence, OOS and snapped
/// variants. Measurements that no component and no clutter can explain are
/// ignored.
[[nodiscard]] PmbmPosterior association_update(PmbmPosterior posterior, const Scan& scan, const SensorModel& sensor,
                                               int max_globals, const BlockSelector& select);

}  // namespace detail

}  // namespace oostrack
