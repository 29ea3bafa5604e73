#pragma once

#include "oostrack/measurement_update.hpp"
#include "oostrack/oos.hpp"

#include <string>
#include <vector>

namespace oostrack {

enum class FilterFamily { Tpmbm, Tpmb };
enum class OosMode { Discard, Snap, Optimal };

struct FilterVariant {
    FilterFamily family = FilterFamily::Tpmbm;
    OosMode mode = OosMode::Optimal;

    /// "tpmbm:none", "tpmb:noos", "tpmbm:oos", ...
    [[nodiscard]] std::string name() const;
    [[nodiscard]] static FilterVariant parse(const std::string& text);
    friend bool operator==(const FilterVariant&, const FilterVariant&) = default;
};

struct TrackerSettings {
    int L = 5;
    PruneParams prune;
    double tpmbm_threshold = 0.4;
    double tpmb_threshold = 0.5;
};

/// Online filter consuming scans in arrival order. Scans older than the
/// current step time are out-of-sequence and handled according to the variant.
class Tracker {
public:
    Tracker(ContinuousModel model, SensorModel sensor, FilterVariant variant, TrackerSettings settings);

    void process(const Scan& scan);

    [[nodiscard]] std::vector<TrajectoryEstimate> estimates() const;
    [[nodiscard]] const PmbmPosterior& posterior() const { return posterior_; }

    [[nodiscard]] int discarded_oos() const { return discarded_; }
    [[nodiscard]] int window_rejections() const { return window_rejections_; }
    [[nodiscard]] int approximate_oos() const { return approximate_; }

private:
    void finish_update(PmbmPosterior updated);

    ContinuousModel model_;
    SensorModel sensor_;
    FilterVariant variant_;
    TrackerSettings settings_;
    PmbmPosterior posterior_;
    int discarded_ = 0;
    int window_rejections_ = 0;
    int approximate_ = 0;
};

}  // namespace oostrack
