#include "oostrack/tracker.hpp"

#include <algorithm>

namespace oostrack {

std::string FilterVariant::name() const {
    std::string out = family == FilterFamily::Tpmbm ? "tpmbm" : "tpmb";
    switch (mode) {
    case OosMode::Discard: return out + ":none";
    case OosMode::Snap: return out + ":noos";
    case OosMode::Optimal: return out + ":oos";
    }
    return out;
}

FilterVariant FilterVariant::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("filter '" + text + "' must look like family:mode");
    const std::string family = text.substr(0, colon);
    const std::string mode = text.substr(colon + 1);
    FilterVariant v;
    if (family == "tpmbm") v.family = FilterFamily::Tpmbm;
    else if (family == "tpmb") v.family = FilterFamily::Tpmb;
    else throw InvalidArgument("unknown filter family '" + family + "' (expected tpmbm or tpmb)");
    if (mode == "none") v.mode = OosMode::Discard;
    else if (mode == "noos") v.mode = OosMode::Snap;
    else if (mode == "oos") v.mode = OosMode::Optimal;
    else throw InvalidArgument("unknown OOS mode '" + mode + "' (expected none, noos or oos)");
    return v;
}

Tracker::Tracker(ContinuousModel model, SensorModel sensor, FilterVariant variant, TrackerSettings settings)
    : model_(std::move(model)), sensor_(std::move(sensor)), variant_(variant), settings_(settings),
      posterior_(PmbmPosterior::empty(model_.state_dim(), 0.0)) {
    model_.validate();
    sensor_.validate(model_.state_dim());
    if (settings_.L < 1) throw InvalidArgument("L must be >= 1");
}

void Tracker::finish_update(PmbmPosterior updated) {
    updated = prune(std::move(updated), settings_.prune);
    if (variant_.family == FilterFamily::Tpmb) updated = tpmb_project(std::move(updated));
    posterior_ = std::move(updated);
}

void Tracker::process(const Scan& scan) {
    const int max_globals = settings_.prune.max_globals;
    if (scan.time > posterior_.current_time()) {
        PmbmPosterior p = predict(posterior_, scan.time, model_);
        p = lscan_truncate(std::move(p), settings_.L);
        finish_update(update(std::move(p), scan, sensor_, max_globals));
        return;
    }
    if (variant_.mode == OosMode::Discard || posterior_.current_step < 1) {
        ++discarded_;
        return;
    }
    try {
        if (variant_.mode == OosMode::Snap) {
            finish_update(noos_update(posterior_, scan, sensor_, max_globals, settings_.L));
        } else {
            const auto before = posterior_.oos_anchors.size();
            PmbmPosterior p = process_oos(posterior_, scan, model_, sensor_, max_globals, settings_.L);
            if (p.oos_anchors.size() > before) {
                const int anchor = p.oos_anchors.back();
                if (std::count(p.oos_anchors.begin(), p.oos_anchors.end(), anchor) > 1) ++approximate_;
            }
            finish_update(std::move(p));
        }
    } catch (const WindowError&) {
        ++window_rejections_;
    }
}

std::vector<TrajectoryEstimate> Tracker::estimates() const {
    if (variant_.family == FilterFamily::Tpmb) return estimate(posterior_, EstimatorMode::Tpmb, settings_.tpmb_threshold);
    return estimate(posterior_, EstimatorMode::Tpmbm, settings_.tpmbm_threshold);
}

}  // namespace oostrack
