#pragma once

#include "oostrack/continuous_models.hpp"
#include "oostrack/trajectory.hpp"

#include <optional>
#include <vector>

namespace oostrack {

/// One Gaussian term of a trajectory density: start step, end step, the OOS
/// mark u and the stacked state Gaussian. For Bernoulli densities `weight` is
/// the mixture coefficient alpha; for PPP components it is the intensity weight.
struct TrajectoryComponent {
    int start_step = 0;    ///< beta; -1 marks a trajectory alive only at the OOS time
    int end_step = 0;      ///< kappa
    bool at_tau = false;   ///< u = 1: the last window block is the state at the OOS time
    double weight = 1.0;
    TrajectoryState state;

    /// Absolute state position of time step `step` inside `state`.
    [[nodiscard]] int position_of(int step) const { return step - start_step; }
    [[nodiscard]] bool alive_at(int step) const { return !at_tau && start_step >= 0 && start_step <= step && step <= end_step; }
};

using TrajectoryMixture = std::vector<TrajectoryComponent>;

/// Key ordering used for canonical mixtures: (start, end, u).
[[nodiscard]] bool component_key_less(const TrajectoryComponent& a, const TrajectoryComponent& b);
[[nodiscard]] bool component_key_equal(const TrajectoryComponent& a, const TrajectoryComponent& b);

/// Drops zero-weight terms, merges terms sharing (start, end, u) by weight
/// addition and moment matching, and sorts by key.
[[nodiscard]] TrajectoryMixture merge_by_key(TrajectoryMixture mixture);

inline constexpr int kMissed = -1;
inline constexpr int kAbsent = -1;

struct HistoryEntry {
    double time = 0.0;
    int measurement = kMissed;
    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct LocalHypothesis {
    double existence = 0.0;
    double log_weight = 0.0;  ///< log weight factor contributed by the latest update
    TrajectoryMixture density;
    std::vector<HistoryEntry> history;
};

using BernoulliSlot = std::vector<LocalHypothesis>;

/// `selections[i]` indexes a local hypothesis of slot i, or is kAbsent when
/// the slot holds no Bernoulli under this hypothesis.
struct GlobalHypothesis {
    double weight = 1.0;
    std::vector<int> selections;
};

/// Anchors of an out-of-sequence scan at time tau between steps
/// k_before = k°-1 and k_after = k°.
struct OosContext {
    double tau = 0.0;
    int k_before = 0;
    int k_after = 0;
    double dt1 = 0.0;
    double dt2 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
    bool approximate = false;  ///< another OOS scan already hit this interval
};

struct PmbmPosterior {
    int state_dim = 4;
    int current_step = 0;
    std::vector<double> step_times{0.0};
    TrajectoryMixture ppp;
    std::vector<BernoulliSlot> slots;
    std::vector<GlobalHypothesis> globals{GlobalHypothesis{}};
    std::optional<OosContext> oos;  ///< set between retrodiction and marginalisation
    std::vector<int> oos_anchors;   ///< k° of every OOS scan processed so far

    [[nodiscard]] static PmbmPosterior empty(int state_dim, double t0 = 0.0);
    [[nodiscard]] double current_time() const { return step_times.back(); }
};

[[nodiscard]] PmbmPosterior predict(PmbmPosterior posterior, double new_time, const ContinuousModel& model);

[[nodiscard]] PmbmPosterior lscan_truncate(PmbmPosterior posterior, int L);

struct PruneParams {
    double hypothesis_threshold = 1e-4;
    double ppp_threshold = 1e-5;
    int max_globals = 200;
    double alive_threshold = 1e-4;     ///< Gamma_a
    double existence_threshold = 1e-5; ///< Bernoullis below it are dropped
};

[[nodiscard]] PmbmPosterior prune(PmbmPosterior posterior, const PruneParams& params);

/// Removes unreferenced local hypotheses and slots absent in every global.
void garbage_collect(PmbmPosterior& posterior);

/// Merges duplicate global hypotheses and normalises weights.
void normalize_globals(PmbmPosterior& posterior);

[[nodiscard]] PmbmPosterior tpmb_project(PmbmPosterior posterior);

enum class EstimatorMode { Tpmbm, Tpmb };

struct TrajectoryEstimate {
    int start_step = 0;
    std::vector<Vector> states;
    double existence = 0.0;
    [[nodiscard]] int end_step() const { return start_step + static_cast<int>(states.size()) - 1; }
};

/// Tpmbm: best global hypothesis, Bernoullis with r >= threshold.
/// Tpmb: projected posterior, Bernoullis with r > threshold.
[[nodiscard]] std::vector<TrajectoryEstimate> estimate(const PmbmPosterior& posterior, EstimatorMode mode, double threshold);

/// Throws InvalidArgument describing the first violated invariant.
void check_invariants(const PmbmPosterior& posterior, double tol = 1e-9);

}  // namespace oostrack
