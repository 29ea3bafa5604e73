#pragma once

#include "oostrack/measurement_update.hpp"

#include <limits>

namespace oostrack {

inline constexpr int kNoWindow = std::numeric_limits<int>::max();

/// Augments every trajectory density with the state at time tau (mark u),
/// and adds the PPP of trajectories living only inside the enclosing interval.
/// Requires t_0 < tau < t_k with tau distinct from every step time.
/// Throws WindowError when the interval starts before the L-scan window.
[[nodiscard]] PmbmPosterior retrodict(PmbmPosterior posterior, double tau, const ContinuousModel& model,
                                      int L = kNoWindow);

/// Update of a retrodicted posterior with the scan taken at tau. Only u = 1
/// components can be detected.
[[nodiscard]] PmbmPosterior oos_update(PmbmPosterior retro, const Scan& scan, const SensorModel& sensor,
                                       int max_globals);

/// Removes the tau information and returns a posterior on the sample steps.
[[nodiscard]] PmbmPosterior marginalize_oos(PmbmPosterior updated);

/// Step index the baseline snaps tau to: nearest step time in 1..k, ties to the earlier.
[[nodiscard]] int snap_step(const PmbmPosterior& posterior, double tau);

/// Baseline: update the stored states at the nearest sample step.
[[nodiscard]] PmbmPosterior noos_update(PmbmPosterior posterior, const Scan& scan, const SensorModel& sensor,
                                        int max_globals, int L = kNoWindow);

/// Full optimal pipeline; a scan that lands exactly on a step time is
/// handled by noos_update.
[[nodiscard]] PmbmPosterior process_oos(PmbmPosterior posterior, const Scan& scan, const ContinuousModel& model,
                                        const SensorModel& sensor, int max_globals, int L = kNoWindow);

}  // namespace oostrack
