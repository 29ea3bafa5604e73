#pragma once

#include "oostrack/types.hpp"

namespace oostrack {

/// Continuous-time multi-target model: M/M/inf appearance/disappearance with
/// Wiener-velocity single-target motion in `dim` spatial dimensions.
/// State layout is [p_1..p_d, v_1..v_d].
struct ContinuousModel {
    double lambda = 0.12;  ///< appearance rate (1/s)
    double mu = 0.02;      ///< death rate (1/s)
    Vector mean_appearance;
    Matrix cov_appearance;
    double q = 0.2;        ///< diffusion intensity (m^2/s^3)
    int dim = 2;

    [[nodiscard]] int state_dim() const { return 2 * dim; }

    /// Throws InvalidArgument when a field violates its invariant.
    void validate() const;
};

/// Exact discretisation of the Wiener velocity model over an interval.
struct DiscretizedKernel {
    Matrix F;
    Matrix Q;
    double dt = 0.0;
};

struct GaussianBirthFit {
    double expected_count = 0.0;
    Vector mean;
    Matrix cov;
};

[[nodiscard]] double survival_probability(double mu, double dt);

[[nodiscard]] DiscretizedKernel wiener_kernel(double q, int dim, double dt);

/// Probability that a target alive at one end of an interval of length
/// `dt_interval` (and known to die / appear within it) is still alive a lag
/// `dt` into the interval.
[[nodiscard]] double oos_survival_probability(double mu, double dt, double dt_interval);

/// Moments of the truncated-exponential time lag on [0, dt): E[t], E[t^2], E[t^3].
struct TimeLagMoments {
    double m1 = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
};

/// Computed by adaptive Gauss-Kronrod quadrature; throws NumericalFailure
/// when the relative error estimate exceeds `rel_tol`.
[[nodiscard]] TimeLagMoments time_lag_moments(double mu, double dt, double rel_tol = 1e-10);

/// Gaussian fit to the PPP of targets born in an interval of length dt.
[[nodiscard]] GaussianBirthFit birth_fit(const ContinuousModel& model, double dt);

/// Gaussian fit to the PPP of trajectories that appear within dt1 and die
/// within the following dt2 (alive in between, never sampled).
[[nodiscard]] GaussianBirthFit oos_birth_fit(const ContinuousModel& model, double dt1, double dt2);

/// Expected number of such trajectories.
[[nodiscard]] double oos_birth_weight(double lambda, double mu, double dt1, double dt2);

}  // namespace oostrack
