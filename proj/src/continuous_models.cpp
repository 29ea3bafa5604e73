#include "oostrack/continuous_models.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oostrack {

void ContinuousModel::validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("model.lambda must be >= 0");
    if (!(mu > 0.0)) throw InvalidArgument("model.mu must be > 0");
    if (!(q > 0.0)) throw InvalidArgument("model.q must be > 0");
    if (dim < 1) throw InvalidArgument("model.dim must be >= 1");
    const int n = state_dim();
    if (mean_appearance.size() != n) throw InvalidArgument("model.mean_appearance must have 2*dim entries");
    if (cov_appearance.rows() != n || cov_appearance.cols() != n)
        throw InvalidArgument("model.cov_appearance must be (2*dim)x(2*dim)");
    if ((cov_appearance - cov_appearance.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + cov_appearance.cwiseAbs().maxCoeff()))
        throw InvalidArgument("model.cov_appearance must be symmetric");
    Eigen::LLT<Matrix> llt(cov_appearance);
    if (llt.info() != Eigen::Success) throw InvalidArgument("model.cov_appearance must be positive definite");
}

double survival_probability(double mu, double dt) {
    if (dt < 0.0) throw InvalidArgument("survival_probability: negative interval");
    return std::exp(-mu * dt);
}

DiscretizedKernel wiener_kernel(double q, int dim, double dt) {
    if (dt < 0.0) throw InvalidArgument("wiener_kernel: negative interval");
    if (dim < 1) throw InvalidArgument("wiener_kernel: dim must be >= 1");
    const int n = 2 * dim;
    DiscretizedKernel k;
    k.dt = dt;
    k.F = Matrix::Identity(n, n);
    k.F.topRightCorner(dim, dim).diagonal().setConstant(dt);
    k.Q = Matrix::Zero(n, n);
    const double dt2 = dt * dt;
    k.Q.topLeftCorner(dim, dim).diagonal().setConstant(q * dt2 * dt / 3.0);
    k.Q.topRightCorner(dim, dim).diagonal().setConstant(q * dt2 / 2.0);
    k.Q.bottomLeftCorner(dim, dim).diagonal().setConstant(q * dt2 / 2.0);
    k.Q.bottomRightCorner(dim, dim).diagonal().setConstant(q * dt);
    return k;
}

double oos_survival_probability(double mu, double dt, double dt_interval) {
    if (!(dt_interval > 0.0)) throw InvalidArgument("oos_survival_probability: interval must be positive");
    if (dt < 0.0 || dt > dt_interval) throw InvalidArgument("oos_survival_probability: dt outside [0, interval]");
    // expm1 keeps precision when mu*dt_interval is small
    const double den = -std::expm1(-mu * dt_interval);
    const double num = std::exp(-mu * dt) - std::exp(-mu * dt_interval);
    return std::clamp(num / den, 0.0, 1.0);
}

TimeLagMoments time_lag_moments(double mu, double dt, double rel_tol) {
    if (!(dt > 0.0)) throw InvalidArgument("time_lag_moments: interval must be positive");
    // Integrate over s = t / dt on [0, 1] so the integrand is O(1) for any dt.
    const double a = mu * dt;
    const double norm = a / (-std::expm1(-a));
    using Integrator = boost::math::quadrature::gauss_kronrod<double, 15>;
    double worst = 0.0;
    auto moment = [&](int order) {
        double err = 0.0;
        double l1 = 0.0;
        const double v = Integrator::integrate(
            [&](double s) { return std::pow(s, order) * norm * std::exp(-a * s); }, 0.0, 1.0, 15, rel_tol, &err, &l1);
        worst = std::max(worst, err / std::abs(v));
        return v * std::pow(dt, order);
    };
    TimeLagMoments m{moment(1), moment(2), moment(3)};
    if (worst > rel_tol) {
        std::ostringstream os;
        os << "time-lag quadrature did not converge (relative error " << worst << ")";
        throw NumericalFailure(os.str(), worst);
    }
    return m;
}

namespace {

GaussianBirthFit moment_matched_birth(const ContinuousModel& model, double dt) {
    const int d = model.dim;
    const TimeLagMoments t = time_lag_moments(model.mu, dt);
    const Vector& x = model.mean_appearance;
    const Matrix& P = model.cov_appearance;
    const Vector p = x.head(d);
    const Vector v = x.tail(d);

    GaussianBirthFit fit;
    fit.mean = x;
    fit.mean.head(d) = p + t.m1 * v;

    // E[F_t P F_t^T + Q_t] plus the spread of F_t x around the mixture mean.
    const Matrix Ppp = P.topLeftCorner(d, d);
    const Matrix Ppv = P.topRightCorner(d, d);
    const Matrix Pvv = P.bottomRightCorner(d, d);
    const Matrix I = Matrix::Identity(d, d);
    const double var_t = t.m2 - t.m1 * t.m1;

    Matrix C(2 * d, 2 * d);
    C.topLeftCorner(d, d) = Ppp + t.m1 * (Ppv + Ppv.transpose()) + t.m2 * Pvv
                            + (model.q * t.m3 / 3.0) * I + var_t * v * v.transpose();
    C.topRightCorner(d, d) = Ppv + t.m1 * Pvv + (model.q * t.m2 / 2.0) * I;
    C.bottomLeftCorner(d, d) = C.topRightCorner(d, d).transpose();
    C.bottomRightCorner(d, d) = Pvv + (model.q * t.m1) * I;
    fit.cov = symmetrized(C);
    return fit;
}

}  // namespace

GaussianBirthFit birth_fit(const ContinuousModel& model, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("birth_fit: interval must be positive");
    GaussianBirthFit fit = moment_matched_birth(model, dt);
    fit.expected_count = model.lambda / model.mu * (-std::expm1(-model.mu * dt));
    return fit;
}

double oos_birth_weight(double lambda, double mu, double dt1, double dt2) {
    if (dt1 < 0.0 || dt2 < 0.0) throw InvalidArgument("oos_birth_weight: negative interval");
    return lambda / mu * (-std::expm1(-mu * dt1)) * (-std::expm1(-mu * dt2));
}

GaussianBirthFit oos_birth_fit(const ContinuousModel& model, double dt1, double dt2) {
    if (!(dt1 > 0.0) || !(dt2 > 0.0)) throw InvalidArgument("oos_birth_fit: intervals must be positive");
    GaussianBirthFit fit = moment_matched_birth(model, dt1);
    fit.expected_count = oos_birth_weight(model.lambda, model.mu, dt1, dt2);
    return fit;
}

}  // namespace oostrack
