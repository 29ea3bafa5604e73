#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace oostrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Precondition violated by the caller (bad time ordering, negative interval, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not reach its target accuracy or produced a
/// degenerate result. `residual()` carries the last error estimate when known.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

/// No finite-cost assignment exists.
class InfeasibleAssignment : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An out-of-sequence scan falls before the L-scan window.
class WindowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace oostrack
