#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cvxsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid caller-supplied input (zero vectors, bad dimensions, non-finite data).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// All projected index values merged into a single bin.
class DegenerateProjectionError : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap; carries the best iterate seen.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, Vector best)
        : Error(what), best_iterate(std::move(best)) {}
    Vector best_iterate;
};

/// The constraint set of a least-distance program is empty.
class InfeasibleConstraintsError : public Error {
public:
    using Error::Error;
};

/// A linear system required by a fit was numerically singular.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Empirical information matrix too ill-conditioned to invert.
class SingularInformationError : public Error {
public:
    using Error::Error;
};

/// Index parameter sits on the boundary of the half-sphere (first coordinate zero).
class BoundaryPointError : public Error {
public:
    using Error::Error;
};

/// An alternating run cannot continue from its current index parameter.
class RestartRequiredError : public Error {
public:
    RestartRequiredError(const std::string& what, Vector theta)
        : Error(what), theta(std::move(theta)) {}
    Vector theta;
};

/// Regression sample: covariate rows x (n by d) and responses y (n).
/// Immutable after construction; all entries must be finite, n >= 3, d >= 1.
struct Dataset {
    Matrix x;
    Vector y;

    Dataset(Matrix x_in, Vector y_in);

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index d() const { return x.cols(); }
};

/// Unit d-vector with a nonnegative first coordinate.
struct IndexParameter {
    Vector theta;

    /// Validates the stored invariants (unit norm to 1e-12, theta[0] >= 0).
    explicit IndexParameter(Vector v);

    Eigen::Index dim() const { return theta.size(); }
    double operator[](Eigen::Index i) const { return theta[i]; }
};

/// Sorted, tie-merged index values with per-bin mean responses and counts.
///
/// t is strictly increasing with consecutive gaps >= the binning tolerance,
/// w holds the bin counts (the diagonal of the weight matrix), and map sends
/// each original observation to its bin.
struct SortedProjection {
    Vector t;
    Vector ybar;
    Vector w;
    std::vector<Eigen::Index> map;

    Eigen::Index size() const { return t.size(); }
};

/// d x (d-1) matrix whose columns are an orthonormal basis of the hyperplane
/// orthogonal to a given index parameter.
struct PerpBasis {
    Matrix H;
};

}  // namespace cvxsim
