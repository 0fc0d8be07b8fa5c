#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace cloak {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when user-supplied geometry, parameters or configuration break a
/// documented constraint. The message names the violated constraint.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by sparse or dense factorizations that fail (singular systems).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Scenario parameter vector [diffusivity, source intensity, obstacle temperature].
struct ScenarioParams {
    double diffusivity = 3.5;           // m^2/s
    double intensity = 1.0e4;           // K/s
    double obstacle_temperature = 0.0;  // offset from ambient
};

/// Control penalty weights of the cost functional.
struct ControlWeights {
    double beta = 1.0e-7;
    double beta_g = 1.0e-8;

    void validate() const {
        if (!(beta > 0.0))
            throw ValidationError("control weights: beta must be > 0 for a positive-definite control block");
        if (beta_g < 0.0) throw ValidationError("control weights: beta_g must be >= 0");
    }
};

/// Uniform grid t_k = k*dt on [0, horizon].
struct TimeGrid {
    double horizon = 5.0;
    int steps = 100;

    double dt() const { return horizon / steps; }
    double time(int k) const { return k * dt(); }

    /// Trapezoidal quadrature weight of instant k.
    double weight(int k) const { return (k == 0 || k == steps) ? 0.5 * dt() : dt(); }

    void validate() const {
        if (steps < 1) throw ValidationError("time grid: steps must be >= 1");
        if (!(horizon > 0.0)) throw ValidationError("time grid: horizon must be > 0");
    }
};

}  // namespace cloak
