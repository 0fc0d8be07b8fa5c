#pragma once

#include "cloak/fem.hpp"
#include "cloak/steady.hpp"
#include "cloak/types.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cloak {

/// Raised when Armijo backtracking exhausts its budget.
class LineSearchError : public std::runtime_error {
public:
    LineSearchError(const std::string& what, double last_step, double last_merit, double reference_merit)
        : std::runtime_error(what), last_step(last_step), last_merit(last_merit), reference_merit(reference_merit) {}

    double last_step;
    double last_merit;
    double reference_merit;
};

/// Fields on a time grid, one column per instant t_0..t_N.
struct Trajectory {
    TimeGrid grid;
    Matrix z;
    Matrix q;
    Matrix p;
    Matrix u;
};

struct ArmijoOptions {
    double initial = 1.0;
    double contraction = 0.5;
    double c1 = 1e-4;
    int max_backtracks = 30;
};

struct OptimizerOptions {
    double tol = 1e-8;  // relative to max(1, ||g0||)
    int max_iter = 50;
    ArmijoOptions armijo;
};

/// How the adjoint is closed at the final time.
enum class TerminalCondition {
    Steady,   // p_N is prescribed as the steady adjoint (default)
    Natural,  // p_N follows from the discrete cost, exact adjoint of J
};

struct IterationRecord {
    int iter = 0;
    double cost = 0.0;   // trapezoidal J
    double merit = 0.0;  // functional minimized by the line search
    double grad_norm = 0.0;
    double step = 0.0;
    int backtracks = 0;
};

struct TransientResult {
    Trajectory trajectory;
    SteadySolution steady;
    std::vector<IterationRecord> log;
    bool converged = false;
    int iterations = 0;
    double cost = 0.0;
    std::string warning;
};

/// Trapezoidal space-time inner product sum_k w_k a_k^T b_k.
double weighted_dot(const TimeGrid& grid, const Matrix& a, const Matrix& b);

/// Crank-Nicolson step matrices M/dt +- A/2 with the left one factorized once.
class CrankNicolson {
public:
    CrankNicolson(const SparseMatrix& mass, const SparseMatrix& stiffness, double dt);

    /// Solves (M/dt + A/2) x = rhs.
    Vector solve(const Vector& rhs) const;
    /// (M/dt - A/2) x
    Vector explicit_part(const Vector& x) const { return minus_ * x; }

private:
    SparseMatrix minus_;
    Eigen::SimplicialLDLT<SparseMatrix> plus_;
};

/// (M/dt + A/2) z_{k+1} = (M/dt - A/2) z_k + F, z_0 = 0.
Matrix solve_reference(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid);

/// Crank-Nicolson on EME^T q' + EAE^T q = F_o + EF + Bu with the control
/// averaged as (u_k + u_{k+1})/2, q_0 = 0.
Matrix solve_state(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid, const Matrix& u);

/// Discrete adjoint of the Crank-Nicolson state equation and trapezoidal cost.
/// Backward recursion on the half-step multipliers pi:
///   (M/dt + A/2) pi_k = (M/dt - A/2) pi_{k+1} + M_obs (q_k - E z_k),  k = N-1..1,
/// then p_0 = pi_1, p_k = (pi_k + pi_{k+1})/2, p_N = pi_N. With a terminal
/// value pi_N = p_terminal exactly; without one pi_N solves
/// (M/dt + A/2) pi_N = M_obs (q_N - E z_N) / 2.
Matrix solve_adjoint(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid, const Matrix& q,
                     const Matrix& z, const std::optional<Vector>& p_terminal);

/// Trapezoidal-in-time cost with mass/stiffness quadrature in space.
double evaluate_cost(const FemOperators& ops, const TimeGrid& grid, const Matrix& q, const Matrix& z, const Matrix& u,
                     const ControlWeights& w);

/// Factorization of P = beta*M_u + beta_g*A_u, computed once per run.
class ControlPreconditioner {
public:
    ControlPreconditioner(const SparseMatrix& M_u, const SparseMatrix& A_u, const ControlWeights& w);

    const SparseMatrix& matrix() const { return P_; }
    Matrix apply(const Matrix& g) const;  // P^{-1} g, column by column

private:
    SparseMatrix P_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

struct NewtonStep {
    Matrix direction;
    Matrix gradient;
};

/// g_k = P u_k + B^T p_k and d_k = -P^{-1} g_k.
NewtonStep quasi_newton_step(const ControlPreconditioner& P, const SparseMatrix& B, const Matrix& u, const Matrix& p);

struct ArmijoResult {
    double step = 0.0;
    double merit = 0.0;
    int backtracks = 0;
};

/// Largest tau = tau0*rho^m with merit_at(tau) <= merit0 + c1 tau slope.
/// Throws LineSearchError when the budget runs out or slope >= 0.
ArmijoResult armijo_backtracking(const std::function<double(double)>& merit_at, double slope, double merit0,
                                 const ArmijoOptions& opt);

/// The same search along u + tau d with slope <g, d> in the trapezoidal inner product.
ArmijoResult armijo_backtracking(const std::function<double(const Matrix&)>& merit, const Matrix& u, const Matrix& d,
                                 const Matrix& g, const TimeGrid& grid, double merit0, const ArmijoOptions& opt);

/// Modified Newton iteration on the full-order model: steady solve, reference solve,
/// u^(0) = u_ss, then state/adjoint/gradient/direction/Armijo until the
/// gradient test passes. Non-convergence sets `warning` instead of throwing.
TransientResult solve_transient_ocp(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                                    const TimeGrid& grid, const OptimizerOptions& opt = {},
                                    TerminalCondition terminal = TerminalCondition::Steady);

/// Functional whose exact gradient is the iteration's gradient when p_N is
/// prescribed: J - dt/4 e_N^T M_obs e_N + dt q_N^T (M/dt + A/2) p_T.
/// `terminal_coupling` holds (M/dt + A/2) p_T.
double terminal_merit(double cost, const TimeGrid& grid, const Vector& e_N, const Vector& Mobs_e_N, const Vector& q_N,
                      const Vector& terminal_coupling);

struct NewtonOutcome {
    Matrix u;
    Matrix q;
    Matrix p;
    std::vector<IterationRecord> log;
    bool converged = false;
    int iterations = 0;
    std::string warning;
};

/// The shared outer loop. `Model` provides
///   Matrix state(const Matrix& u), Matrix response(const Matrix& d) (state with zero load),
///   Matrix adjoint(const Matrix& q),
///   double cost(const Matrix& q, const Matrix& u), double merit(const Matrix& q, const Matrix& u),
///   Matrix gradient(const Matrix& u, const Matrix& p), Matrix precondition(const Matrix& g).
template <class Model>
NewtonOutcome modified_newton(Model& model, const TimeGrid& grid, Matrix u0, const OptimizerOptions& opt) {
    NewtonOutcome out;
    out.u = std::move(u0);
    out.q = model.state(out.u);
    out.p = model.adjoint(out.q);
    double merit = model.merit(out.q, out.u);
    Matrix g = model.gradient(out.u, out.p);
    const double threshold = opt.tol * std::max(1.0, g.norm());
    out.log.push_back({0, model.cost(out.q, out.u), merit, g.norm(), 0.0, 0});

    for (int it = 1;; ++it) {
        if (g.norm() <= threshold) {
            out.converged = true;
            break;
        }
        if (it > opt.max_iter) {
            out.warning = "gradient tolerance not reached after " + std::to_string(opt.max_iter) + " iterations";
            break;
        }
        const Matrix d = -model.precondition(g);
        const Matrix dq = model.response(d);
        auto trial = [&](double tau) { return model.merit(out.q + tau * dq, out.u + tau * d); };
        ArmijoResult ls;
        try {
            ls = armijo_backtracking(trial, weighted_dot(grid, g, d), merit, opt.armijo);
        } catch (const LineSearchError& e) {
            out.warning = std::string("line search failed: ") + e.what();
            break;
        }
        out.u += ls.step * d;
        out.q += ls.step * dq;
        out.p = model.adjoint(out.q);
        merit = ls.merit;
        g = model.gradient(out.u, out.p);
        out.iterations = it;
        out.log.push_back({it, model.cost(out.q, out.u), merit, g.norm(), ls.step, ls.backtracks});
    }
    return out;
}

}  // namespace cloak
