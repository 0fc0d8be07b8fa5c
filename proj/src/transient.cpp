#include "cloak/transient.hpp"

#include <cmath>

namespace cloak {

namespace {

void check_columns(const Matrix& m, int rows, const TimeGrid& grid, const char* what) {
    if (m.rows() != rows || m.cols() != grid.steps + 1)
        throw ValidationError(std::string(what) + ": expected " + std::to_string(rows) + " x " +
                              std::to_string(grid.steps + 1) + " trajectory, got " + std::to_string(m.rows()) + " x " +
                              std::to_string(m.cols()));
}

Matrix run_state(const CrankNicolson& cn, const SparseMatrix& B, const Vector& f, const TimeGrid& grid, const Matrix& u) {
    Matrix q = Matrix::Zero(f.size(), grid.steps + 1);
    for (int k = 0; k < grid.steps; ++k)
        q.col(k + 1) = cn.solve(cn.explicit_part(q.col(k)) + f + 0.5 * (B * (u.col(k) + u.col(k + 1))));
    return q;
}

Matrix run_adjoint(const CrankNicolson& cn, const SparseMatrix& M_obs, const Matrix& e, const TimeGrid& grid,
                   const std::optional<Vector>& p_terminal) {
    const int N = grid.steps;
    Matrix pi(e.rows(), N + 1);  // pi_k for k = 1..N, column 0 unused
    pi.col(N) = p_terminal ? *p_terminal : cn.solve(0.5 * (M_obs * e.col(N)));
    for (int k = N - 1; k >= 1; --k) pi.col(k) = cn.solve(cn.explicit_part(pi.col(k + 1)) + M_obs * e.col(k));
    Matrix p(e.rows(), N + 1);
    p.col(0) = pi.col(1);
    for (int k = 1; k < N; ++k) p.col(k) = 0.5 * (pi.col(k) + pi.col(k + 1));
    p.col(N) = pi.col(N);
    return p;
}

Matrix tracking_error(const FemOperators& ops, const Matrix& q, const Matrix& z) {
    return q - ops.E * z;
}

/// The full-order model consumed by modified_newton.
class FomModel {
public:
    FomModel(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w, const TimeGrid& grid,
             Matrix z, std::optional<Vector> p_terminal)
        : ops_(ops),
          w_(w),
          grid_(grid),
          cn_(ops.M_tilde, ops.state_matrix(params.diffusivity), grid.dt()),
          pre_(ops.M_u, ops.A_u, w),
          f_(ops.state_load(params)),
          Ez_(ops.E * z),
          p_terminal_(std::move(p_terminal)) {
        if (p_terminal_) {
            const SparseMatrix plus = SparseMatrix(ops.M_tilde / grid.dt()) + 0.5 * ops.state_matrix(params.diffusivity);
            coupling_ = plus * *p_terminal_;
        }
    }

    Matrix state(const Matrix& u) const { return run_state(cn_, ops_.B, f_, grid_, u); }
    Matrix response(const Matrix& d) const { return run_state(cn_, ops_.B, Vector::Zero(f_.size()), grid_, d); }
    Matrix adjoint(const Matrix& q) const { return run_adjoint(cn_, ops_.M_obs, q - Ez_, grid_, p_terminal_); }

    double cost(const Matrix& q, const Matrix& u) const {
        double J = 0.0;
        const SparseMatrix& P = pre_.matrix();
        for (int k = 0; k <= grid_.steps; ++k) {
            const Vector e = q.col(k) - Ez_.col(k);
            J += grid_.weight(k) * 0.5 * (e.dot(ops_.M_obs * e) + u.col(k).dot(P * u.col(k)));
        }
        return J;
    }

    double merit(const Matrix& q, const Matrix& u) const {
        const double J = cost(q, u);
        if (!p_terminal_) return J;
        const int N = grid_.steps;
        const Vector e = q.col(N) - Ez_.col(N);
        return terminal_merit(J, grid_, e, ops_.M_obs * e, q.col(N), coupling_);
    }

    Matrix gradient(const Matrix& u, const Matrix& p) const {
        return quasi_newton_step(pre_, ops_.B, u, p).gradient;
    }
    Matrix precondition(const Matrix& g) const { return pre_.apply(g); }

private:
    const FemOperators& ops_;
    ControlWeights w_;
    TimeGrid grid_;
    CrankNicolson cn_;
    ControlPreconditioner pre_;
    Vector f_;
    Matrix Ez_;
    std::optional<Vector> p_terminal_;
    Vector coupling_;
};

}  // namespace

double weighted_dot(const TimeGrid& grid, const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (int k = 0; k <= grid.steps; ++k) s += grid.weight(k) * a.col(k).dot(b.col(k));
    return s;
}

CrankNicolson::CrankNicolson(const SparseMatrix& mass, const SparseMatrix& stiffness, double dt) {
    const SparseMatrix scaled = mass / dt;
    minus_ = scaled - 0.5 * stiffness;
    plus_.compute(SparseMatrix(scaled + 0.5 * stiffness));
    if (plus_.info() != Eigen::Success) throw SolverError("Crank-Nicolson: factorization of M/dt + A/2 failed");
}

Vector CrankNicolson::solve(const Vector& rhs) const { return plus_.solve(rhs); }

Matrix solve_reference(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid) {
    grid.validate();
    const CrankNicolson cn(ops.M, ops.reference_matrix(params.diffusivity), grid.dt());
    const Vector F = ops.reference_load(params);
    Matrix z = Matrix::Zero(F.size(), grid.steps + 1);
    for (int k = 0; k < grid.steps; ++k) z.col(k + 1) = cn.solve(cn.explicit_part(z.col(k)) + F);
    return z;
}

Matrix solve_state(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid, const Matrix& u) {
    grid.validate();
    check_columns(u, ops.control_size(), grid, "state: control");
    const CrankNicolson cn(ops.M_tilde, ops.state_matrix(params.diffusivity), grid.dt());
    return run_state(cn, ops.B, ops.state_load(params), grid, u);
}

Matrix solve_adjoint(const FemOperators& ops, const ScenarioParams& params, const TimeGrid& grid, const Matrix& q,
                     const Matrix& z, const std::optional<Vector>& p_terminal) {
    grid.validate();
    check_columns(q, ops.state_size(), grid, "adjoint: state");
    check_columns(z, ops.reference_size(), grid, "adjoint: reference");
    if (p_terminal && p_terminal->size() != ops.state_size())
        throw ValidationError("adjoint: terminal value has the wrong length");
    const CrankNicolson cn(ops.M_tilde, ops.state_matrix(params.diffusivity), grid.dt());
    return run_adjoint(cn, ops.M_obs, tracking_error(ops, q, z), grid, p_terminal);
}

double evaluate_cost(const FemOperators& ops, const TimeGrid& grid, const Matrix& q, const Matrix& z, const Matrix& u,
                     const ControlWeights& w) {
    check_columns(q, ops.state_size(), grid, "cost: state");
    check_columns(z, ops.reference_size(), grid, "cost: reference");
    check_columns(u, ops.control_size(), grid, "cost: control");
    const SparseMatrix P = ops.control_matrix(w);
    double J = 0.0;
    for (int k = 0; k <= grid.steps; ++k) {
        const Vector e = q.col(k) - ops.E * z.col(k);
        J += grid.weight(k) * 0.5 * (e.dot(ops.M_obs * e) + u.col(k).dot(P * u.col(k)));
    }
    return J;
}

double terminal_merit(double cost, const TimeGrid& grid, const Vector& e_N, const Vector& Mobs_e_N, const Vector& q_N,
                      const Vector& terminal_coupling) {
    return cost - 0.25 * grid.dt() * e_N.dot(Mobs_e_N) + grid.dt() * q_N.dot(terminal_coupling);
}

ControlPreconditioner::ControlPreconditioner(const SparseMatrix& M_u, const SparseMatrix& A_u, const ControlWeights& w) {
    if (w.beta == 0.0 && w.beta_g == 0.0)
        throw SolverError("control block beta*M_u + beta_g*A_u is singular (beta = beta_g = 0)");
    w.validate();
    P_ = w.beta * M_u + w.beta_g * A_u;
    ldlt_.compute(P_);
    if (ldlt_.info() != Eigen::Success) throw SolverError("control block factorization failed");
}

Matrix ControlPreconditioner::apply(const Matrix& g) const {
    Matrix out(g.rows(), g.cols());
    for (int k = 0; k < g.cols(); ++k) out.col(k) = ldlt_.solve(Vector(g.col(k)));
    return out;
}

NewtonStep quasi_newton_step(const ControlPreconditioner& P, const SparseMatrix& B, const Matrix& u, const Matrix& p) {
    if (u.cols() != p.cols() || u.rows() != B.cols() || p.rows() != B.rows())
        throw ValidationError("quasi-Newton step: control and adjoint trajectories do not match");
    NewtonStep s;
    s.gradient = P.matrix() * u + B.transpose() * p;
    s.direction = -P.apply(s.gradient);
    return s;
}

ArmijoResult armijo_backtracking(const std::function<double(double)>& merit_at, double slope, double merit0,
                                 const ArmijoOptions& opt) {
    if (!(slope < 0.0)) throw LineSearchError("direction is not a descent direction", 0.0, merit0, merit0);
    double tau = opt.initial;
    double value = merit0;
    for (int m = 0; m <= opt.max_backtracks; ++m) {
        value = merit_at(tau);
        if (value <= merit0 + opt.c1 * tau * slope) return {tau, value, m};
        if (m < opt.max_backtracks) tau *= opt.contraction;
    }
    throw LineSearchError("no sufficient decrease after " + std::to_string(opt.max_backtracks) + " backtracks", tau,
                          value, merit0);
}

ArmijoResult armijo_backtracking(const std::function<double(const Matrix&)>& merit, const Matrix& u, const Matrix& d,
                                 const Matrix& g, const TimeGrid& grid, double merit0, const ArmijoOptions& opt) {
    return armijo_backtracking([&](double tau) { return merit(u + tau * d); }, weighted_dot(grid, g, d), merit0, opt);
}

TransientResult solve_transient_ocp(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                                    const TimeGrid& grid, const OptimizerOptions& opt, TerminalCondition terminal) {
    grid.validate();
    TransientResult res;
    res.steady = solve_steady(ops, params, w);
    Matrix z = solve_reference(ops, params, grid);
    std::optional<Vector> p_terminal;
    if (terminal == TerminalCondition::Steady) p_terminal = res.steady.p;
    FomModel model(ops, params, w, grid, z, p_terminal);
    Matrix u0 = res.steady.u.replicate(1, grid.steps + 1);

    NewtonOutcome out = modified_newton(model, grid, std::move(u0), opt);
    res.trajectory = {grid, std::move(z), std::move(out.q), std::move(out.p), std::move(out.u)};
    res.log = std::move(out.log);
    res.converged = out.converged;
    res.iterations = out.iterations;
    res.warning = std::move(out.warning);
    res.cost = res.log.back().cost;
    return res;
}

}  // namespace cloak
