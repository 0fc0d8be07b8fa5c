#include "cloak/steady.hpp"

#include <Eigen/SparseLU>

#include <string>

namespace cloak {

namespace {

void append_block(std::vector<Triplet>& trips, const SparseMatrix& A, int row0, int col0, double scale = 1.0) {
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it)
            trips.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

Vector sparse_solve(const SparseMatrix& A, const Vector& b, const char* what, int refinement_steps = 0) {
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw SolverError(std::string(what) + ": factorization failed (" + lu.lastErrorMessage() + ")");
    Vector x = lu.solve(b);
    if (lu.info() != Eigen::Success) throw SolverError(std::string(what) + ": back substitution failed");
    for (int i = 0; i < refinement_steps; ++i) x += lu.solve(Vector(b - A * x));
    return x;
}

}  // namespace

KktSystem assemble_kkt(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w) {
    KktSystem sys;
    sys.nz = ops.reference_size();
    sys.nq = ops.state_size();
    sys.nu = ops.control_size();
    if (ops.E.rows() != sys.nq || ops.E.cols() != sys.nz || ops.B.rows() != sys.nq || ops.B.cols() != sys.nu ||
        ops.M_obs.rows() != sys.nq || ops.A_u.rows() != sys.nu)
        throw ValidationError("kkt: operator block dimensions are inconsistent");

    const SparseMatrix A = ops.reference_matrix(params.diffusivity);
    const SparseMatrix At = ops.state_matrix(params.diffusivity);
    const SparseMatrix MobsE = ops.M_obs * ops.E;
    const SparseMatrix P = ops.control_matrix(w);
    const SparseMatrix Bt = ops.B.transpose();

    const int oz = 0, oq = sys.nz, op = sys.nz + sys.nq, ou = sys.nz + 2 * sys.nq;
    std::vector<Triplet> trips;
    trips.reserve(A.nonZeros() + 2 * At.nonZeros() + MobsE.nonZeros() + ops.M_obs.nonZeros() + 2 * ops.B.nonZeros() +
                  P.nonZeros());
    append_block(trips, A, oz, oz);
    append_block(trips, At, oq, oq);
    append_block(trips, ops.B, oq, ou, -1.0);
    append_block(trips, MobsE, op, oz);
    append_block(trips, ops.M_obs, op, oq, -1.0);
    append_block(trips, At, op, op);
    append_block(trips, Bt, ou, op);
    append_block(trips, P, ou, ou);
    sys.K.resize(sys.size(), sys.size());
    sys.K.setFromTriplets(trips.begin(), trips.end());
    sys.K.makeCompressed();

    sys.rhs = Vector::Zero(sys.size());
    sys.rhs.segment(oz, sys.nz) = ops.reference_load(params);
    sys.rhs.segment(oq, sys.nq) = ops.state_load(params);
    return sys;
}

double steady_tracking(const FemOperators& ops, const Vector& z, const Vector& q) {
    const Vector e = q - ops.restriction.restrict(z);
    return 0.5 * e.dot(ops.M_obs * e);
}

double steady_control(const FemOperators& ops, const ControlWeights& w, const Vector& u) {
    return 0.5 * u.dot(ops.control_matrix(w) * u);
}

SteadySolution unpack_steady(const FemOperators& ops, const ControlWeights& w, const Vector& y) {
    const int nz = ops.reference_size(), nq = ops.state_size(), nu = ops.control_size();
    if (y.size() != nz + 2 * nq + nu) throw ValidationError("steady: solution vector has the wrong length");
    SteadySolution s;
    s.z = y.segment(0, nz);
    s.q = y.segment(nz, nq);
    s.p = y.segment(nz + nq, nq);
    s.u = y.segment(nz + 2 * nq, nu);
    s.tracking = steady_tracking(ops, s.z, s.q);
    s.control = steady_control(ops, w, s.u);
    s.cost = s.tracking + s.control;
    return s;
}

SteadySolution solve_steady(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w) {
    if (w.beta == 0.0 && w.beta_g == 0.0)
        throw SolverError("steady: KKT matrix is singular, control block beta*M_u + beta_g*A_u vanishes (beta = beta_g = 0)");
    w.validate();
    const KktSystem sys = assemble_kkt(ops, params, w);
    return unpack_steady(ops, w, sparse_solve(sys.K, sys.rhs, "steady KKT", 2));
}

Vector solve_uncontrolled_steady(const FemOperators& ops, const ScenarioParams& params) {
    return sparse_solve(ops.state_matrix(params.diffusivity), ops.state_load(params), "uncontrolled state");
}

Vector solve_reference_steady(const FemOperators& ops, const ScenarioParams& params) {
    return sparse_solve(ops.reference_matrix(params.diffusivity), ops.reference_load(params), "reference state");
}

double optimality_residual(const FemOperators& ops, const ControlWeights& w, const SteadySolution& s) {
    return (ops.control_matrix(w) * s.u + ops.B.transpose() * s.p).norm();
}

double state_residual(const FemOperators& ops, const ScenarioParams& params, const SteadySolution& s) {
    return (ops.state_matrix(params.diffusivity) * s.q - ops.state_load(params) - ops.B * s.u).norm();
}

}  // namespace cloak
