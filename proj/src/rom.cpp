#include "cloak/rom.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

namespace cloak {

namespace {

constexpr const char* kArchiveFormat = "cloak-rom 1";

Matrix project(const Matrix& V, const SparseMatrix& A, const Matrix& W) { return V.transpose() * (A * W); }

Matrix hcat(std::initializer_list<const Matrix*> blocks) {
    Eigen::Index rows = -1, cols = 0;
    for (const Matrix* b : blocks) {
        if (b->cols() == 0) continue;
        if (rows >= 0 && b->rows() != rows) throw ValidationError("snapshot blocks have different row counts");
        rows = b->rows();
        cols += b->cols();
    }
    Matrix out(rows < 0 ? 0 : rows, cols);
    Eigen::Index c = 0;
    for (const Matrix* b : blocks) {
        if (b->cols() == 0) continue;
        out.middleCols(c, b->cols()) = *b;
        c += b->cols();
    }
    return out;
}

void place(Matrix& K, const Matrix& block, int r, int c, double scale = 1.0) {
    if (block.size()) K.block(r, c, block.rows(), block.cols()) += scale * block;
}

/// Reduced Crank-Nicolson pair with a dense Cholesky of the implicit side.
class DenseCrankNicolson {
public:
    DenseCrankNicolson(const Matrix& mass, const Matrix& stiffness, double dt)
        : minus_(mass / dt - 0.5 * stiffness), plus_(mass / dt + 0.5 * stiffness), llt_(plus_) {
        if (llt_.info() != Eigen::Success) throw SolverError("reduced Crank-Nicolson: step matrix is not positive definite");
    }
    Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
    Vector explicit_part(const Vector& x) const { return minus_ * x; }
    const Matrix& plus() const { return plus_; }

private:
    Matrix minus_;
    Matrix plus_;
    Eigen::LLT<Matrix> llt_;
};

/// Reduced counterpart of the full-order model driven by modified_newton.
class RomModel {
public:
    RomModel(const RomOperators& rom, const ScenarioParams& params, const TimeGrid& grid, Matrix z,
             std::optional<Vector> p_terminal)
        : rom_(rom),
          grid_(grid),
          cn_(rom.Mq, rom.state_matrix(params.diffusivity), grid.dt()),
          P_(rom.control_matrix()),
          P_ldlt_(P_),
          f_(rom.state_load(params)),
          z_(std::move(z)),
          Ez_obs_(rom.Mobs_qz * z_),
          p_terminal_(std::move(p_terminal)) {
        if (P_ldlt_.info() != Eigen::Success || (P_.size() && P_ldlt_.vectorD().minCoeff() <= 0.0))
            throw SolverError("reduced control block is singular");
        if (p_terminal_) coupling_ = cn_.plus() * *p_terminal_;
    }

    Matrix state(const Matrix& u) const { return march(f_, u); }
    Matrix response(const Matrix& d) const { return march(Vector::Zero(f_.size()), d); }

    Matrix adjoint(const Matrix& q) const {
        const int N = grid_.steps;
        const Matrix e = rom_.Mobs_qq * q - Ez_obs_;  // reduced M_obs (q - Ez)
        Matrix pi(q.rows(), N + 1);
        pi.col(N) = p_terminal_ ? *p_terminal_ : cn_.solve(0.5 * e.col(N));
        for (int k = N - 1; k >= 1; --k) pi.col(k) = cn_.solve(cn_.explicit_part(pi.col(k + 1)) + e.col(k));
        Matrix p(q.rows(), N + 1);
        p.col(0) = N >= 1 ? pi.col(1) : pi.col(N);
        for (int k = 1; k < N; ++k) p.col(k) = 0.5 * (pi.col(k) + pi.col(k + 1));
        p.col(N) = pi.col(N);
        return p;
    }

    double tracking(const Matrix& q, int k) const { return rom_.tracking_energy(q.col(k), z_.col(k)); }

    double cost(const Matrix& q, const Matrix& u) const {
        double J = 0.0;
        for (int k = 0; k <= grid_.steps; ++k)
            J += grid_.weight(k) * 0.5 * (tracking(q, k) + u.col(k).dot(P_ * u.col(k)));
        return J;
    }

    double merit(const Matrix& q, const Matrix& u) const {
        const double J = cost(q, u);
        if (!p_terminal_) return J;
        const int N = grid_.steps;
        return J - 0.25 * grid_.dt() * tracking(q, N) + grid_.dt() * q.col(N).dot(coupling_);
    }

    Matrix gradient(const Matrix& u, const Matrix& p) const { return P_ * u + rom_.Bq.transpose() * p; }
    Matrix precondition(const Matrix& g) const { return P_ldlt_.solve(g); }

    const Matrix& z() const { return z_; }

private:
    Matrix march(const Vector& f, const Matrix& u) const {
        Matrix q = Matrix::Zero(f.size(), grid_.steps + 1);
        for (int k = 0; k < grid_.steps; ++k)
            q.col(k + 1) = cn_.solve(cn_.explicit_part(q.col(k)) + f + 0.5 * (rom_.Bq * (u.col(k) + u.col(k + 1))));
        return q;
    }

    const RomOperators& rom_;
    TimeGrid grid_;
    DenseCrankNicolson cn_;
    Matrix P_;
    Eigen::LDLT<Matrix> P_ldlt_;
    Vector f_;
    Matrix z_;
    Matrix Ez_obs_;
    std::optional<Vector> p_terminal_;
    Vector coupling_;
};

std::string checksum(const std::string& name, const Matrix& m) {
    std::ostringstream s;
    write_matrix(s, name, m);
    return hex_digest(fnv1a(s.str()));
}

struct NamedArray {
    const char* name;
    Matrix RomOperators::*matrix;
};

const NamedArray kMatrices[] = {
    {"Mz", &RomOperators::Mz},           {"Az_diff", &RomOperators::Az_diff}, {"Az_robin", &RomOperators::Az_robin},
    {"Mq", &RomOperators::Mq},           {"Aq_diff", &RomOperators::Aq_diff}, {"Aq_robin", &RomOperators::Aq_robin},
    {"Bq", &RomOperators::Bq},           {"Mobs_qq", &RomOperators::Mobs_qq}, {"Mobs_qz", &RomOperators::Mobs_qz},
    {"Mobs_zz", &RomOperators::Mobs_zz}, {"Mu", &RomOperators::Mu},           {"Au", &RomOperators::Au},
    {"K_const", &RomOperators::K_const}, {"K_diff", &RomOperators::K_diff},
};

struct NamedVector {
    const char* name;
    Vector RomOperators::*vector;
};

const NamedVector kVectors[] = {
    {"Fz", &RomOperators::Fz},
    {"Fq_source", &RomOperators::Fq_source},
    {"Fq_lift_diff", &RomOperators::Fq_lift_diff},
    {"Fq_lift_robin", &RomOperators::Fq_lift_robin},
};

}  // namespace

PodResult pod_truncate(const Matrix& snapshots, double tolerance) {
    if (snapshots.size() == 0) throw ValidationError("pod: empty snapshot matrix");
    if (!(tolerance >= 0.0)) throw ValidationError("pod: tolerance must be >= 0");
    PodResult out;
    if (snapshots.cwiseAbs().maxCoeff() == 0.0) {
        out.basis = Matrix(snapshots.rows(), 0);
        out.warning = "pod: all snapshots are zero, basis is empty";
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    const double rank_floor =
        s[0] * static_cast<double>(std::max(snapshots.rows(), snapshots.cols())) * std::numeric_limits<double>::epsilon();
    int rank = 0;
    while (rank < s.size() && s[rank] > rank_floor) ++rank;

    // tail[i] = sum of s_j^2 for j >= i, accumulated from the small end
    std::vector<double> tail(rank + 1, 0.0);
    for (int i = rank - 1; i >= 0; --i) tail[i] = tail[i + 1] + s[i] * s[i];
    const double total = tail[0];
    int n = 0;
    while (n < rank && tail[n] > tolerance * tolerance * total) ++n;
    out.basis = svd.matrixU().leftCols(n);
    out.singular_values = s.head(n);
    out.discarded_energy = tail[n] / total;
    return out;
}

PodResult pod_enrich(const Matrix& basis, const Vector& sigma, const Matrix& snapshots, double tolerance) {
    if (basis.cols() != sigma.size()) throw ValidationError("pod: basis and singular values disagree");
    if (basis.cols() == 0) return pod_truncate(snapshots, tolerance);
    if (basis.rows() != snapshots.rows()) throw ValidationError("pod: snapshot length does not match the basis");
    const Matrix weighted = basis * sigma.asDiagonal();
    return pod_truncate(hcat({&weighted, &snapshots}), tolerance);
}

BasisBuilder::BasisBuilder(double tolerance, std::string mesh_hash, bool balance) : balance_(balance) {
    if (!(tolerance >= 0.0)) throw ValidationError("pod.tolerance must be >= 0");
    basis_.tolerance = tolerance;
    basis_.mesh_hash = std::move(mesh_hash);
}

void BasisBuilder::add(const SnapshotRecord& rec) {
    if (!rec.ok) {
        warnings_.push_back("sample " + std::to_string(rec.index) + " skipped: " + rec.error);
        return;
    }
    const Matrix zs = rec.steady.z;
    Matrix Q = rec.steady.q, P = rec.steady.p, Z = zs, U = rec.steady.u;
    if (rec.transient) {
        const Trajectory& t = rec.transient->trajectory;
        const Matrix qs = rec.steady.q, ps = rec.steady.p;
        Z = hcat({&t.z, &zs});
        Q = hcat({&t.q, &qs});
        P = hcat({&t.p, &ps});
        U = t.u;
    }
    if (balance_ && P.norm() > 0.0 && Q.norm() > 0.0) P *= Q.norm() / P.norm();
    const Matrix QP = hcat({&Q, &P});
    auto enrich = [&](Matrix& V, Vector& sigma, const Matrix& S, const char* field) {
        PodResult r = pod_enrich(V, sigma, S, basis_.tolerance);
        if (!r.warning.empty()) warnings_.push_back(std::string(field) + ": " + r.warning);
        V = std::move(r.basis);
        sigma = std::move(r.singular_values);
    };
    enrich(basis_.Vz, basis_.sigma_z, Z, "z");
    enrich(basis_.Vqp, basis_.sigma_qp, QP, "qp");
    enrich(basis_.Vu, basis_.sigma_u, U, "u");
    ++basis_.samples;
}

void BasisBuilder::add(const SnapshotSet& set) {
    if (set.provenance.mesh_hash != basis_.mesh_hash)
        throw ValidationError("snapshot mesh hash " + set.provenance.mesh_hash + " differs from " + basis_.mesh_hash);
    for (const auto& r : set.records) add(r);
}

PodBasis build_bases(const SnapshotSet& set, double tolerance, bool balance) {
    if (set.records.empty()) throw ValidationError("build_bases: empty snapshot set");
    BasisBuilder b(tolerance, set.provenance.mesh_hash, balance);
    b.add(set);
    if (b.basis().samples == 0) throw ValidationError("build_bases: no successful snapshots");
    return b.basis();
}

PodBasis identity_basis(const FemOperators& ops) {
    PodBasis b;
    b.Vz = Matrix::Identity(ops.reference_size(), ops.reference_size());
    b.Vqp = Matrix::Identity(ops.state_size(), ops.state_size());
    b.Vu = Matrix::Identity(ops.control_size(), ops.control_size());
    b.sigma_z = Vector::Ones(b.nz());
    b.sigma_qp = Vector::Ones(b.nqp());
    b.sigma_u = Vector::Ones(b.nu());
    return b;
}

Vector RomOperators::state_load(const ScenarioParams& p) const {
    return p.intensity * Fq_source + p.obstacle_temperature * (p.diffusivity * Fq_lift_diff + Fq_lift_robin);
}

Vector RomOperators::steady_rhs(const ScenarioParams& p) const {
    Vector rhs = Vector::Zero(size());
    rhs.head(basis.nz()) = reference_load(p);
    rhs.segment(basis.nz(), basis.nqp()) = state_load(p);
    return rhs;
}

double RomOperators::tracking_energy(const Vector& q, const Vector& z) const {
    return q.dot(Mobs_qq * q) - 2.0 * q.dot(Mobs_qz * z) + z.dot(Mobs_zz * z);
}

RomOperators project_steady(const FemOperators& ops, const PodBasis& basis, const ControlWeights& w) {
    if (basis.Vz.rows() != ops.reference_size() || basis.Vqp.rows() != ops.state_size() ||
        basis.Vu.rows() != ops.control_size())
        throw ValidationError("projection: basis dimensions do not match the operators");
    if (basis.nz() == 0 || basis.nqp() == 0 || basis.nu() == 0) throw ValidationError("projection: a basis is empty");
    w.validate();
    RomOperators r;
    r.basis = basis;
    r.weights = w;
    const Matrix& Vz = basis.Vz;
    const Matrix& Vq = basis.Vqp;
    const Matrix& Vu = basis.Vu;

    r.Az_diff = project(Vz, ops.A_diff, Vz);
    r.Az_robin = project(Vz, ops.A_robin, Vz);
    r.Fz = Vz.transpose() * ops.F_shape;
    r.Aq_diff = project(Vq, ops.A_diff_tilde, Vq);
    r.Aq_robin = project(Vq, ops.A_robin_tilde, Vq);
    r.Bq = project(Vq, ops.B, Vu);
    r.Mobs_qq = project(Vq, ops.M_obs, Vq);
    const Matrix EVz = ops.E * Vz;
    r.Mobs_qz = Vq.transpose() * (ops.M_obs * EVz);
    r.Mobs_zz = EVz.transpose() * (ops.M_obs * EVz);
    r.Fq_source = Vq.transpose() * ops.restriction.restrict(ops.F_shape);
    r.Fq_lift_diff = Vq.transpose() * ops.lift_diffusion;
    r.Fq_lift_robin = Vq.transpose() * ops.lift_robin;
    r.Mu = project(Vu, ops.M_u, Vu);
    r.Au = project(Vu, ops.A_u, Vu);

    const int nz = basis.nz(), nq = basis.nqp(), nu = basis.nu();
    const int oz = 0, oq = nz, op = nz + nq, ou = nz + 2 * nq;
    r.K_const = Matrix::Zero(r.size(), r.size());
    r.K_diff = Matrix::Zero(r.size(), r.size());
    place(r.K_const, r.Az_robin, oz, oz);
    place(r.K_diff, r.Az_diff, oz, oz);
    place(r.K_const, r.Aq_robin, oq, oq);
    place(r.K_diff, r.Aq_diff, oq, oq);
    place(r.K_const, r.Bq, oq, ou, -1.0);
    place(r.K_const, r.Mobs_qz, op, oz);
    place(r.K_const, r.Mobs_qq, op, oq, -1.0);
    place(r.K_const, r.Aq_robin, op, op);
    place(r.K_diff, r.Aq_diff, op, op);
    place(r.K_const, Matrix(r.Bq.transpose()), ou, op);
    place(r.K_const, r.control_matrix(), ou, ou);
    (void)nu;
    return r;
}

RomOperators project_transient(const FemOperators& ops, const PodBasis& basis, const ControlWeights& w) {
    RomOperators r = project_steady(ops, basis, w);
    r.Mz = project(basis.Vz, ops.M, basis.Vz);
    r.Mq = project(basis.Vqp, ops.M_tilde, basis.Vqp);
    return r;
}

RomSteadySolution solve_rom_steady(const RomOperators& rom, const ScenarioParams& params) {
    if (params.diffusivity < 0.0) throw ValidationError("diffusivity must be >= 0");
    const Matrix K = rom.steady_matrix(params.diffusivity);
    const Vector F = rom.steady_rhs(params);
    Eigen::PartialPivLU<Matrix> lu(K);
    Vector y = lu.solve(F);
    const double scale = std::max(F.norm(), std::numeric_limits<double>::min());
    if (!y.allFinite() || (K * y - F).norm() > 1e-6 * scale)
        throw SolverError("reduced KKT system is singular (basis deficient?)");
    y += lu.solve(Vector(F - K * y));

    const int nz = rom.basis.nz(), nq = rom.basis.nqp(), nu = rom.basis.nu();
    RomSteadySolution s;
    s.z = y.head(nz);
    s.q = y.segment(nz, nq);
    s.p = y.segment(nz + nq, nq);
    s.u = y.segment(nz + 2 * nq, nu);
    s.tracking = 0.5 * rom.tracking_energy(s.q, s.z);
    s.control = 0.5 * s.u.dot(rom.control_matrix() * s.u);
    s.cost = s.tracking + s.control;
    return s;
}

SteadySolution lift(const RomOperators& rom, const RomSteadySolution& s) {
    SteadySolution out;
    out.z = rom.basis.Vz * s.z;
    out.q = rom.basis.Vqp * s.q;
    out.p = rom.basis.Vqp * s.p;
    out.u = rom.basis.Vu * s.u;
    out.cost = s.cost;
    out.tracking = s.tracking;
    out.control = s.control;
    return out;
}

RomTransientResult solve_rom_transient(const RomOperators& rom, const ScenarioParams& params, const TimeGrid& grid,
                                       const OptimizerOptions& opt, TerminalCondition terminal) {
    grid.validate();
    if (rom.Mq.rows() != rom.basis.nqp() || rom.Mz.rows() != rom.basis.nz())
        throw ValidationError("reduced operators lack the mass matrices (use project_transient)");
    RomTransientResult res;
    res.grid = grid;
    res.steady = solve_rom_steady(rom, params);

    const DenseCrankNicolson ref(rom.Mz, rom.reference_matrix(params.diffusivity), grid.dt());
    const Vector F = rom.reference_load(params);
    Matrix z = Matrix::Zero(F.size(), grid.steps + 1);
    for (int k = 0; k < grid.steps; ++k) z.col(k + 1) = ref.solve(ref.explicit_part(z.col(k)) + F);

    std::optional<Vector> p_terminal;
    if (terminal == TerminalCondition::Steady) p_terminal = res.steady.p;
    RomModel model(rom, params, grid, std::move(z), p_terminal);
    NewtonOutcome out = modified_newton(model, grid, res.steady.u.replicate(1, grid.steps + 1), opt);
    res.z = model.z();
    res.q = std::move(out.q);
    res.p = std::move(out.p);
    res.u = std::move(out.u);
    res.log = std::move(out.log);
    res.converged = out.converged;
    res.iterations = out.iterations;
    res.warning = std::move(out.warning);
    res.cost = res.log.back().cost;
    return res;
}

Trajectory lift(const RomOperators& rom, const RomTransientResult& r) {
    return {r.grid, rom.basis.Vz * r.z, rom.basis.Vqp * r.q, rom.basis.Vqp * r.p, rom.basis.Vu * r.u};
}

void save_rom(const RomOperators& rom, const std::string& dir, const Manifest& extra) {
    ensure_directory(dir);
    Manifest m = extra;
    m.set("format", kArchiveFormat);
    m.set("pod.tolerance", rom.basis.tolerance);
    m.set("mesh_hash", rom.basis.mesh_hash);
    m.set("samples", static_cast<std::int64_t>(rom.basis.samples));
    m.set("n_z", static_cast<std::int64_t>(rom.basis.nz()));
    m.set("n_qp", static_cast<std::int64_t>(rom.basis.nqp()));
    m.set("n_u", static_cast<std::int64_t>(rom.basis.nu()));
    m.set("N_z", static_cast<std::int64_t>(rom.basis.Vz.rows()));
    m.set("N_q", static_cast<std::int64_t>(rom.basis.Vqp.rows()));
    m.set("N_u", static_cast<std::int64_t>(rom.basis.Vu.rows()));
    m.set("weights.beta", rom.weights.beta);
    m.set("weights.beta_g", rom.weights.beta_g);

    std::ofstream ops(dir + "/operators.txt");
    if (!ops) throw std::runtime_error("cannot write " + dir + "/operators.txt");
    ops << kArchiveFormat << '\n';
    for (const auto& a : kMatrices) {
        write_matrix(ops, a.name, rom.*a.matrix);
        m.set(std::string("checksum.") + a.name, checksum(a.name, rom.*a.matrix));
    }
    for (const auto& v : kVectors) {
        write_matrix(ops, v.name, rom.*v.vector);
        m.set(std::string("checksum.") + v.name, checksum(v.name, rom.*v.vector));
    }
    if (!ops) throw std::runtime_error("write failed for " + dir + "/operators.txt");

    std::ofstream bas(dir + "/basis.txt");
    if (!bas) throw std::runtime_error("cannot write " + dir + "/basis.txt");
    bas << kArchiveFormat << '\n';
    write_matrix(bas, "Vz", rom.basis.Vz);
    write_matrix(bas, "Vqp", rom.basis.Vqp);
    write_matrix(bas, "Vu", rom.basis.Vu);
    write_matrix(bas, "sigma_z", rom.basis.sigma_z);
    write_matrix(bas, "sigma_qp", rom.basis.sigma_qp);
    write_matrix(bas, "sigma_u", rom.basis.sigma_u);
    if (!bas) throw std::runtime_error("write failed for " + dir + "/basis.txt");
    m.save(dir + "/manifest.txt");
}

RomOperators load_rom(const std::string& dir, Manifest* manifest) {
    std::ifstream probe(dir + "/manifest.txt");
    if (!probe)
        throw std::runtime_error("no reduced-order archive in '" + dir + "' (run the offline command first)");
    const Manifest m = Manifest::read(probe);
    if (m.get("format") != kArchiveFormat) throw std::runtime_error(dir + ": unsupported archive format '" + m.get("format") + "'");

    RomOperators r;
    r.weights = {m.get_double("weights.beta"), m.get_double("weights.beta_g")};
    r.basis.tolerance = m.get_double("pod.tolerance");
    r.basis.mesh_hash = m.get("mesh_hash");
    r.basis.samples = static_cast<int>(m.get_int("samples"));

    auto open = [&](const std::string& name) {
        auto in = std::make_unique<std::ifstream>(dir + "/" + name);
        if (!*in) throw std::runtime_error("cannot open " + dir + "/" + name);
        return in;
    };
    auto verify = [&](const char* name, const Matrix& value) {
        if (checksum(name, value) != m.get(std::string("checksum.") + name))
            throw std::runtime_error(dir + ": checksum mismatch for " + name);
    };
    {
        auto in = open("operators.txt");
        LineReader lr(*in);
        if (lr.expect("header") != kArchiveFormat) lr.fail("unexpected archive header");
        for (const auto& a : kMatrices) {
            r.*a.matrix = read_matrix(lr, a.name);
            verify(a.name, r.*a.matrix);
        }
        for (const auto& v : kVectors) {
            const Matrix col = read_matrix(lr, v.name);
            verify(v.name, col);
            r.*v.vector = col.col(0);
        }
    }
    {
        auto in = open("basis.txt");
        LineReader lr(*in);
        if (lr.expect("header") != kArchiveFormat) lr.fail("unexpected archive header");
        r.basis.Vz = read_matrix(lr, "Vz");
        r.basis.Vqp = read_matrix(lr, "Vqp");
        r.basis.Vu = read_matrix(lr, "Vu");
        r.basis.sigma_z = read_matrix(lr, "sigma_z").col(0);
        r.basis.sigma_qp = read_matrix(lr, "sigma_qp").col(0);
        r.basis.sigma_u = read_matrix(lr, "sigma_u").col(0);
    }
    if (r.basis.nz() != m.get_int("n_z") || r.basis.nqp() != m.get_int("n_qp") || r.basis.nu() != m.get_int("n_u"))
        throw std::runtime_error(dir + ": basis dimensions disagree with the manifest");
    if (manifest) *manifest = m;
    return r;
}

}  // namespace cloak
