#pragma once

#include "cloak/fem.hpp"
#include "cloak/io.hpp"
#include "cloak/scenarios.hpp"
#include "cloak/steady.hpp"
#include "cloak/transient.hpp"

#include <string>
#include <vector>

namespace cloak {

struct PodResult {
    Matrix basis;                 // orthonormal columns
    Vector singular_values;       // retained values, descending
    double discarded_energy = 0;  // sum of squared discarded values relative to the total
    std::string warning;
};

/// Keeps the smallest n with sum_{i>n} s_i^2 <= tol^2 * sum_i s_i^2.
/// Singular values below the numerical-rank threshold are always dropped.
PodResult pod_truncate(const Matrix& snapshots, double tolerance);

/// POD of [V*diag(sigma), S]: the existing basis enters with its energy, so
/// the result approximates the POD of every snapshot seen so far.
PodResult pod_enrich(const Matrix& basis, const Vector& sigma, const Matrix& snapshots, double tolerance);

struct PodBasis {
    Matrix Vz;   // N_z x n_z
    Matrix Vqp;  // N_q x n_qp, shared by state and adjoint
    Matrix Vu;   // N_u x n_u
    Vector sigma_z;
    Vector sigma_qp;
    Vector sigma_u;
    double tolerance = 0.0;
    std::string mesh_hash;
    int samples = 0;

    int nz() const { return static_cast<int>(Vz.cols()); }
    int nqp() const { return static_cast<int>(Vqp.cols()); }
    int nu() const { return static_cast<int>(Vu.cols()); }
};

/// Sequential enrichment over samples: each record's z, (q, p) and u blocks are
/// appended to the current bases and re-truncated.
class BasisBuilder {
public:
    /// With `balance` the adjoint block of each sample is rescaled to the
    /// Frobenius norm of its state block before enrichment, so the shared
    /// basis resolves both fields to the same relative accuracy.
    BasisBuilder(double tolerance, std::string mesh_hash, bool balance = true);

    /// Steady records contribute their single steady column per field;
    /// transient records contribute every time instant plus the steady fields.
    void add(const SnapshotRecord& record);
    void add(const SnapshotSet& set);

    const PodBasis& basis() const { return basis_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    PodBasis basis_;
    bool balance_;
    std::vector<std::string> warnings_;
};

PodBasis build_bases(const SnapshotSet& set, double tolerance, bool balance = true);

/// Identity bases of the full spaces; projection with them reproduces the FOM.
PodBasis identity_basis(const FemOperators& ops);

/// Parameter-independent reduced arrays. Parametric operators are rebuilt
/// online as diffusivity*(diffusion term) + (Robin term); the load is
/// I*(source) + T_o*(diffusivity*lift_diffusion + lift_robin).
struct RomOperators {
    PodBasis basis;
    ControlWeights weights;

    Matrix Mz, Az_diff, Az_robin;  // reference
    Vector Fz;
    Matrix Mq, Aq_diff, Aq_robin;  // state and adjoint
    Matrix Bq;                     // Vqp^T B Vu
    Matrix Mobs_qq;                // Vqp^T M_obs Vqp
    Matrix Mobs_qz;                // Vqp^T M_obs E Vz
    Matrix Mobs_zz;                // Vz^T E^T M_obs E Vz
    Vector Fq_source, Fq_lift_diff, Fq_lift_robin;
    Matrix Mu, Au;  // control block pieces

    // Steady reduced KKT template: K(mu) = K_const + mu*K_diff.
    Matrix K_const, K_diff;

    int size() const { return basis.nz() + 2 * basis.nqp() + basis.nu(); }
    Matrix reference_matrix(double diffusivity) const { return diffusivity * Az_diff + Az_robin; }
    Matrix state_matrix(double diffusivity) const { return diffusivity * Aq_diff + Aq_robin; }
    Vector reference_load(const ScenarioParams& p) const { return p.intensity * Fz; }
    Vector state_load(const ScenarioParams& p) const;
    Matrix control_matrix() const { return weights.beta * Mu + weights.beta_g * Au; }
    Matrix steady_matrix(double diffusivity) const { return K_const + diffusivity * K_diff; }
    Vector steady_rhs(const ScenarioParams& p) const;
    /// (q - Ez)^T M_obs (q - Ez) in reduced coordinates.
    double tracking_energy(const Vector& q, const Vector& z) const;
};

/// Projection of the steady blocks and the load terms.
RomOperators project_steady(const FemOperators& ops, const PodBasis& basis, const ControlWeights& w);
/// Everything project_steady computes plus the reduced mass matrices.
RomOperators project_transient(const FemOperators& ops, const PodBasis& basis, const ControlWeights& w);

struct RomSteadySolution {
    Vector z, q, p, u;  // reduced coordinates
    double cost = 0.0;
    double tracking = 0.0;
    double control = 0.0;
};

/// Dense solve of the reduced KKT system. Throws SolverError when it is singular.
RomSteadySolution solve_rom_steady(const RomOperators& rom, const ScenarioParams& params);
SteadySolution lift(const RomOperators& rom, const RomSteadySolution& s);

struct RomTransientResult {
    TimeGrid grid;
    Matrix z, q, p, u;  // reduced trajectories, one column per instant
    RomSteadySolution steady;
    std::vector<IterationRecord> log;
    bool converged = false;
    int iterations = 0;
    double cost = 0.0;
    std::string warning;
};

/// The modified Newton iteration in reduced coordinates, with p_N from the nested reduced steady solve.
RomTransientResult solve_rom_transient(const RomOperators& rom, const ScenarioParams& params, const TimeGrid& grid,
                                       const OptimizerOptions& opt = {},
                                       TerminalCondition terminal = TerminalCondition::Steady);
Trajectory lift(const RomOperators& rom, const RomTransientResult& r);

/// Archive directory: manifest.txt (tolerance, dimensions, mesh hash,
/// per-array checksums) plus operators.txt and basis.txt.
void save_rom(const RomOperators& rom, const std::string& dir, const Manifest& extra = {});
RomOperators load_rom(const std::string& dir, Manifest* manifest = nullptr);

}  // namespace cloak
