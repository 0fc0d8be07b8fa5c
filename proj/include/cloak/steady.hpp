#pragma once

#include "cloak/fem.hpp"
#include "cloak/types.hpp"

namespace cloak {

/// One-shot KKT system in the unknown ordering y = [z; q; p; u].
struct KktSystem {
    SparseMatrix K;
    Vector rhs;
    int nz = 0;
    int nq = 0;
    int nu = 0;

    int size() const { return nz + 2 * nq + nu; }
};

/// Block rows:
///   [ A            0           0     0 ] z   [ F        ]
///   [ 0            EAE^T       0    -B ] q = [ F_o + EF ]
///   [ M_obs E     -M_obs       EAE^T 0 ] p   [ 0        ]
///   [ 0            0           B^T   P ] u   [ 0        ]
/// with P = beta*M_u + beta_g*A_u.
KktSystem assemble_kkt(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w);

struct SteadySolution {
    Vector z;
    Vector q;
    Vector p;
    Vector u;
    double cost = 0.0;
    double tracking = 0.0;
    double control = 0.0;
};

/// Solves the steady optimality system with a sparse LU factorization.
/// Throws SolverError when beta = beta_g = 0 or the factorization fails.
SteadySolution solve_steady(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w);

/// Splits y = [z; q; p; u] and evaluates the cost terms.
SteadySolution unpack_steady(const FemOperators& ops, const ControlWeights& w, const Vector& y);

/// 0.5 (q - Ez)^T M_obs (q - Ez)
double steady_tracking(const FemOperators& ops, const Vector& z, const Vector& q);
/// 0.5 u^T (beta M_u + beta_g A_u) u
double steady_control(const FemOperators& ops, const ControlWeights& w, const Vector& u);

/// Uncontrolled state: solves (mu EA_diffE^T + EA_robinE^T) q = F_o + EF.
Vector solve_uncontrolled_steady(const FemOperators& ops, const ScenarioParams& params);
/// Reference state: solves (mu A_diff + A_robin) z = I F_shape.
Vector solve_reference_steady(const FemOperators& ops, const ScenarioParams& params);

/// ||P u + B^T p||
double optimality_residual(const FemOperators& ops, const ControlWeights& w, const SteadySolution& s);
/// ||EAE^T q - F_o - EF - B u||
double state_residual(const FemOperators& ops, const ScenarioParams& params, const SteadySolution& s);

}  // namespace cloak
