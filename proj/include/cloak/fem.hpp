#pragma once

#include "cloak/geometry.hpp"
#include "cloak/mesh.hpp"
#include "cloak/types.hpp"

#include <array>
#include <functional>
#include <vector>

namespace cloak {

using TriangleCoords = std::array<Point, 3>;

/// P1 mass matrix (Area/12)*[[2,1,1],[1,2,1],[1,1,2]]. Throws on degenerate input.
Eigen::Matrix3d element_mass(const TriangleCoords& tri);
/// P1 stiffness Area*(grad phi_i . grad phi_j) for unit diffusivity.
Eigen::Matrix3d element_stiffness(const TriangleCoords& tri);

using ElementFilter = std::function<bool(int element)>;

SparseMatrix assemble_mass_matrix(const Mesh& mesh, const ElementFilter& filter = {});
SparseMatrix assemble_stiffness_matrix(const Mesh& mesh, const ElementFilter& filter = {});
/// Boundary mass on edges with the given tag (coefficient 1).
SparseMatrix assemble_boundary_mass(const Mesh& mesh, BoundaryTag tag);

/// Parameter-independent FEM operators of the cloaking problem.
///
/// Reference operators live on the unperturbed mesh (N_z nodes). State and
/// adjoint operators live on the free OCP dofs (N_q), the control on the nodes
/// of control elements (N_u). With T_o the obstacle temperature and mu the
/// diffusivity, the Dirichlet lift is T_o*(mu*lift_diffusion + lift_robin).
struct FemOperators {
    RestrictionOperator restriction;
    SparseMatrix E;  // N_q x N_z

    SparseMatrix M;          // mass on the unperturbed mesh
    SparseMatrix A_diff;     // unit-diffusivity stiffness
    SparseMatrix A_robin;    // outer-boundary mass, alpha = 1
    Vector F_shape;          // unit-intensity source load

    SparseMatrix M_tilde;        // E M E^T
    SparseMatrix A_diff_tilde;   // E A_diff E^T
    SparseMatrix A_robin_tilde;  // E A_robin E^T

    SparseMatrix B;      // N_q x N_u
    SparseMatrix M_obs;  // N_q x N_q
    SparseMatrix M_u;    // N_u x N_u
    SparseMatrix A_u;    // N_u x N_u

    Vector lift_diffusion;  // -A_diff[free, dirichlet] * 1
    Vector lift_robin;      // -A_robin[free, dirichlet] * 1

    std::vector<int> control_nodes;  // OCP-mesh node of each control dof

    int reference_size() const { return static_cast<int>(M.rows()); }
    int state_size() const { return static_cast<int>(M_tilde.rows()); }
    int control_size() const { return static_cast<int>(M_u.rows()); }

    /// mu*A_diff + A_robin on the unperturbed mesh.
    SparseMatrix reference_matrix(double diffusivity) const;
    /// mu*E A_diff E^T + E A_robin E^T.
    SparseMatrix state_matrix(double diffusivity) const;
    /// I * F_shape.
    Vector reference_load(const ScenarioParams& params) const;
    /// Dirichlet lift F_o(mu, T_o).
    Vector dirichlet_lift(const ScenarioParams& params) const;
    /// F_o + E F.
    Vector state_load(const ScenarioParams& params) const;
    /// beta*M_u + beta_g*A_u.
    SparseMatrix control_matrix(const ControlWeights& w) const;
};

/// Assembles every operator. Throws ValidationError when the control or the
/// source region has no elements. An empty observation region is allowed and
/// yields M_obs = 0.
FemOperators assemble_operators(const Mesh& unperturbed, const Mesh& ocp, const RestrictionOperator& restriction,
                                const LayoutSpec& spec);

/// mu*A_diff + A_robin without re-assembly. diffusivity = 0 returns A_robin.
SparseMatrix affine_state_matrix(const FemOperators& ops, double diffusivity);

/// Meshes, restriction and operators of one layout.
struct Discretization {
    LayoutSpec spec;
    LayoutMeshes meshes;
    RestrictionOperator restriction;
    FemOperators ops;
};

Discretization discretize(const LayoutSpec& spec);
Discretization discretize(const LayoutSpec& spec, LayoutMeshes meshes);

}  // namespace cloak
