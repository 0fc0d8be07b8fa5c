#include "cloak/fem.hpp"

#include <algorithm>
#include <string>

namespace cloak {

namespace {

double signed_area(const TriangleCoords& t) {
    return 0.5 * ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y));
}

double checked_area(const TriangleCoords& t) {
    const double a = signed_area(t);
    if (!(a > 0.0)) throw ValidationError("element: degenerate or clockwise triangle (signed area " + std::to_string(a) + ")");
    return a;
}

TriangleCoords coords(const Mesh& mesh, int e) {
    const auto& t = mesh.triangles[e];
    return {mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]};
}

template <class ElementMatrix>
SparseMatrix assemble(const Mesh& mesh, const ElementFilter& filter, ElementMatrix&& local) {
    std::vector<Triplet> trips;
    trips.reserve(9 * mesh.triangles.size());
    for (int e = 0; e < mesh.element_count(); ++e) {
        if (filter && !filter(e)) continue;
        const Eigen::Matrix3d K = local(coords(mesh, e));
        const auto& t = mesh.triangles[e];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) trips.emplace_back(t[a], t[b], K(a, b));
    }
    SparseMatrix out(mesh.node_count(), mesh.node_count());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

/// Rows/columns of an OCP-mesh matrix mapped through index maps; entries
/// whose row or column maps to -1 are dropped.
SparseMatrix remap(const SparseMatrix& A, const std::vector<int>& row_map, int rows, const std::vector<int>& col_map,
                   int cols) {
    std::vector<Triplet> trips;
    for (int k = 0; k < A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            const int r = row_map[it.row()], c = col_map[it.col()];
            if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
        }
    }
    SparseMatrix out(rows, cols);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Vector dirichlet_column_sum(const SparseMatrix& A_ocp, const RestrictionOperator& r) {
    Vector ones_dir = Vector::Zero(A_ocp.cols());
    for (int d : r.dirichlet_nodes) ones_dir[d] = 1.0;
    const Vector full = A_ocp * ones_dir;
    Vector out(r.free_count());
    for (int i = 0; i < r.free_count(); ++i) out[i] = -full[r.free_nodes[i]];
    return out;
}

}  // namespace

Eigen::Matrix3d element_mass(const TriangleCoords& tri) {
    const double area = checked_area(tri);
    Eigen::Matrix3d m;
    m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    return (area / 12.0) * m;
}

Eigen::Matrix3d element_stiffness(const TriangleCoords& tri) {
    const double area = checked_area(tri);
    Eigen::Matrix<double, 3, 2> grad;
    for (int i = 0; i < 3; ++i) {
        const Point& pj = tri[(i + 1) % 3];
        const Point& pk = tri[(i + 2) % 3];
        grad(i, 0) = (pj.y - pk.y) / (2.0 * area);
        grad(i, 1) = (pk.x - pj.x) / (2.0 * area);
    }
    Eigen::Matrix3d k;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            k(i, j) = area * (grad(i, 0) * grad(j, 0) + grad(i, 1) * grad(j, 1));
            k(j, i) = k(i, j);
        }
    }
    return k;
}

SparseMatrix assemble_mass_matrix(const Mesh& mesh, const ElementFilter& filter) {
    return assemble(mesh, filter, [](const TriangleCoords& t) { return element_mass(t); });
}

SparseMatrix assemble_stiffness_matrix(const Mesh& mesh, const ElementFilter& filter) {
    return assemble(mesh, filter, [](const TriangleCoords& t) { return element_stiffness(t); });
}

SparseMatrix assemble_boundary_mass(const Mesh& mesh, BoundaryTag tag) {
    std::vector<Triplet> trips;
    for (const auto& be : mesh.boundary_edges) {
        if (be.tag != tag) continue;
        const double len = distance(mesh.nodes[be.a], mesh.nodes[be.b]);
        trips.emplace_back(be.a, be.a, len / 3.0);
        trips.emplace_back(be.b, be.b, len / 3.0);
        trips.emplace_back(be.a, be.b, len / 6.0);
        trips.emplace_back(be.b, be.a, len / 6.0);
    }
    SparseMatrix out(mesh.node_count(), mesh.node_count());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SparseMatrix FemOperators::reference_matrix(double diffusivity) const { return affine_state_matrix(*this, diffusivity); }

SparseMatrix FemOperators::state_matrix(double diffusivity) const {
    if (diffusivity < 0.0) throw ValidationError("diffusivity must be >= 0");
    return SparseMatrix(diffusivity * A_diff_tilde + A_robin_tilde);
}

Vector FemOperators::reference_load(const ScenarioParams& params) const { return params.intensity * F_shape; }

Vector FemOperators::dirichlet_lift(const ScenarioParams& params) const {
    return params.obstacle_temperature * (params.diffusivity * lift_diffusion + lift_robin);
}

Vector FemOperators::state_load(const ScenarioParams& params) const {
    return dirichlet_lift(params) + params.intensity * restriction.restrict(F_shape);
}

SparseMatrix FemOperators::control_matrix(const ControlWeights& w) const { return SparseMatrix(w.beta * M_u + w.beta_g * A_u); }

SparseMatrix affine_state_matrix(const FemOperators& ops, double diffusivity) {
    if (diffusivity < 0.0) throw ValidationError("diffusivity must be >= 0");
    return SparseMatrix(diffusivity * ops.A_diff + ops.A_robin);
}

FemOperators assemble_operators(const Mesh& unperturbed, const Mesh& ocp, const RestrictionOperator& restriction,
                                const LayoutSpec& spec) {
    if (static_cast<int>(restriction.ocp_to_unperturbed.size()) != ocp.node_count() ||
        restriction.unperturbed_size != unperturbed.node_count())
        throw ValidationError("assembly: restriction operator does not match the meshes");
    if (ocp.region_count(Region::Control) == 0) throw ValidationError("assembly: control region has no elements");

    FemOperators ops;
    ops.restriction = restriction;
    ops.E = restriction.matrix();

    ops.M = assemble_mass_matrix(unperturbed);
    ops.A_diff = assemble_stiffness_matrix(unperturbed);
    ops.A_robin = assemble_boundary_mass(unperturbed, BoundaryTag::OuterRobin);

    ops.F_shape = Vector::Zero(unperturbed.node_count());
    int source_elements = 0;
    for (int e = 0; e < unperturbed.element_count(); ++e) {
        if (!in_source(spec, unperturbed.centroid(e))) continue;
        ++source_elements;
        const double third = unperturbed.signed_area(e) / 3.0;
        for (int v : unperturbed.triangles[e]) ops.F_shape[v] += third;
    }
    if (source_elements == 0) throw ValidationError("assembly: source region has no elements");

    const SparseMatrix Et = ops.E.transpose();
    ops.M_tilde = ops.E * ops.M * Et;
    ops.A_diff_tilde = ops.E * ops.A_diff * Et;
    ops.A_robin_tilde = ops.E * ops.A_robin * Et;

    // Control dofs: nodes of control elements, in OCP node order.
    std::vector<int> control_dof(ocp.node_count(), -1);
    for (int e = 0; e < ocp.element_count(); ++e)
        if (ocp.regions[e] == Region::Control)
            for (int v : ocp.triangles[e]) control_dof[v] = 0;
    for (int n = 0; n < ocp.node_count(); ++n) {
        if (control_dof[n] < 0) continue;
        control_dof[n] = static_cast<int>(ops.control_nodes.size());
        ops.control_nodes.push_back(n);
    }
    const int nu = static_cast<int>(ops.control_nodes.size());
    const int nq = restriction.free_count();

    auto is_control = [&](int e) { return ocp.regions[e] == Region::Control; };
    auto is_observation = [&](int e) { return ocp.regions[e] == Region::Observation; };
    const SparseMatrix Mc = assemble_mass_matrix(ocp, is_control);
    const SparseMatrix Kc = assemble_stiffness_matrix(ocp, is_control);
    ops.B = remap(Mc, restriction.dof_of_ocp_node, nq, control_dof, nu);
    ops.M_u = remap(Mc, control_dof, nu, control_dof, nu);
    ops.A_u = remap(Kc, control_dof, nu, control_dof, nu);
    ops.M_obs = remap(assemble_mass_matrix(ocp, is_observation), restriction.dof_of_ocp_node, nq,
                      restriction.dof_of_ocp_node, nq);

    ops.lift_diffusion = dirichlet_column_sum(assemble_stiffness_matrix(ocp), restriction);
    ops.lift_robin = dirichlet_column_sum(assemble_boundary_mass(ocp, BoundaryTag::OuterRobin), restriction);

    for (auto* m : {&ops.M, &ops.A_diff, &ops.A_robin, &ops.M_tilde, &ops.A_diff_tilde, &ops.A_robin_tilde, &ops.B,
                    &ops.M_obs, &ops.M_u, &ops.A_u})
        m->makeCompressed();
    return ops;
}

Discretization discretize(const LayoutSpec& spec) { return discretize(spec, generate_layout(spec)); }

Discretization discretize(const LayoutSpec& spec, LayoutMeshes meshes) {
    Discretization d;
    d.spec = spec;
    d.meshes = std::move(meshes);
    d.restriction = build_restriction(d.meshes.unperturbed, d.meshes.ocp);
    d.ops = assemble_operators(d.meshes.unperturbed, d.meshes.ocp, d.restriction, spec);
    return d;
}

}  // namespace cloak
