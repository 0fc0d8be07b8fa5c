#include <doctest.h>

#include "cloak/fem.hpp"
#include "support/fixtures.hpp"

#include <cmath>
#include <numbers>

using namespace cloak;

namespace {

double entry_sum(const SparseMatrix& A) {
    double s = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) s += it.value();
    return s;
}

double max_abs(const SparseMatrix& A) {
    double m = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

/// Rows and columns of an OCP-mesh matrix at the free dofs.
Matrix free_block(const SparseMatrix& A_ocp, const RestrictionOperator& r) {
    const Matrix dense(A_ocp);
    Matrix out(r.free_count(), r.free_count());
    for (int i = 0; i < r.free_count(); ++i)
        for (int j = 0; j < r.free_count(); ++j) out(i, j) = dense(r.free_nodes[i], r.free_nodes[j]);
    return out;
}

const Discretization& default_disc() {
    static const Discretization d = discretize(annulus_layout(0.05));
    return d;
}

}  // namespace

TEST_CASE("element mass on the unit right triangle") {
    const TriangleCoords t{Point{0, 0}, Point{1, 0}, Point{0, 1}};
    Eigen::Matrix3d expected;
    expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    expected /= 24.0;
    CHECK((element_mass(t) - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("element mass sums to the area and scales with it") {
    const TriangleCoords t{Point{0.1, -0.3}, Point{1.7, 0.2}, Point{0.4, 1.1}};
    const double area = 0.5 * ((1.6) * (1.4) - (0.3) * (0.5));
    CHECK(element_mass(t).sum() == doctest::Approx(area).epsilon(1e-14));
    const TriangleCoords t2{2.0 * t[0], 2.0 * t[1], 2.0 * t[2]};
    CHECK((element_mass(t2) - 4.0 * element_mass(t)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("element stiffness on the unit right triangle") {
    const TriangleCoords t{Point{0, 0}, Point{1, 0}, Point{0, 1}};
    Eigen::Matrix3d expected;
    expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
    expected *= 0.5;
    CHECK((element_stiffness(t) - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("element stiffness has zero row sums and is rotation invariant") {
    const TriangleCoords t{Point{0.1, -0.3}, Point{1.7, 0.2}, Point{0.4, 1.1}};
    const Eigen::Matrix3d K = element_stiffness(t);
    CHECK(K.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
    const double a = 0.7;
    auto rot = [&](Point p) { return Point{std::cos(a) * p.x - std::sin(a) * p.y, std::sin(a) * p.x + std::cos(a) * p.y}; };
    const TriangleCoords r{rot(t[0]), rot(t[1]), rot(t[2])};
    CHECK((element_stiffness(r) - K).cwiseAbs().maxCoeff() <= 1e-13);
    // Cyclic relabelling permutes the matrix.
    const TriangleCoords c{t[1], t[2], t[0]};
    const Eigen::Matrix3d Kc = element_stiffness(c);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(Kc(i, j) == doctest::Approx(K((i + 1) % 3, (j + 1) % 3)).epsilon(1e-13));
}

TEST_CASE("degenerate elements are rejected") {
    const TriangleCoords flat{Point{0, 0}, Point{1, 0}, Point{2, 0}};
    CHECK_THROWS_AS(element_mass(flat), ValidationError);
    CHECK_THROWS_AS(element_stiffness(flat), ValidationError);
    const TriangleCoords cw{Point{0, 0}, Point{0, 1}, Point{1, 0}};
    CHECK_THROWS_AS(element_mass(cw), ValidationError);
}

TEST_CASE("global operator identities on the default square") {
    const auto& ops = default_disc().ops;
    CHECK(entry_sum(ops.M) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(entry_sum(ops.A_robin) == doctest::Approx(8.0).epsilon(1e-12));
    const Vector ones = Vector::Ones(ops.reference_size());
    CHECK((ops.A_diff * ones).cwiseAbs().maxCoeff() <= 1e-12);
    // Discrete source area equals the area of the elements whose centroid is in the disc.
    double src_area = 0.0;
    const auto& un = default_disc().meshes.unperturbed;
    for (int e = 0; e < un.element_count(); ++e)
        if (in_source(default_disc().spec, un.centroid(e))) src_area += un.signed_area(e);
    CHECK(ops.F_shape.sum() == doctest::Approx(src_area).epsilon(1e-12));
    CHECK(src_area == doctest::Approx(std::numbers::pi * 0.01).epsilon(0.1));
}

TEST_CASE("operators are exactly symmetric and definite where required") {
    const auto& ops = default_disc().ops;
    for (const SparseMatrix* A : {&ops.M, &ops.A_diff, &ops.A_robin, &ops.M_obs, &ops.M_u, &ops.A_u, &ops.M_tilde})
        CHECK(max_abs(SparseMatrix(*A - SparseMatrix(A->transpose()))) == 0.0);
    Eigen::SimplicialLLT<SparseMatrix> llt_m(ops.M);
    CHECK(llt_m.info() == Eigen::Success);
    Eigen::SimplicialLLT<SparseMatrix> llt_mu(ops.M_u);
    CHECK(llt_mu.info() == Eigen::Success);
    const Vector ones = Vector::Ones(ops.control_size());
    CHECK((ops.A_u * ones).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(ops.A_u)};
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("restricted stiffness equals direct assembly on the ocp mesh") {
    const auto d = discretize(cloak::testing::tiny_layout());
    const auto& r = d.restriction;
    const Matrix direct_k = free_block(assemble_stiffness_matrix(d.meshes.ocp), r);
    const Matrix direct_m = free_block(assemble_mass_matrix(d.meshes.ocp), r);
    const Matrix direct_r = free_block(assemble_boundary_mass(d.meshes.ocp, BoundaryTag::OuterRobin), r);
    CHECK((Matrix(d.ops.A_diff_tilde) - direct_k).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((Matrix(d.ops.M_tilde) - direct_m).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((Matrix(d.ops.A_robin_tilde) - direct_r).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(d.ops.state_size() <= 200);
}

TEST_CASE("control coupling is the ocp mass restricted to control columns") {
    const auto d = discretize(cloak::testing::tiny_layout());
    const auto& ocp = d.meshes.ocp;
    const Matrix Mc(assemble_mass_matrix(ocp, [&](int e) { return ocp.regions[e] == Region::Control; }));
    const Matrix B(d.ops.B);
    for (int i = 0; i < d.restriction.free_count(); ++i)
        for (int k = 0; k < d.ops.control_size(); ++k)
            CHECK(B(i, k) == Mc(d.restriction.free_nodes[i], d.ops.control_nodes[k]));
}

TEST_CASE("Dirichlet lift is supported next to the obstacle") {
    const auto d = discretize(cloak::testing::tiny_layout());
    const auto& ocp = d.meshes.ocp;
    std::vector<bool> dirichlet(ocp.node_count(), false), adjacent(ocp.node_count(), false);
    for (int n : d.restriction.dirichlet_nodes) dirichlet[n] = true;
    for (const auto& t : ocp.triangles) {
        const bool touches = dirichlet[t[0]] || dirichlet[t[1]] || dirichlet[t[2]];
        if (touches)
            for (int v : t) adjacent[v] = true;
    }
    for (int i = 0; i < d.restriction.free_count(); ++i) {
        if (!adjacent[d.restriction.free_nodes[i]]) {
            CHECK(d.ops.lift_diffusion[i] == 0.0);
            CHECK(d.ops.lift_robin[i] == 0.0);
        }
    }
    CHECK(d.ops.lift_diffusion.norm() > 0.0);
}

TEST_CASE("affine state matrix") {
    const auto& ops = default_disc().ops;
    CHECK(max_abs(SparseMatrix(affine_state_matrix(ops, 0.0) - ops.A_robin)) == 0.0);
    const SparseMatrix diff = affine_state_matrix(ops, 3.5) - affine_state_matrix(ops, 1.0);
    CHECK(max_abs(SparseMatrix(diff - 2.5 * ops.A_diff)) <= 1e-12);
    const Vector ones = Vector::Ones(ops.reference_size());
    CHECK((affine_state_matrix(ops, 5.0) * ones - ops.A_robin * ones).cwiseAbs().maxCoeff() <= 1e-11);
    CHECK(affine_state_matrix(ops, 2.0).nonZeros() == SparseMatrix(ops.A_diff + ops.A_robin).nonZeros());
    CHECK_THROWS_AS(affine_state_matrix(ops, -1.0), ValidationError);
}

TEST_CASE("empty control region is reported") {
    auto d = discretize(cloak::testing::tiny_layout());
    Mesh ocp = d.meshes.ocp;
    for (auto& r : ocp.regions)
        if (r == Region::Control) r = Region::Bulk;
    CHECK_THROWS_WITH_AS(assemble_operators(d.meshes.unperturbed, ocp, d.restriction, d.spec),
                         doctest::Contains("control"), ValidationError);
}
