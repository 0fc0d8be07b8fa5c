#pragma once

#include "cloak/geometry.hpp"
#include "cloak/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cloak {

enum class Region : int { Bulk = 0, Control = 1, Observation = 2 };
enum class BoundaryTag : int { OuterRobin = 0, ObstacleDirichlet = 1 };

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    BoundaryTag tag = BoundaryTag::OuterRobin;

    friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

using TriangleNodes = std::array<int, 3>;

/// Conforming P1 triangulation with tagged boundary edges and per-element regions.
///
/// Invariants (checked by validate()): every triangle is counter-clockwise with
/// strictly positive area, every boundary edge is an edge of exactly one
/// triangle, and every element carries exactly one region label.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<TriangleNodes> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    std::vector<Region> regions;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(triangles.size()); }

    double signed_area(int e) const;
    Point centroid(int e) const;
    double total_area() const;
    int region_count(Region r) const;

    /// Throws ValidationError naming the offending element or edge.
    void validate() const;

    /// FNV-1a digest of coordinates, connectivity, regions and tags.
    std::uint64_t hash() const;

    friend bool operator==(const Mesh&, const Mesh&) = default;
};

/// Unperturbed mesh of the full square and its restriction to the OCP domain.
struct LayoutMeshes {
    Mesh unperturbed;
    Mesh ocp;
};

/// Structured background grid split into right triangles. Elements whose
/// centroid falls inside the obstacle are removed from the OCP mesh and the
/// interface nodes are snapped onto the obstacle boundary (both meshes share
/// the snapped coordinates). Regions are assigned by element centroid.
LayoutMeshes generate_layout(const LayoutSpec& spec);

/// Total length of the ObstacleDirichlet edges.
double obstacle_perimeter(const Mesh& mesh);

/// Number of connected components (through shared nodes) of the elements in region `r`.
int region_components(const Mesh& mesh, Region r);

void write_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_mesh(std::istream& in);
void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

/// Selection of the free (non-Dirichlet) OCP nodes out of the unperturbed node set.
///
/// Row i of E picks unperturbed node `free_to_unperturbed[i]`, so E*E^T = I.
struct RestrictionOperator {
    int unperturbed_size = 0;
    std::vector<int> ocp_to_unperturbed;   // per OCP-mesh node
    std::vector<int> dirichlet_nodes;      // OCP-mesh indices on the obstacle boundary
    std::vector<int> free_nodes;           // OCP-mesh indices, in dof order
    std::vector<int> free_to_unperturbed;  // per free dof
    std::vector<int> dof_of_ocp_node;      // -1 for Dirichlet nodes

    int free_count() const { return static_cast<int>(free_nodes.size()); }
    SparseMatrix matrix() const;
    Vector restrict(const Vector& v) const;  // E v
    Vector extend(const Vector& w) const;    // E^T w
};

/// Matches OCP nodes to unperturbed nodes by coordinates; throws when the
/// meshes are not nested.
RestrictionOperator build_restriction(const Mesh& unperturbed, const Mesh& ocp);

}  // namespace cloak
