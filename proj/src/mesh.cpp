#include "cloak/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace cloak {

namespace {

double tri_area(Point a, Point b, Point c) { return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)); }

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

/// Edges belonging to exactly one triangle, oriented as in that triangle.
std::vector<std::pair<int, int>> boundary_of(const std::vector<TriangleNodes>& tris) {
    std::map<std::pair<int, int>, std::pair<int, std::pair<int, int>>> count;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            auto& entry = count[edge_key(a, b)];
            entry.first++;
            entry.second = {a, b};
        }
    }
    std::vector<std::pair<int, int>> out;
    for (const auto& [key, entry] : count)
        if (entry.first == 1) out.push_back(entry.second);
    return out;
}

struct Fnv {
    std::uint64_t h = 1469598103934665603ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ULL;
        }
    }
    template <class T>
    void value(const T& v) {
        bytes(&v, sizeof(T));
    }
};

class GridBuilder {
public:
    explicit GridBuilder(const LayoutSpec& spec) : spec_(spec) {
        cells_ = std::max(2, static_cast<int>(std::lround(2.0 * spec.half_width / spec.h)));
        spacing_ = 2.0 * spec.half_width / cells_;
        tol_ = 1e-12 * spec.half_width;
    }

    LayoutMeshes build() {
        make_grid();
        if (has_obstacle(spec_.obstacle)) carve_obstacle();
        else obstacle_.assign(tris_.size(), false);
        return assemble();
    }

private:
    void make_grid() {
        const int n = cells_;
        const double L = spec_.half_width;
        nodes_.reserve((n + 1) * (n + 1));
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) nodes_.push_back({-L + i * spacing_, -L + j * spacing_});
        // Diagonals point away from the obstacle centre so the pattern is
        // mirror-symmetric about it.
        Point c{0.0, 0.0};
        if (const auto* circ = std::get_if<Circle>(&spec_.obstacle)) c = circ->center;
        auto id = [n](int i, int j) { return j * (n + 1) + i; };
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const int n00 = id(i, j), n10 = id(i + 1, j), n01 = id(i, j + 1), n11 = id(i + 1, j + 1);
                const double cx = -L + (i + 0.5) * spacing_ - c.x;
                const double cy = -L + (j + 0.5) * spacing_ - c.y;
                if (cx * cy >= 0.0) {
                    tris_.push_back({n00, n10, n11});
                    tris_.push_back({n00, n11, n01});
                } else {
                    tris_.push_back({n00, n10, n01});
                    tris_.push_back({n10, n11, n01});
                }
            }
        }
        incident_.assign(nodes_.size(), {});
        for (int e = 0; e < static_cast<int>(tris_.size()); ++e)
            for (int v : tris_[e]) incident_[v].push_back(e);
        adjacent_.assign(tris_.size(), {-1, -1, -1});
        std::map<std::pair<int, int>, int> first;
        for (int e = 0; e < static_cast<int>(tris_.size()); ++e) {
            for (int k = 0; k < 3; ++k) {
                const auto key = edge_key(tris_[e][k], tris_[e][(k + 1) % 3]);
                const auto [it, fresh] = first.emplace(key, e);
                if (fresh) continue;
                const int f = it->second;
                adjacent_[e][k] = f;
                for (int j = 0; j < 3; ++j)
                    if (edge_key(tris_[f][j], tris_[f][(j + 1) % 3]) == key) adjacent_[f][j] = e;
            }
        }
    }

    double phi(Point p) const { return obstacle_signed_distance(spec_.obstacle, p); }

    Point centroid(int e) const {
        const auto& t = tris_[e];
        return (1.0 / 3.0) * (nodes_[t[0]] + nodes_[t[1]] + nodes_[t[2]]);
    }

    /// Obstacle elements are those with centroid inside the obstacle, notches
    /// (free elements with two edges on the obstacle side) and elements
    /// around nodes that could not be moved out of the obstacle.
    bool classify() {
        std::vector<bool> inside(tris_.size());
        for (std::size_t e = 0; e < tris_.size(); ++e)
            inside[e] = forced_[e] || phi(centroid(static_cast<int>(e))) < 0.0;
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t e = 0; e < tris_.size(); ++e) {
                if (inside[e]) continue;
                int blocked = 0;
                for (int f : adjacent_[e])
                    if (f >= 0 && inside[f]) ++blocked;
                if (blocked >= 2) inside[e] = grew = true;
            }
        }
        const bool changed = inside != obstacle_;
        obstacle_ = std::move(inside);
        return changed;
    }

    /// Moves node `n` to `target` unless an incident triangle would lose more
    /// than 90% of its background area. Obstacle elements only need to stay
    /// positively oriented.
    bool try_move(int n, Point target) {
        const Point old = nodes_[n];
        nodes_[n] = target;
        const double background = 0.5 * spacing_ * spacing_;
        for (int e : incident_[n]) {
            const auto& t = tris_[e];
            const double floor = obstacle_[e] ? 1e-3 * background : 0.1 * background;
            if (tri_area(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]]) < floor) {
                nodes_[n] = old;
                return false;
            }
        }
        return true;
    }

    /// Nodes joined to `n` by an edge between an obstacle and a non-obstacle element.
    std::vector<int> interface_neighbours(int n) const {
        std::map<int, int> kinds;
        for (int e : incident_[n])
            for (int v : tris_[e])
                if (v != n) kinds[v] |= obstacle_[e] ? 1 : 2;
        std::vector<int> out;
        for (const auto& [v, k] : kinds)
            if (k == 3) out.push_back(v);
        return out;
    }

    /// Moves `n` onto the obstacle boundary at the fraction `w` of the way from
    /// its closest point towards the midpoint of its two interface neighbours.
    bool slide(int n, double w) {
        const auto nb = interface_neighbours(n);
        if (nb.size() != 2) return false;
        const auto& obs = spec_.obstacle;
        const double len = obstacle_boundary_length(obs);
        auto wrap = [len](double d) { return d - len * std::round(d / len); };
        const double ta = obstacle_boundary_parameter(obs, nodes_[nb[0]]);
        const double tb = obstacle_boundary_parameter(obs, nodes_[nb[1]]);
        const double mid = ta + 0.5 * wrap(tb - ta);
        const double tc = obstacle_boundary_parameter(obs, nodes_[n]);
        return try_move(n, obstacle_boundary_point(obs, tc + w * wrap(mid - tc)));
    }

    /// Moves `n` onto the obstacle boundary. The closest point is tried first;
    /// when that squashes an element the target slides along the boundary
    /// towards the midpoint of the two neighbouring interface nodes.
    bool snap(int n) {
        if (try_move(n, obstacle_closest_point(spec_.obstacle, nodes_[n]))) return true;
        for (double w : {1.0, 0.75, 0.5, 0.25})
            if (slide(n, w)) return true;
        return false;
    }

    void carve_obstacle() {
        forced_.assign(tris_.size(), false);
        classify();
        pinned_.assign(nodes_.size(), false);

        if (const auto* poly = std::get_if<Polygon>(&spec_.obstacle)) {
            // Put the closest interface node on every polygon corner first.
            for (const auto& v : poly->vertices) {
                const auto flags = node_flags();
                int best = -1;
                double best_d = 0.75 * spacing_;
                for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
                    if (pinned_[n] || !(flags[n] == 3)) continue;
                    const double d = distance(nodes_[n], v);
                    if (d < best_d) {
                        best_d = d;
                        best = n;
                    }
                }
                if (best >= 0 && try_move(best, v)) pinned_[best] = true;
            }
            classify();
        }

        for (int pass = 0; pass < 20; ++pass) {
            auto flags = node_flags();
            bool changed = false, pending = false;
            for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
                if (pinned_[n]) continue;
                const bool interface = flags[n] == 3;
                const bool stray = (flags[n] & 2) && phi(nodes_[n]) < -tol_;
                if (!interface && !stray) continue;
                if (std::abs(phi(nodes_[n])) <= tol_) continue;
                if (snap(n)) {
                    changed = true;
                } else if (phi(nodes_[n]) < -tol_) {
                    for (int e : incident_[n]) forced_[e] = true;
                    changed = true;
                } else {
                    pending = true;
                }
            }
            if (classify()) changed = true;
            if (!changed && !pending) break;
            // Even out the spacing of boundary nodes to make room for the ones
            // that could not be placed yet.
            flags = node_flags();
            for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
                if (pinned_[n] || flags[n] != 3 || std::abs(phi(nodes_[n])) > tol_) continue;
                slide(n, 0.5);
            }
            classify();
        }

        const auto flags = node_flags();
        for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
            if ((flags[n] & 2) && phi(nodes_[n]) < -1e-9 * spec_.half_width)
                throw ValidationError("layout: mesh size h too coarse to resolve the obstacle (node " +
                                      std::to_string(n) + " left inside it)");
        }
    }

    /// bit 0: node of an obstacle element, bit 1: node of a non-obstacle element.
    std::vector<int> node_flags() const {
        std::vector<int> flags(nodes_.size(), 0);
        for (std::size_t e = 0; e < tris_.size(); ++e)
            for (int v : tris_[e]) flags[v] |= obstacle_[e] ? 1 : 2;
        return flags;
    }

    Region region_of(int e) const {
        const Point c = centroid(e);
        if (obstacle_[e]) return Region::Bulk;
        if (in_cloak(spec_, c)) return Region::Control;
        if (in_observation(spec_, c)) return Region::Observation;
        return Region::Bulk;
    }

    bool on_outer(int a, int b) const {
        const double L = spec_.half_width;
        const Point p = nodes_[a], q = nodes_[b];
        auto on = [&](double u, double v) { return std::abs(std::abs(u) - L) <= tol_ && std::abs(u - v) <= tol_; };
        return on(p.x, q.x) || on(p.y, q.y);
    }

    LayoutMeshes assemble() {
        LayoutMeshes out;
        Mesh& un = out.unperturbed;
        un.nodes = nodes_;
        un.triangles = tris_;
        un.regions.resize(tris_.size());
        for (int e = 0; e < static_cast<int>(tris_.size()); ++e) un.regions[e] = region_of(e);
        for (const auto& [a, b] : boundary_of(un.triangles)) un.boundary_edges.push_back({a, b, BoundaryTag::OuterRobin});

        std::vector<int> keep(nodes_.size(), -1);
        std::vector<TriangleNodes> kept;
        std::vector<Region> kept_regions;
        for (int e = 0; e < static_cast<int>(tris_.size()); ++e) {
            if (obstacle_[e]) continue;
            kept.push_back(tris_[e]);
            kept_regions.push_back(un.regions[e]);
            for (int v : tris_[e]) keep[v] = 0;
        }
        Mesh& ocp = out.ocp;
        std::vector<int> ocp_to_un;
        for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
            if (keep[n] < 0) continue;
            keep[n] = static_cast<int>(ocp.nodes.size());
            ocp.nodes.push_back(nodes_[n]);
            ocp_to_un.push_back(n);
        }
        for (auto t : kept) {
            for (int& v : t) v = keep[v];
            ocp.triangles.push_back(t);
        }
        ocp.regions = std::move(kept_regions);
        for (const auto& [a, b] : boundary_of(ocp.triangles)) {
            ocp.boundary_edges.push_back(
                {a, b, on_outer(ocp_to_un[a], ocp_to_un[b]) ? BoundaryTag::OuterRobin : BoundaryTag::ObstacleDirichlet});
        }
        un.validate();
        ocp.validate();
        return out;
    }

    const LayoutSpec& spec_;
    int cells_ = 0;
    double spacing_ = 0.0;
    double tol_ = 0.0;
    std::vector<Point> nodes_;
    std::vector<TriangleNodes> tris_;
    std::vector<std::vector<int>> incident_;
    std::vector<std::array<int, 3>> adjacent_;
    std::vector<bool> obstacle_;
    std::vector<bool> pinned_;
    std::vector<bool> forced_;
};

}  // namespace

double Mesh::signed_area(int e) const {
    const auto& t = triangles[e];
    return tri_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

Point Mesh::centroid(int e) const {
    const auto& t = triangles[e];
    return (1.0 / 3.0) * (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]);
}

double Mesh::total_area() const {
    double a = 0.0;
    for (int e = 0; e < element_count(); ++e) a += signed_area(e);
    return a;
}

int Mesh::region_count(Region r) const { return static_cast<int>(std::count(regions.begin(), regions.end(), r)); }

void Mesh::validate() const {
    if (regions.size() != triangles.size())
        throw ValidationError("mesh: region labels (" + std::to_string(regions.size()) + ") do not match elements (" +
                              std::to_string(triangles.size()) + ")");
    for (int e = 0; e < element_count(); ++e) {
        for (int v : triangles[e])
            if (v < 0 || v >= node_count())
                throw ValidationError("mesh: triangle " + std::to_string(e) + " references missing node " +
                                      std::to_string(v));
        if (!(signed_area(e) > 0.0))
            throw ValidationError("mesh: triangle " + std::to_string(e) +
                                  " has non-positive signed area (degenerate or clockwise)");
    }
    std::map<std::pair<int, int>, int> owners;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) owners[edge_key(t[k], t[(k + 1) % 3])]++;
    for (std::size_t i = 0; i < boundary_edges.size(); ++i) {
        const auto& be = boundary_edges[i];
        auto it = owners.find(edge_key(be.a, be.b));
        if (it == owners.end() || it->second != 1)
            throw ValidationError("mesh: boundary edge " + std::to_string(i) + " does not belong to exactly one triangle");
    }
}

std::uint64_t Mesh::hash() const {
    Fnv f;
    for (const auto& p : nodes) {
        f.value(p.x);
        f.value(p.y);
    }
    for (std::size_t e = 0; e < triangles.size(); ++e) {
        for (int v : triangles[e]) f.value(v);
        f.value(static_cast<int>(regions[e]));
    }
    for (const auto& be : boundary_edges) {
        f.value(be.a);
        f.value(be.b);
        f.value(static_cast<int>(be.tag));
    }
    return f.h;
}

LayoutMeshes generate_layout(const LayoutSpec& spec) {
    spec.validate();
    return GridBuilder(spec).build();
}

double obstacle_perimeter(const Mesh& mesh) {
    double len = 0.0;
    for (const auto& be : mesh.boundary_edges)
        if (be.tag == BoundaryTag::ObstacleDirichlet) len += distance(mesh.nodes[be.a], mesh.nodes[be.b]);
    return len;
}

int region_components(const Mesh& mesh, Region r) {
    std::vector<int> parent(mesh.node_count());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::set<int> used;
    for (int e = 0; e < mesh.element_count(); ++e) {
        if (mesh.regions[e] != r) continue;
        const auto& t = mesh.triangles[e];
        for (int v : t) used.insert(v);
        parent[find(t[1])] = find(t[0]);
        parent[find(t[2])] = find(t[0]);
    }
    std::set<int> roots;
    for (int v : used) roots.insert(find(v));
    return static_cast<int>(roots.size());
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
    out << "nodes " << mesh.node_count() << " elements " << mesh.element_count() << " bedges "
        << mesh.boundary_edges.size() << "\n";
    out << std::setprecision(17);
    for (const auto& p : mesh.nodes) out << p.x << ' ' << p.y << '\n';
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& t = mesh.triangles[e];
        out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << static_cast<int>(mesh.regions[e]) << '\n';
    }
    for (const auto& be : mesh.boundary_edges) out << be.a << ' ' << be.b << ' ' << static_cast<int>(be.tag) << '\n';
}

Mesh read_mesh(std::istream& in) {
    Mesh mesh;
    std::string line;
    int lineno = 0;
    auto next_line = [&](const char* what) {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return;
        }
        throw ParseError(std::string("mesh: unexpected end of file while reading ") + what, lineno + 1);
    };

    next_line("header");
    std::istringstream header(line);
    std::string k1, k2, k3;
    long n = -1, m = -1, kb = -1;
    if (!(header >> k1 >> n >> k2 >> m >> k3 >> kb) || k1 != "nodes" || k2 != "elements" || k3 != "bedges" || n < 0 ||
        m < 0 || kb < 0)
        throw ParseError("mesh: expected header 'nodes <N> elements <M> bedges <K>'", lineno);

    mesh.nodes.reserve(n);
    for (long i = 0; i < n; ++i) {
        next_line("nodes");
        std::istringstream ss(line);
        Point p;
        if (!(ss >> p.x >> p.y)) throw ParseError("mesh: expected 'x y'", lineno);
        mesh.nodes.push_back(p);
    }
    for (long i = 0; i < m; ++i) {
        next_line("elements");
        std::istringstream ss(line);
        TriangleNodes t;
        int region = -1;
        if (!(ss >> t[0] >> t[1] >> t[2] >> region)) throw ParseError("mesh: expected 'i j k region'", lineno);
        if (region < 0 || region > 2) throw ParseError("mesh: region must be 0 (bulk), 1 (control) or 2 (observation)", lineno);
        for (int v : t)
            if (v < 0 || v >= n) throw ParseError("mesh: node index out of range", lineno);
        mesh.triangles.push_back(t);
        mesh.regions.push_back(static_cast<Region>(region));
    }
    for (long i = 0; i < kb; ++i) {
        next_line("boundary edges");
        std::istringstream ss(line);
        BoundaryEdge be;
        int tag = -1;
        if (!(ss >> be.a >> be.b >> tag)) throw ParseError("mesh: expected 'i j tag'", lineno);
        if (tag < 0 || tag > 1) throw ParseError("mesh: tag must be 0 (robin) or 1 (dirichlet)", lineno);
        if (be.a < 0 || be.a >= n || be.b < 0 || be.b >= n) throw ParseError("mesh: node index out of range", lineno);
        be.tag = static_cast<BoundaryTag>(tag);
        mesh.boundary_edges.push_back(be);
    }
    mesh.validate();
    return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mesh file '" + path + "'");
    write_mesh(mesh, out);
}

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

SparseMatrix RestrictionOperator::matrix() const {
    SparseMatrix E(free_count(), unperturbed_size);
    std::vector<Triplet> trips;
    trips.reserve(free_to_unperturbed.size());
    for (int i = 0; i < free_count(); ++i) trips.emplace_back(i, free_to_unperturbed[i], 1.0);
    E.setFromTriplets(trips.begin(), trips.end());
    return E;
}

Vector RestrictionOperator::restrict(const Vector& v) const {
    Vector out(free_count());
    for (int i = 0; i < free_count(); ++i) out[i] = v[free_to_unperturbed[i]];
    return out;
}

Vector RestrictionOperator::extend(const Vector& w) const {
    Vector out = Vector::Zero(unperturbed_size);
    for (int i = 0; i < free_count(); ++i) out[free_to_unperturbed[i]] = w[i];
    return out;
}

RestrictionOperator build_restriction(const Mesh& unperturbed, const Mesh& ocp) {
    std::map<std::pair<double, double>, int> lookup;
    for (int n = 0; n < unperturbed.node_count(); ++n) lookup[{unperturbed.nodes[n].x, unperturbed.nodes[n].y}] = n;

    RestrictionOperator r;
    r.unperturbed_size = unperturbed.node_count();
    r.ocp_to_unperturbed.resize(ocp.node_count());
    for (int n = 0; n < ocp.node_count(); ++n) {
        auto it = lookup.find({ocp.nodes[n].x, ocp.nodes[n].y});
        if (it == lookup.end())
            throw ValidationError("restriction: meshes are not nested (OCP node " + std::to_string(n) +
                                  " has no unperturbed counterpart)");
        r.ocp_to_unperturbed[n] = it->second;
    }

    std::set<std::array<int, 3>> un_tris;
    for (auto t : unperturbed.triangles) {
        std::sort(t.begin(), t.end());
        un_tris.insert(t);
    }
    for (int e = 0; e < ocp.element_count(); ++e) {
        std::array<int, 3> t;
        for (int k = 0; k < 3; ++k) t[k] = r.ocp_to_unperturbed[ocp.triangles[e][k]];
        std::sort(t.begin(), t.end());
        if (!un_tris.count(t))
            throw ValidationError("restriction: meshes are not nested (OCP triangle " + std::to_string(e) +
                                  " is not an unperturbed element)");
    }

    std::vector<bool> dirichlet(ocp.node_count(), false);
    for (const auto& be : ocp.boundary_edges)
        if (be.tag == BoundaryTag::ObstacleDirichlet) dirichlet[be.a] = dirichlet[be.b] = true;

    r.dof_of_ocp_node.assign(ocp.node_count(), -1);
    for (int n = 0; n < ocp.node_count(); ++n) {
        if (dirichlet[n]) {
            r.dirichlet_nodes.push_back(n);
        } else {
            r.dof_of_ocp_node[n] = static_cast<int>(r.free_nodes.size());
            r.free_nodes.push_back(n);
            r.free_to_unperturbed.push_back(r.ocp_to_unperturbed[n]);
        }
    }
    return r;
}

}  // namespace cloak
