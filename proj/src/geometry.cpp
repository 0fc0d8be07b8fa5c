#include "cloak/geometry.hpp"

#include "cloak/types.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace cloak {

double norm(Point p) { return std::hypot(p.x, p.y); }
double distance(Point a, Point b) { return norm(a - b); }

namespace {

Point closest_on_segment(Point a, Point b, Point p) {
    const Point ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    if (len2 == 0.0) return a;
    double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return a + t * ab;
}

bool polygon_contains(const Polygon& poly, Point p) {
    bool inside = false;
    const auto& v = poly.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double xc = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

/// Largest distance from `c` to any point of the obstacle.
double obstacle_reach(const ObstacleShape& obstacle, Point c) {
    if (const auto* circ = std::get_if<Circle>(&obstacle)) return distance(circ->center, c) + circ->radius;
    if (const auto* poly = std::get_if<Polygon>(&obstacle)) {
        double r = 0.0;
        for (const auto& v : poly->vertices) r = std::max(r, distance(v, c));
        return r;
    }
    return 0.0;
}

/// Largest distance from `c` to any point of the cloak region.
double cloak_reach(const LayoutSpec& spec, Point c) {
    return std::visit(
        [&](const auto& cl) -> double {
            using T = std::decay_t<decltype(cl)>;
            if constexpr (std::is_same_v<T, Annulus>) {
                return distance(cl.center, c) + cl.r_outer;
            } else if constexpr (std::is_same_v<T, DiscRing>) {
                return distance(cl.center, c) + cl.ring_radius + cl.disc_radius;
            } else {
                return obstacle_reach(spec.obstacle, c) + cl.thickness;
            }
        },
        spec.cloak);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("layout: " + what);
}

bool inside_square(Point p, double r, double half_width) {
    return std::abs(p.x) + r < half_width && std::abs(p.y) + r < half_width;
}

}  // namespace

double polygon_area(const Polygon& poly) {
    double a = 0.0;
    const auto& v = poly.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) a += v[j].x * v[i].y - v[i].x * v[j].y;
    return 0.5 * a;
}

Point polygon_closest_point(const Polygon& poly, Point p) {
    const auto& v = poly.vertices;
    Point best = v.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Point c = closest_on_segment(v[j], v[i], p);
        const double d = distance(c, p);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double polygon_signed_distance(const Polygon& poly, Point p) {
    const double d = distance(polygon_closest_point(poly, p), p);
    return polygon_contains(poly, p) ? -d : d;
}

bool has_obstacle(const ObstacleShape& obstacle) { return !std::holds_alternative<NoObstacle>(obstacle); }

double obstacle_signed_distance(const ObstacleShape& obstacle, Point p) {
    if (const auto* circ = std::get_if<Circle>(&obstacle)) return distance(p, circ->center) - circ->radius;
    if (const auto* poly = std::get_if<Polygon>(&obstacle)) return polygon_signed_distance(*poly, p);
    return std::numeric_limits<double>::infinity();
}

Point obstacle_closest_point(const ObstacleShape& obstacle, Point p) {
    if (const auto* circ = std::get_if<Circle>(&obstacle)) {
        const Point d = p - circ->center;
        const double r = norm(d);
        if (r == 0.0) return circ->center + Point{circ->radius, 0.0};
        return circ->center + (circ->radius / r) * d;
    }
    if (const auto* poly = std::get_if<Polygon>(&obstacle)) return polygon_closest_point(*poly, p);
    return p;
}

double obstacle_boundary_length(const ObstacleShape& obstacle) {
    if (const auto* circ = std::get_if<Circle>(&obstacle)) return 2.0 * std::numbers::pi * circ->radius;
    if (const auto* poly = std::get_if<Polygon>(&obstacle)) {
        double len = 0.0;
        const auto& v = poly->vertices;
        for (std::size_t i = 0; i < v.size(); ++i) len += distance(v[i], v[(i + 1) % v.size()]);
        return len;
    }
    return 0.0;
}

double obstacle_boundary_parameter(const ObstacleShape& obstacle, Point p) {
    if (const auto* circ = std::get_if<Circle>(&obstacle)) {
        double a = std::atan2(p.y - circ->center.y, p.x - circ->center.x);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        return circ->radius * a;
    }
    if (const auto* poly = std::get_if<Polygon>(&obstacle)) {
        const auto& v = poly->vertices;
        double best_d = std::numeric_limits<double>::infinity(), best_t = 0.0, start = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point a = v[i], b = v[(i + 1) % v.size()];
            const Point c = closest_on_segment(a, b, p);
            const double d = distance(c, p);
            if (d < best_d) {
                best_d = d;
                best_t = start + distance(a, c);
            }
            start += distance(a, b);
        }
        return best_t;
    }
    return 0.0;
}

Point obstacle_boundary_point(const ObstacleShape& obstacle, double t) {
    const double len = obstacle_boundary_length(obstacle);
    if (len <= 0.0) return {};
    t = std::fmod(t, len);
    if (t < 0.0) t += len;
    if (const auto* circ = std::get_if<Circle>(&obstacle)) {
        const double a = t / circ->radius;
        return circ->center + Point{circ->radius * std::cos(a), circ->radius * std::sin(a)};
    }
    const auto& v = std::get<Polygon>(obstacle).vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point a = v[i], b = v[(i + 1) % v.size()];
        const double seg = distance(a, b);
        if (t <= seg || i + 1 == v.size()) return seg > 0.0 ? a + std::min(1.0, t / seg) * (b - a) : a;
        t -= seg;
    }
    return v.front();
}

bool in_cloak(const LayoutSpec& spec, Point p) {
    return std::visit(
        [&](const auto& cl) -> bool {
            using T = std::decay_t<decltype(cl)>;
            if constexpr (std::is_same_v<T, Annulus>) {
                const double r = distance(p, cl.center);
                return r >= cl.r_inner && r <= cl.r_outer;
            } else if constexpr (std::is_same_v<T, DiscRing>) {
                for (int i = 0; i < cl.count; ++i) {
                    const double a = 2.0 * std::numbers::pi * i / cl.count;
                    const Point c = cl.center + Point{cl.ring_radius * std::cos(a), cl.ring_radius * std::sin(a)};
                    if (distance(p, c) <= cl.disc_radius) return true;
                }
                return false;
            } else {
                const double d = obstacle_signed_distance(spec.obstacle, p);
                return d > 0.0 && d <= cl.thickness;
            }
        },
        spec.cloak);
}

bool in_observation(const LayoutSpec& spec, Point p) {
    if (const auto* ann = std::get_if<Annulus>(&spec.observation)) {
        const double r = distance(p, ann->center);
        return r >= ann->r_inner && r <= ann->r_outer;
    }
    return !in_cloak(spec, p) && obstacle_signed_distance(spec.obstacle, p) > 0.0;
}

bool in_source(const LayoutSpec& spec, Point p) { return distance(p, spec.source.center) <= spec.source.radius; }

void LayoutSpec::validate() const {
    require(half_width > 0.0, "domain half-width must be > 0");
    require(h > 0.0, "mesh size h must be > 0");
    require(h < half_width, "mesh size h must be smaller than the domain half-width");

    if (const auto* circ = std::get_if<Circle>(&obstacle)) {
        require(circ->radius > 0.0, "obstacle radius must be > 0");
        require(inside_square(circ->center, circ->radius, half_width), "obstacle must lie inside the domain");
    } else if (const auto* poly = std::get_if<Polygon>(&obstacle)) {
        require(poly->vertices.size() >= 3, "obstacle polygon needs at least 3 vertices");
        require(std::abs(polygon_area(*poly)) > 0.0, "obstacle polygon has zero area");
        for (const auto& v : poly->vertices)
            require(inside_square(v, 0.0, half_width), "obstacle must lie inside the domain");
    }

    std::visit(
        [&](const auto& cl) {
            using T = std::decay_t<decltype(cl)>;
            if constexpr (std::is_same_v<T, Annulus>) {
                require(cl.r_inner >= 0.0 && cl.r_outer > cl.r_inner, "cloak annulus needs 0 <= r_inner < r_outer");
                require(obstacle_reach(obstacle, cl.center) <= cl.r_inner,
                        "obstacle must lie inside the cloak's interior hole");
            } else if constexpr (std::is_same_v<T, DiscRing>) {
                require(cl.count >= 1, "disc ring needs count >= 1");
                require(cl.disc_radius > 0.0 && cl.ring_radius > cl.disc_radius,
                        "disc ring needs 0 < disc_radius < ring_radius");
                if (cl.count >= 2)
                    require(2.0 * cl.ring_radius * std::sin(std::numbers::pi / cl.count) > 2.0 * cl.disc_radius,
                            "control discs overlap");
                require(obstacle_reach(obstacle, cl.center) <= cl.ring_radius - cl.disc_radius,
                        "obstacle must lie inside the cloak's interior hole");
            } else {
                require(cl.thickness > 0.0, "offset cloak thickness must be > 0");
                require(has_obstacle(obstacle), "offset cloak requires an obstacle");
            }
        },
        cloak);
    require(cloak_reach(*this, {0.0, 0.0}) < half_width * std::sqrt(2.0), "cloak must lie inside the domain");

    if (const auto* ann = std::get_if<Annulus>(&observation)) {
        require(ann->r_inner >= 0.0 && ann->r_outer > ann->r_inner,
                "observation annulus needs 0 <= r_inner < r_outer");
        require(cloak_reach(*this, ann->center) <= ann->r_inner, "cloak and observation regions overlap");
        require(inside_square(ann->center, ann->r_outer, half_width), "observation annulus must lie inside the domain");
    }

    require(source.radius > 0.0, "source radius must be > 0");
    require(inside_square(source.center, source.radius, half_width), "source disc must lie inside the domain");
    require(obstacle_signed_distance(obstacle, source.center) >= source.radius, "source disc overlaps the obstacle");
    std::visit(
        [&](const auto& cl) {
            using T = std::decay_t<decltype(cl)>;
            if constexpr (std::is_same_v<T, Annulus>) {
                const double d = distance(source.center, cl.center);
                require(d - source.radius >= cl.r_outer || d + source.radius <= cl.r_inner,
                        "source disc overlaps the cloak");
            } else if constexpr (std::is_same_v<T, DiscRing>) {
                for (int i = 0; i < cl.count; ++i) {
                    const double a = 2.0 * std::numbers::pi * i / cl.count;
                    const Point c = cl.center + Point{cl.ring_radius * std::cos(a), cl.ring_radius * std::sin(a)};
                    require(distance(source.center, c) >= source.radius + cl.disc_radius,
                            "source disc overlaps the cloak");
                }
            } else {
                require(obstacle_signed_distance(obstacle, source.center) - source.radius >= cl.thickness,
                        "source disc overlaps the cloak");
            }
        },
        cloak);
}

LayoutSpec annulus_layout(double h) {
    LayoutSpec spec;
    spec.h = h;
    return spec;
}

LayoutSpec disc_ring_layout(double h) {
    LayoutSpec spec;
    spec.cloak = DiscRing{{0.0, 0.0}, 8, 0.30, 0.06};
    spec.h = h;
    return spec;
}

LayoutSpec offset_layout(Polygon obstacle, double thickness, double h) {
    LayoutSpec spec;
    spec.obstacle = std::move(obstacle);
    spec.cloak = ObstacleOffset{thickness};
    spec.observation = CloakComplement{};
    spec.h = h;
    return spec;
}

Polygon load_polygon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open polygon file '" + path + "'");
    Polygon poly;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Point p;
        if (!(ss >> p.x >> p.y)) throw ParseError("polygon: expected 'x y'", lineno);
        poly.vertices.push_back(p);
    }
    if (poly.vertices.size() < 3) throw ParseError("polygon: need at least 3 vertices", lineno);
    return poly;
}

}  // namespace cloak
