#pragma once

#include <string>
#include <variant>
#include <vector>

namespace cloak {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double norm(Point p);
double distance(Point a, Point b);

struct Circle {
    Point center;
    double radius = 0.0;
};

/// Simple closed polygon, vertices in either orientation, no repeated closing vertex.
struct Polygon {
    std::vector<Point> vertices;
};

struct Annulus {
    Point center;
    double r_inner = 0.0;
    double r_outer = 0.0;
};

/// `count` discs of radius `disc_radius` equally spaced on a ring.
struct DiscRing {
    Point center;
    int count = 8;
    double ring_radius = 0.30;
    double disc_radius = 0.06;
};

/// Band of the given thickness hugging the obstacle boundary from outside.
struct ObstacleOffset {
    double thickness = 0.05;
};

/// Everything outside obstacle and cloak.
struct CloakComplement {};

struct NoObstacle {};

using ObstacleShape = std::variant<NoObstacle, Circle, Polygon>;
using CloakShape = std::variant<Annulus, DiscRing, ObstacleOffset>;
using ObservationShape = std::variant<Annulus, CloakComplement>;

/// Geometric description of one cloaking scenario on the square [-L, L]^2.
struct LayoutSpec {
    double half_width = 1.0;
    ObstacleShape obstacle = Circle{{0.0, 0.0}, 0.2};
    CloakShape cloak = Annulus{{0.0, 0.0}, 0.25, 0.35};
    ObservationShape observation = Annulus{{0.0, 0.0}, 0.40, 0.60};
    Circle source{{0.7, 0.0}, 0.1};
    double h = 1.0 / 60.0;

    /// Throws ValidationError naming the first violated constraint.
    void validate() const;
};

/// Default connected-annulus layout.
LayoutSpec annulus_layout(double h = 1.0 / 60.0);
/// Eight disconnected control discs on a ring around the obstacle.
LayoutSpec disc_ring_layout(double h = 1.0 / 60.0);
/// Polygonal obstacle with a thin offset cloak; observation is the complement.
LayoutSpec offset_layout(Polygon obstacle, double thickness, double h = 1.0 / 60.0);

/// Reads "x y" vertex lines (blank lines and '#' comments ignored).
Polygon load_polygon(const std::string& path);

/// Signed distance to the obstacle boundary, negative inside. +inf without obstacle.
double obstacle_signed_distance(const ObstacleShape& obstacle, Point p);
/// Closest point on the obstacle boundary.
Point obstacle_closest_point(const ObstacleShape& obstacle, Point p);
bool has_obstacle(const ObstacleShape& obstacle);

/// Arc-length parametrization of the obstacle boundary, periodic with the
/// boundary length. Circles start at angle 0, polygons at the first vertex.
double obstacle_boundary_length(const ObstacleShape& obstacle);
double obstacle_boundary_parameter(const ObstacleShape& obstacle, Point p);
Point obstacle_boundary_point(const ObstacleShape& obstacle, double t);

double polygon_signed_distance(const Polygon& poly, Point p);
Point polygon_closest_point(const Polygon& poly, Point p);
double polygon_area(const Polygon& poly);

bool in_cloak(const LayoutSpec& spec, Point p);
bool in_observation(const LayoutSpec& spec, Point p);
bool in_source(const LayoutSpec& spec, Point p);

}  // namespace cloak
