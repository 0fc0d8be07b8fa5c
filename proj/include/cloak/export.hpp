#pragma once

#include "cloak/config.hpp"
#include "cloak/fem.hpp"
#include "cloak/steady.hpp"
#include "cloak/transient.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace cloak {

/// Named nodal values on one mesh.
struct NodalFields {
    std::vector<std::string> names;
    std::vector<Vector> values;

    void add(const std::string& name, Vector v);
    const Vector& operator[](const std::string& name) const;
};

/// z, q, p, u and q - z on the nodes of the OCP mesh. Dirichlet nodes carry
/// the obstacle temperature in q and zero in p; u is zero off the control nodes.
NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const Vector& z, const Vector& q,
                       const Vector& p, const Vector& u);
NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const SteadySolution& s);
NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const Trajectory& t, int frame);

/// "node,x,y,<names...>" with shortest round-trip decimal values.
void write_csv(std::ostream& out, const Mesh& mesh, const NodalFields& f);

struct CsvFields {
    std::vector<Point> points;
    NodalFields fields;
};

CsvFields read_csv(std::istream& in);

/// Legacy ASCII VTK unstructured grid with point data (and the region label as cell data).
void write_vtk(std::ostream& out, const Mesh& mesh, const NodalFields& f, const std::string& title);

/// Writes <stem>.csv and/or <stem>.vtk and returns the paths. Throws std::runtime_error when a file cannot be written.
std::vector<std::string> export_fields(const Mesh& mesh, const NodalFields& f, ExportFormat format,
                                       const std::string& stem, const std::string& title = "cloak fields");

/// One row per instant: k, t, mean tracking error, norms of q, p and u and their
/// relative distance to the steady solution.
void write_timeline(std::ostream& out, const FemOperators& ops, const Trajectory& t, const SteadySolution& steady);

/// One row per optimizer iteration.
void write_convergence(std::ostream& out, const std::vector<IterationRecord>& log);

}  // namespace cloak
