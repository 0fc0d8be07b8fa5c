#include "cloak/export.hpp"

#include "cloak/io.hpp"
#include "cloak/metrics.hpp"

#include <fstream>
#include <sstream>

namespace cloak {

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(item);
    if (!s.empty() && s.back() == ',') out.push_back({});
    return out;
}

void check_fields(const Mesh& mesh, const NodalFields& f) {
    for (std::size_t i = 0; i < f.values.size(); ++i)
        if (f.values[i].size() != mesh.node_count())
            throw ValidationError("export: field '" + f.names[i] + "' has " + std::to_string(f.values[i].size()) +
                                  " values for " + std::to_string(mesh.node_count()) + " nodes");
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

}  // namespace

void NodalFields::add(const std::string& name, Vector v) {
    names.push_back(name);
    values.push_back(std::move(v));
}

const Vector& NodalFields::operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values[i];
    throw ValidationError("no field named '" + name + "'");
}

NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const Vector& z, const Vector& q,
                       const Vector& p, const Vector& u) {
    const FemOperators& ops = disc.ops;
    const RestrictionOperator& r = disc.restriction;
    if (z.size() != ops.reference_size() || q.size() != ops.state_size() || p.size() != ops.state_size() ||
        u.size() != ops.control_size())
        throw ValidationError("export: solution does not match the discretization");
    const int n = disc.meshes.ocp.node_count();
    Vector zn(n), qn(n), pn(n), un = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
        zn[i] = z[r.ocp_to_unperturbed[i]];
        const int dof = r.dof_of_ocp_node[i];
        qn[i] = dof >= 0 ? q[dof] : params.obstacle_temperature;
        pn[i] = dof >= 0 ? p[dof] : 0.0;
    }
    for (int c = 0; c < ops.control_size(); ++c) un[ops.control_nodes[c]] = u[c];
    NodalFields f;
    f.add("z", zn);
    f.add("q", qn);
    f.add("p", pn);
    f.add("u", un);
    f.add("q_minus_z", qn - zn);
    return f;
}

NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const SteadySolution& s) {
    return ocp_fields(disc, params, s.z, s.q, s.p, s.u);
}

NodalFields ocp_fields(const Discretization& disc, const ScenarioParams& params, const Trajectory& t, int frame) {
    if (frame < 0 || frame > t.grid.steps) throw ValidationError("export: frame " + std::to_string(frame) + " is outside the time grid");
    return ocp_fields(disc, params, t.z.col(frame), t.q.col(frame), t.p.col(frame), t.u.col(frame));
}

void write_csv(std::ostream& out, const Mesh& mesh, const NodalFields& f) {
    check_fields(mesh, f);
    out << "node,x,y";
    for (const auto& n : f.names) out << ',' << n;
    out << '\n';
    for (int i = 0; i < mesh.node_count(); ++i) {
        out << i << ',' << format_double(mesh.nodes[i].x) << ',' << format_double(mesh.nodes[i].y);
        for (const auto& v : f.values) out << ',' << format_double(v[i]);
        out << '\n';
    }
}

CsvFields read_csv(std::istream& in) {
    std::string line;
    int line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty CSV", line_no);
    const auto header = split_commas(line);
    if (header.size() < 3 || header[0] != "node" || header[1] != "x" || header[2] != "y")
        throw ParseError("CSV header must start with node,x,y", line_no);
    const std::size_t nf = header.size() - 3;
    std::vector<std::vector<double>> cols(nf);
    CsvFields out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()),
                             line_no);
        if (std::stoi(cells[0]) != static_cast<int>(out.points.size())) throw ParseError("node ids must be consecutive", line_no);
        out.points.push_back({parse_double(cells[1], "x"), parse_double(cells[2], "y")});
        for (std::size_t j = 0; j < nf; ++j) cols[j].push_back(parse_double(cells[3 + j], header[3 + j]));
    }
    for (std::size_t j = 0; j < nf; ++j)
        out.fields.add(header[3 + j], Eigen::Map<const Vector>(cols[j].data(), static_cast<Eigen::Index>(cols[j].size())));
    return out;
}

void write_vtk(std::ostream& out, const Mesh& mesh, const NodalFields& f, const std::string& title) {
    check_fields(mesh, f);
    const int n = mesh.node_count(), m = mesh.element_count();
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << n << " double\n";
    for (const auto& p : mesh.nodes) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
    out << "CELLS " << m << ' ' << 4 * m << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << m << '\n';
    for (int e = 0; e < m; ++e) out << "5\n";
    out << "POINT_DATA " << n << '\n';
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        out << "SCALARS " << f.names[i] << " double 1\nLOOKUP_TABLE default\n";
        for (int k = 0; k < n; ++k) out << format_double(f.values[i][k]) << '\n';
    }
    out << "CELL_DATA " << m << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
    for (Region r : mesh.regions) out << static_cast<int>(r) << '\n';
}

std::vector<std::string> export_fields(const Mesh& mesh, const NodalFields& f, ExportFormat format,
                                       const std::string& stem, const std::string& title) {
    std::vector<std::string> written;
    if (format != ExportFormat::Vtk) {
        const std::string path = stem + ".csv";
        auto out = open_output(path);
        write_csv(out, mesh, f);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        written.push_back(path);
    }
    if (format != ExportFormat::Csv) {
        const std::string path = stem + ".vtk";
        auto out = open_output(path);
        write_vtk(out, mesh, f, title);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        written.push_back(path);
    }
    return written;
}

void write_timeline(std::ostream& out, const FemOperators& ops, const Trajectory& t, const SteadySolution& steady) {
    const auto dq = steady_distance(t.q, steady.q, ops.M_tilde);
    const auto dp = steady_distance(t.p, steady.p, ops.M_tilde);
    const auto du = steady_distance(t.u, steady.u, ops.M_u);
    out << "k,t,mte,q_norm,p_norm,u_norm,q_to_steady,p_to_steady,u_to_steady\n";
    for (int k = 0; k <= t.grid.steps; ++k) {
        out << k << ',' << format_double(t.grid.time(k)) << ','
            << format_double(mean_tracking_error(ops, t.q.col(k), t.z.col(k))) << ','
            << format_double(l2_norm(t.q.col(k), ops.M_tilde)) << ',' << format_double(l2_norm(t.p.col(k), ops.M_tilde))
            << ',' << format_double(l2_norm(t.u.col(k), ops.M_u)) << ',' << format_double(dq[k]) << ','
            << format_double(dp[k]) << ',' << format_double(du[k]) << '\n';
    }
}

void write_convergence(std::ostream& out, const std::vector<IterationRecord>& log) {
    out << "iter,cost,merit,grad_norm,step,backtracks\n";
    for (const auto& r : log)
        out << r.iter << ',' << format_double(r.cost) << ',' << format_double(r.merit) << ','
            << format_double(r.grad_norm) << ',' << format_double(r.step) << ',' << r.backtracks << '\n';
}

}  // namespace cloak
