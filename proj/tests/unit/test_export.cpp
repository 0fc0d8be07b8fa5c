#include <doctest.h>

#include "cloak/export.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

#include <fstream>
#include <random>
#include <sstream>

using namespace cloak;
using cloak::testing::TempDir;
using cloak::testing::tiny_layout;

namespace {

const Discretization& tiny() {
    static const Discretization d = discretize(tiny_layout());
    return d;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("csv export reads back to identical nodal values") {
    const Discretization& d = tiny();
    const ScenarioParams prm{2.5, 7e3, 30.0};
    const SteadySolution s = solve_steady(d.ops, prm, {1e-4, 1e-5});
    NodalFields f = ocp_fields(d, prm, s);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector noisy(d.meshes.ocp.node_count());
    for (auto& v : noisy) v = u(rng) * 1e-300 + u(rng) * 1e17;
    f.add("noisy", noisy);

    std::stringstream io;
    write_csv(io, d.meshes.ocp, f);
    const CsvFields back = read_csv(io);
    REQUIRE(back.fields.names == f.names);
    REQUIRE(back.points.size() == d.meshes.ocp.nodes.size());
    for (std::size_t i = 0; i < back.points.size(); ++i) CHECK(back.points[i] == d.meshes.ocp.nodes[i]);
    for (std::size_t j = 0; j < f.names.size(); ++j) CHECK((back.fields.values[j].array() == f.values[j].array()).all());
}

TEST_CASE("nodal fields on the OCP mesh") {
    const Discretization& d = tiny();
    const ScenarioParams prm{3.5, 1e4, 42.0};
    const SteadySolution s = solve_steady(d.ops, prm, {1e-4, 1e-5});
    const NodalFields f = ocp_fields(d, prm, s);
    const auto& r = d.restriction;
    for (int n : r.dirichlet_nodes) {
        CHECK(f["q"][n] == 42.0);
        CHECK(f["p"][n] == 0.0);
    }
    for (int i = 0; i < r.free_count(); ++i) CHECK(f["q"][r.free_nodes[i]] == s.q[i]);
    for (int c = 0; c < d.ops.control_size(); ++c) CHECK(f["u"][d.ops.control_nodes[c]] == s.u[c]);
    CHECK((f["q_minus_z"] - (f["q"] - f["z"])).norm() == 0.0);
    CHECK_THROWS_AS(f["missing"], ValidationError);
}

TEST_CASE("vtk sections appear in order") {
    const Discretization& d = tiny();
    const SteadySolution s = solve_steady(d.ops, ScenarioParams{}, {1e-4, 1e-5});
    std::ostringstream out;
    write_vtk(out, d.meshes.ocp, ocp_fields(d, ScenarioParams{}, s), "test");
    const std::string v = out.str();
    CHECK(v.rfind("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET UNSTRUCTURED_GRID\n", 0) == 0);
    const auto points = v.find("\nPOINTS " + std::to_string(d.meshes.ocp.node_count()) + " double\n");
    const auto cells = v.find("\nCELLS " + std::to_string(d.meshes.ocp.element_count()));
    const auto types = v.find("\nCELL_TYPES ");
    const auto pdata = v.find("\nPOINT_DATA " + std::to_string(d.meshes.ocp.node_count()) + "\n");
    REQUIRE(points != std::string::npos);
    REQUIRE(cells != std::string::npos);
    REQUIRE(types != std::string::npos);
    REQUIRE(pdata != std::string::npos);
    CHECK(points < cells);
    CHECK(cells < types);
    CHECK(types < pdata);
    for (const char* name : {"z", "q", "p", "u", "q_minus_z"})
        CHECK(v.find(std::string("SCALARS ") + name + " double 1") != std::string::npos);
}

TEST_CASE("export writes the requested formats") {
    const Discretization& d = tiny();
    const SteadySolution s = solve_steady(d.ops, ScenarioParams{}, {1e-4, 1e-5});
    const NodalFields f = ocp_fields(d, ScenarioParams{}, s);
    TempDir dir;
    CHECK(export_fields(d.meshes.ocp, f, ExportFormat::Csv, dir / "a").size() == 1);
    CHECK(export_fields(d.meshes.ocp, f, ExportFormat::Vtk, dir / "b").size() == 1);
    const auto both = export_fields(d.meshes.ocp, f, ExportFormat::Both, dir / "c");
    REQUIRE(both.size() == 2);
    CHECK(slurp(both[0]) == slurp(dir / "a.csv"));
    CHECK(slurp(both[1]).size() > 0);
    CHECK_THROWS_AS(export_fields(d.meshes.ocp, f, ExportFormat::Csv, dir / "missing/dir/x"), std::runtime_error);
}

TEST_CASE("field size mismatches are rejected") {
    const Discretization& d = tiny();
    NodalFields f;
    f.add("short", Vector::Zero(3));
    std::ostringstream out;
    CHECK_THROWS_AS(write_csv(out, d.meshes.ocp, f), ValidationError);
    CHECK_THROWS_AS(write_vtk(out, d.meshes.ocp, f, "x"), ValidationError);
    CHECK_THROWS_AS(ocp_fields(d, ScenarioParams{}, Vector::Zero(2), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)),
                    ValidationError);
}

TEST_CASE("malformed csv input") {
    std::istringstream bad_header("id,x,y\n");
    CHECK_THROWS_AS(read_csv(bad_header), ParseError);
    std::istringstream short_row("node,x,y,a\n0,1,2,3\n1,1,2\n");
    try {
        read_csv(short_row);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("timeline and convergence logs have one row per entry") {
    const Discretization& d = tiny();
    const TimeGrid g{1.0, 6};
    const TransientResult r = solve_transient_ocp(d.ops, ScenarioParams{}, {1e-4, 1e-5}, g);
    std::ostringstream t, c;
    write_timeline(t, d.ops, r.trajectory, r.steady);
    write_convergence(c, r.log);
    auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    CHECK(lines(t.str()) == g.steps + 2);
    CHECK(lines(c.str()) == static_cast<long>(r.log.size()) + 1);
}
