#include <doctest.h>

#include "cloak/commands.hpp"
#include "cloak/export.hpp"
#include "support/tempdir.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cloak;
using cloak::testing::TempDir;

namespace {

RunConfig coarse(const std::string& out) {
    RunConfig c;
    c.set("layout.mesh_size", "0.1");
    c.set("weights.beta", "1e-4");
    c.set("weights.beta_g", "1e-5");
    c.set("time.horizon", "1");
    c.set("time.steps", "8");
    c.set("rom.samples", "8");
    c.set("rom.tolerance", "1e-10");
    c.set("timing.repeats", "1");
    c.set("output.dir", out);
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

CsvFields read_csv_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return read_csv(in);
}

std::vector<std::map<std::string, std::string>> read_report(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream h(line);
        std::string cell;
        while (std::getline(h, cell, ',')) header.push_back(cell);
    }
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        std::map<std::string, std::string> row;
        std::stringstream r(line);
        std::string cell;
        for (const auto& name : header) {
            if (!std::getline(r, cell, ',')) cell.clear();
            row[name] = cell;
        }
        rows.push_back(row);
    }
    return rows;
}

// Squared L2 norm of a P1 field over the selected elements, edge-midpoint rule.
double quadrature(const Mesh& mesh, const Vector& f, Region only, bool filter) {
    double sum = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        if (filter && mesh.regions[e] != only) continue;
        const auto& t = mesh.triangles[e];
        double local = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double m = 0.5 * (f[t[a]] + f[t[(a + 1) % 3]]);
            local += m * m;
        }
        sum += mesh.signed_area(e) / 3.0 * local;
    }
    return sum;
}

double recomputed_error(const Mesh& mesh, const Vector& fom, const Vector& rom, bool control) {
    const double num = quadrature(mesh, rom - fom, Region::Control, control);
    const double den = quadrature(mesh, fom, Region::Control, control);
    return std::sqrt(num / den);
}

/// One steady archive shared by the online and sweep tests.
struct SteadyArchive {
    TempDir dir;
    RunConfig cfg;
    CommandOutcome offline;

    SteadyArchive() : cfg(coarse(dir.str())) {
        std::ostringstream log;
        offline = offline_command(cfg, log);
    }
};

SteadyArchive& archive() {
    static SteadyArchive a;
    return a;
}

}  // namespace

TEST_CASE("solve-steady writes fields, meshes, report and a manifest") {
    TempDir dir;
    const RunConfig cfg = coarse(dir.str());
    std::ostringstream log;
    const CommandOutcome out = solve_steady_command(cfg, log);
    CHECK(out.directory == dir / "steady");
    for (const char* f : {"fields.csv", "reference.csv", "mesh_ocp.txt", "mesh_unperturbed.txt", "report.csv",
                          "manifest.txt", "config.txt"})
        CHECK(std::filesystem::exists(out.directory + "/" + f));

    const Manifest m = Manifest::load(out.directory + "/manifest.txt");
    CHECK(m.get("command") == "solve-steady");
    CHECK(m.get("config_hash") == cfg.hash());
    CHECK(load_config(out.directory + "/config.txt").hash() == cfg.hash());

    REQUIRE(out.reports.size() == 1);
    CHECK(out.reports[0].efficiency > 0.0);
    CHECK(out.reports[0].efficiency <= 1.0);
    const auto rows = read_report(out.directory + "/report.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("regime") == "steady");
    CHECK(parse_double(rows[0].at("efficiency"), "efficiency") == out.reports[0].efficiency);
}

TEST_CASE("solve-steady without an obstacle exports a vanishing control") {
    TempDir dir;
    RunConfig cfg = coarse(dir.str());
    cfg.set("layout.obstacle", "false");
    std::ostringstream log;
    const CommandOutcome out = solve_steady_command(cfg, log);
    const CsvFields f = read_csv_file(out.directory + "/fields.csv");
    const double z = f.fields["z"].cwiseAbs().maxCoeff();
    CHECK(f.fields["u"].cwiseAbs().maxCoeff() <= 1e-10 * z);
}

TEST_CASE("solve-transient exports the requested frames deterministically") {
    TempDir a, b;
    RunConfig cfg = coarse(a.str());
    cfg.set("output.frames", "0,3,7:20:4");
    cfg.set("output.format", "both");
    std::ostringstream log;
    const CommandOutcome first = solve_transient_command(cfg, log);
    cfg.set("output.dir", b.str());
    const CommandOutcome second = solve_transient_command(cfg, log);

    // frames {0, 3, 7, 11, 15, 19} intersected with [0, 8]
    int csv_frames = 0, vtk_frames = 0;
    for (const auto& entry : std::filesystem::directory_iterator(first.directory)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("frame_", 0) != 0 || name.rfind("frame_reference_", 0) == 0) continue;
        if (entry.path().extension() == ".csv") ++csv_frames;
        if (entry.path().extension() == ".vtk") ++vtk_frames;
    }
    CHECK(csv_frames == 3);
    CHECK(vtk_frames == 3);
    for (const char* f : {"frame_0000.csv", "frame_0003.csv", "frame_0007.csv", "frame_reference_0003.csv",
                          "timeline.csv", "convergence.csv"})
        CHECK(slurp(first.directory + "/" + f) == slurp(second.directory + "/" + f));
    CHECK(Manifest::load(first.directory + "/manifest.txt").get("frames") == "3");
}

TEST_CASE("online after offline reports small errors that a post-hoc recomputation confirms") {
    SteadyArchive& arch = archive();
    CHECK(std::filesystem::exists(arch.offline.directory + "/operators.txt"));
    CHECK(std::filesystem::exists(arch.offline.directory + "/snapshots/manifest.txt"));
    const Manifest am = Manifest::load(arch.offline.directory + "/manifest.txt");
    CHECK(am.get("command") == "offline");
    CHECK(am.get("mode") == "steady");

    TempDir dir;
    RunConfig cfg = arch.cfg;
    cfg.set("rom.archive", arch.offline.directory);
    cfg.set("output.dir", dir.str());
    cfg.set("params.diffusivity", "2.2");
    cfg.set("params.intensity", "4000");
    std::ostringstream log;
    const CommandOutcome out = online_command(cfg, log);
    REQUIRE(out.reports.size() == 1);
    const CloakReport& r = out.reports[0];
    REQUIRE(r.rom_errors.has_value());
    CHECK(r.rom_errors->max() <= 1e-4);
    CHECK(r.efficiency > 0.0);
    CHECK(r.timing.rom_seconds > 0.0);
    CHECK(r.timing.fom_seconds > 0.0);

    const Mesh ocp = load_mesh(out.directory + "/mesh_ocp.txt");
    const Mesh full = load_mesh(out.directory + "/mesh_unperturbed.txt");
    const CsvFields fom = read_csv_file(out.directory + "/fom_fields.csv");
    const CsvFields rom = read_csv_file(out.directory + "/rom_fields.csv");
    const CsvFields fom_ref = read_csv_file(out.directory + "/fom_reference.csv");
    const CsvFields rom_ref = read_csv_file(out.directory + "/rom_reference.csv");
    const double ez = recomputed_error(full, fom_ref.fields["z"], rom_ref.fields["z"], false);
    const double eq = recomputed_error(ocp, fom.fields["q"], rom.fields["q"], false);
    const double ep = recomputed_error(ocp, fom.fields["p"], rom.fields["p"], false);
    const double eu = recomputed_error(ocp, fom.fields["u"], rom.fields["u"], true);
    CHECK(ez == doctest::Approx(r.rom_errors->z).epsilon(1e-6));
    CHECK(eq == doctest::Approx(r.rom_errors->q).epsilon(1e-6));
    CHECK(ep == doctest::Approx(r.rom_errors->p).epsilon(1e-6));
    CHECK(eu == doctest::Approx(r.rom_errors->u).epsilon(1e-6));

    const auto rows = read_report(out.directory + "/report.csv");
    REQUIRE(rows.size() == 1);
    CHECK(parse_double(rows[0].at("err_q"), "err_q") == r.rom_errors->q);
    CHECK_FALSE(rows[0].at("speedup").empty());
}

TEST_CASE("online errors are actionable") {
    SteadyArchive& arch = archive();
    TempDir dir;
    std::ostringstream log;

    RunConfig missing = coarse(dir.str());
    try {
        online_command(missing, log);
        FAIL("expected an error for a missing archive");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("offline") != std::string::npos);
    }

    RunConfig other_mesh = arch.cfg;
    other_mesh.set("rom.archive", arch.offline.directory);
    other_mesh.set("output.dir", dir.str());
    other_mesh.set("layout.mesh_size", "0.125");
    CHECK_THROWS_AS(online_command(other_mesh, log), ConfigError);

    RunConfig other_weights = arch.cfg;
    other_weights.set("rom.archive", arch.offline.directory);
    other_weights.set("output.dir", dir.str());
    other_weights.set("weights.beta", "1e-3");
    try {
        online_command(other_weights, log);
        FAIL("expected a weights mismatch");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "weights");
    }
}

TEST_CASE("beta sweep tracking error does not increase as beta decreases") {
    TempDir dir;
    RunConfig cfg = coarse(dir.str());
    cfg.set("sweep.parameter", "beta");
    cfg.set("sweep.values", "1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8");
    std::ostringstream log;
    const CommandOutcome out = sweep_command(cfg, log);
    const auto rows = read_report(out.directory + "/report.csv");
    REQUIRE(rows.size() == 6);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& row : rows) {
        const double mte = parse_double(row.at("mte_optimal"), "mte_optimal");
        CHECK(mte <= prev * (1.0 + 1e-12));
        prev = mte;
    }
}

TEST_CASE("reduced-order sweep over diffusivity") {
    SteadyArchive& arch = archive();
    TempDir dir;
    RunConfig cfg = arch.cfg;
    cfg.set("rom.archive", arch.offline.directory);
    cfg.set("output.dir", dir.str());
    cfg.set("sweep.model", "rom");
    cfg.set("sweep.parameter", "diffusivity");
    cfg.set("sweep.values", "1.5, 3, 4.5");
    std::ostringstream log;
    const CommandOutcome out = sweep_command(cfg, log);
    CHECK(out.reports.size() == 3);
    for (const auto& r : out.reports) CHECK(r.timing.rom_seconds > 0.0);

    cfg.set("sweep.parameter", "beta");
    CHECK_THROWS_AS(sweep_command(cfg, log), ConfigError);
    cfg.set("sweep.parameter", "diffusivity");
    cfg.set("sweep.values", "");
    CHECK_THROWS_AS(sweep_command(cfg, log), ConfigError);
}

TEST_CASE("transient offline and online") {
    TempDir dir;
    RunConfig cfg = coarse(dir.str());
    cfg.set("rom.mode", "transient");
    cfg.set("rom.samples", "4");
    std::ostringstream log;
    const CommandOutcome off = offline_command(cfg, log);
    CHECK_FALSE(std::filesystem::exists(off.directory + "/snapshots"));
    const CommandOutcome on = online_command(cfg, log);
    REQUIRE(on.reports.size() == 1);
    REQUIRE(on.reports[0].rom_errors.has_value());
    CHECK(on.reports[0].regime == "transient");
    CHECK(on.reports[0].rom_errors->max() <= 1e-2);
    CHECK(std::filesystem::exists(on.directory + "/rom_timeline.csv"));
    CHECK(std::filesystem::exists(on.directory + "/rom_frame_0008.csv"));
}

TEST_CASE("unknown commands are rejected") {
    std::ostringstream log;
    CHECK_THROWS_AS(run_command("explode", RunConfig{}, log), ValidationError);
    CHECK(command_names().size() == 5);
}
