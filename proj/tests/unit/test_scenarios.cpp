#include <doctest.h>

#include "cloak/io.hpp"
#include "cloak/scenarios.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace cloak;
using cloak::testing::tiny_layout;

namespace {

const Discretization& tiny() {
    static const Discretization d = discretize(tiny_layout());
    return d;
}

const ControlWeights moderate{1e-4, 1e-5};

bool same_params(const ScenarioParams& a, const ScenarioParams& b) {
    return a.diffusivity == b.diffusivity && a.intensity == b.intensity && a.obstacle_temperature == b.obstacle_temperature;
}

}  // namespace

TEST_CASE("single lhs sample lies in the box") {
    const ParameterBox box;
    const LhsSample s = lhs_sample(box, 1, 42);
    REQUIRE(s.points.size() == 1);
    CHECK(box.contains(s.points[0]));
    CHECK(s.warnings.empty());
}

TEST_CASE("lhs puts exactly one sample in every stratum") {
    const ParameterBox box;
    for (std::uint64_t seed : {1ull, 2ull, 99ull, 123456789ull}) {
        for (int n : {5, 17, 50}) {
            const LhsSample s = lhs_sample(box, n, seed);
            const auto strata = lhs_strata(box, s.points);
            for (int d = 0; d < 3; ++d) {
                std::vector<int> occ;
                for (const auto& st : strata) occ.push_back(st[d]);
                std::sort(occ.begin(), occ.end());
                for (int i = 0; i < n; ++i) CHECK(occ[i] == i);
            }
            for (const auto& p : s.points) CHECK(box.contains(p));
        }
    }
}

TEST_CASE("lhs is reproducible per seed") {
    const ParameterBox box;
    const auto a = lhs_sample(box, 10, 7).points;
    const auto b = lhs_sample(box, 10, 7).points;
    const auto c = lhs_sample(box, 10, 8).points;
    bool all_same = true, any_diff = false;
    for (int i = 0; i < 10; ++i) {
        all_same = all_same && same_params(a[i], b[i]);
        any_diff = any_diff || !same_params(a[i], c[i]);
    }
    CHECK(all_same);
    CHECK(any_diff);
}

TEST_CASE("degenerate box dimension is pinned with a warning") {
    ParameterBox box;
    box.obstacle_temperature = {75.0, 75.0};
    const LhsSample s = lhs_sample(box, 6, 3);
    REQUIRE(s.warnings.size() == 1);
    CHECK(s.warnings[0].find("obstacle_temperature") != std::string::npos);
    for (const auto& p : s.points) CHECK(p.obstacle_temperature == 75.0);
}

TEST_CASE("invalid sampling requests are rejected") {
    ParameterBox box;
    CHECK_THROWS_AS(lhs_sample(box, 0, 1), ValidationError);
    box.intensity = {10.0, 1.0};
    CHECK_THROWS_WITH_AS(lhs_sample(box, 3, 1), doctest::Contains("box.intensity"), ValidationError);
    box = ParameterBox{};
    box.diffusivity = {0.0, 1.0};
    CHECK_THROWS_AS(box.validate(), ValidationError);
}

TEST_CASE("steady snapshots satisfy the optimality system") {
    const auto samples = lhs_sample(ParameterBox{}, 6, 11).points;
    SnapshotOptions opt;
    opt.weights = moderate;
    const SnapshotSet set = generate_snapshots(tiny(), samples, opt, 11, "cfg");
    REQUIRE(set.records.size() == 6);
    CHECK(set.succeeded() == 6);
    CHECK(set.provenance.mesh_hash == mesh_digest(tiny()));
    CHECK(set.provenance.seed == 11);
    for (const auto& r : set.records) {
        CHECK(optimality_residual(tiny().ops, moderate, r.steady) <= 1e-8 * (tiny().ops.B.transpose() * r.steady.p).norm());
        CHECK(state_residual(tiny().ops, r.params, r.steady) <= 1e-9 * tiny().ops.state_load(r.params).norm());
        CHECK_FALSE(r.transient.has_value());
    }
}

TEST_CASE("one transient snapshot equals a direct solve") {
    const ScenarioParams p{3.5, 1e4, 0.0};
    SnapshotOptions opt;
    opt.mode = SnapshotMode::Transient;
    opt.weights = moderate;
    opt.grid = {1.0, 10};
    const SnapshotSet set = generate_snapshots(tiny(), {p}, opt);
    const TransientResult direct = solve_transient_ocp(tiny().ops, p, moderate, opt.grid, opt.optimizer);
    REQUIRE(set.records[0].transient.has_value());
    const Trajectory& t = set.records[0].transient->trajectory;
    CHECK(t.u == direct.trajectory.u);
    CHECK(t.q == direct.trajectory.q);
    CHECK(t.p == direct.trajectory.p);
    CHECK(t.z == direct.trajectory.z);
    CHECK(set.records[0].transient->cost == direct.cost);
}

TEST_CASE("parallel and serial snapshot generation agree bitwise") {
    const auto samples = lhs_sample(ParameterBox{}, 7, 5).points;
    SnapshotOptions opt;
    opt.mode = SnapshotMode::Transient;
    opt.weights = moderate;
    opt.grid = {0.5, 6};
    const SnapshotSet serial = generate_snapshots(tiny(), samples, opt);
    opt.threads = 3;
    const SnapshotSet parallel = generate_snapshots(tiny(), samples, opt);
    for (int i = 0; i < 7; ++i) {
        CHECK(parallel.records[i].index == i);
        CHECK(parallel.records[i].transient->trajectory.u == serial.records[i].transient->trajectory.u);
        CHECK(parallel.records[i].steady.q == serial.records[i].steady.q);
    }
}

TEST_CASE("solutions do not depend on the sample order") {
    auto samples = lhs_sample(ParameterBox{}, 5, 9).points;
    SnapshotOptions opt;
    opt.weights = moderate;
    const SnapshotSet a = generate_snapshots(tiny(), samples, opt);
    std::reverse(samples.begin(), samples.end());
    const SnapshotSet b = generate_snapshots(tiny(), samples, opt);
    for (const auto& ra : a.records) {
        const auto it = std::find_if(b.records.begin(), b.records.end(),
                                     [&](const SnapshotRecord& rb) { return same_params(ra.params, rb.params); });
        REQUIRE(it != b.records.end());
        CHECK(it->steady.u == ra.steady.u);
    }
}

TEST_CASE("failed solves are recorded and only total failure throws") {
    SnapshotOptions opt;
    opt.weights = moderate;
    const ScenarioParams bad{-1.0, 1e3, 0.0};
    const SnapshotSet set = generate_snapshots(tiny(), {ScenarioParams{}, bad}, opt);
    CHECK(set.succeeded() == 1);
    CHECK_FALSE(set.records[1].ok);
    CHECK(set.records[1].error.find("diffusivity") != std::string::npos);
    CHECK_THROWS_AS(generate_snapshots(tiny(), {bad, bad}, opt), SolverError);
    CHECK_THROWS_AS(generate_snapshots(tiny(), {}, opt), ValidationError);
}

TEST_CASE("snapshot sets survive a text round trip") {
    cloak::testing::TempDir tmp;
    SnapshotOptions opt;
    opt.mode = SnapshotMode::Transient;
    opt.weights = moderate;
    opt.grid = {0.5, 4};
    const ScenarioParams bad{-1.0, 1e3, 0.0};
    const SnapshotSet set = generate_snapshots(tiny(), {ScenarioParams{2.5, 3e3, 10.0}, bad}, opt, 77, "abc");
    save_snapshot_set(set, tmp.str());
    const SnapshotSet back = load_snapshot_set(tmp.str());
    CHECK(back.provenance.seed == 77);
    CHECK(back.provenance.config_hash == "abc");
    CHECK(back.provenance.mesh_hash == set.provenance.mesh_hash);
    CHECK(back.provenance.mode == SnapshotMode::Transient);
    CHECK(back.provenance.grid.steps == 4);
    REQUIRE(back.records.size() == 2);
    const auto& a = set.records[0];
    const auto& b = back.records[0];
    CHECK(same_params(a.params, b.params));
    CHECK(b.steady.u == a.steady.u);
    CHECK(b.steady.cost == a.steady.cost);
    CHECK(b.transient->trajectory.q == a.transient->trajectory.q);
    CHECK(b.transient->trajectory.p == a.transient->trajectory.p);
    CHECK(b.transient->log.size() == a.transient->log.size());
    CHECK(b.transient->log.back().merit == a.transient->log.back().merit);
    CHECK_FALSE(back.records[1].ok);
    CHECK(back.records[1].error == set.records[1].error);
}

TEST_CASE("matrix blocks report the failing line") {
    std::istringstream in("matrix A 2 2\n1,2\n3\n");
    LineReader r(in);
    try {
        read_matrix(r, "A");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::stringstream io;
    Matrix m(2, 3);
    m << 0.1, -1e-300, 3.0, 1.0 / 3.0, 2e10, -0.0;
    write_matrix(io, "M", m);
    LineReader r2(io);
    CHECK(read_matrix(r2, "M") == m);
}
