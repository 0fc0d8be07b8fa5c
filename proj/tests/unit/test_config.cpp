#include <doctest.h>

#include "cloak/config.hpp"

#include <sstream>

using namespace cloak;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

template <class F>
std::string config_error_key(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
    const RunConfig c = parse("# nothing here\n\n");
    CHECK(c.weights.beta == 1e-7);
    CHECK(c.weights.beta_g == 1e-8);
    CHECK(c.grid.steps == 100);
    CHECK(c.grid.horizon == 5.0);
    CHECK(c.params.diffusivity == 3.5);
    CHECK(c.samples == 50);
    CHECK(c.optimizer.tol == 1e-8);
    CHECK(c.optimizer.max_iter == 50);
    CHECK(c.pod_tolerance == 1e-7);
    CHECK(c.archive_dir() == "out/rom");
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("values are parsed into their fields") {
    const RunConfig c = parse(
        "layout.kind = discs\n"
        "weights.beta = 1e-6   # comment\n"
        "box.intensity = 100, 200\n"
        "sweep.values = 1e-3, 1e-4,1e-5\n"
        "solver.terminal = natural\n"
        "output.format = both\n"
        "seed = 18446744073709551615\n");
    CHECK(c.layout == LayoutKind::Discs);
    CHECK(c.weights.beta == 1e-6);
    CHECK(c.box.intensity.lo == 100.0);
    CHECK(c.box.intensity.hi == 200.0);
    CHECK(c.sweep_values == std::vector<double>{1e-3, 1e-4, 1e-5});
    CHECK(c.terminal == TerminalCondition::Natural);
    CHECK(c.format == ExportFormat::Both);
    CHECK(c.seed == 18446744073709551615ull);
}

TEST_CASE("hash is stable under key reordering and ignores the output directory") {
    const RunConfig a = parse("weights.beta = 1e-6\ntime.steps = 20\nseed = 5\n");
    const RunConfig b = parse("seed = 5\n\ntime.steps = 20\nweights.beta = 1e-6\n");
    CHECK(a.hash() == b.hash());
    const RunConfig c = parse("seed = 5\ntime.steps = 20\nweights.beta = 1e-6\noutput.dir = elsewhere\n");
    CHECK(a.hash() == c.hash());
    const RunConfig d = parse("seed = 6\ntime.steps = 20\nweights.beta = 1e-6\n");
    CHECK(a.hash() != d.hash());
}

TEST_CASE("written config reads back to the same settings") {
    RunConfig c;
    c.set("weights.beta", "3e-5");
    c.set("box.diffusivity", "2, 4");
    c.set("output.frames", "0:10:2,50");
    c.set("rom.mode", "transient");
    std::ostringstream out;
    write_config(out, c);
    const RunConfig back = parse(out.str());
    CHECK(back.to_manifest().entries() == c.to_manifest().entries());
    CHECK(back.hash() == c.hash());
}

TEST_CASE("errors name the offending key and line") {
    CHECK(config_error_key([] { parse("weights.betta = 1\n"); }) == "weights.betta");
    CHECK(config_error_key([] { parse("\n\nweights.beta = abc\n"); }) == "weights.beta");
    CHECK(config_error_key([] { parse("time.steps = 1.5\n"); }) == "time.steps");
    CHECK(config_error_key([] { parse("layout.kind = hexagon\n"); }) == "layout.kind");
    CHECK(config_error_key([] { parse("box.intensity = 5\n"); }) == "box.intensity");
    CHECK(config_error_key([] { parse("seed = 1\nseed = 2\n"); }) == "seed");
    CHECK(config_error_key([] { parse("rom.balance = maybe\n"); }) == "rom.balance");
    CHECK(config_error_key([] { parse("output.frames = 1:x:2\n"); }) == "output.frames");
    CHECK(config_error_key([] { parse("just some words\n"); }) == "line 1");
    try {
        parse("\n\nweights.beta = abc\n");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("cross-field validation") {
    auto key = [](const std::string& text) {
        return config_error_key([&] { parse(text).validate(); });
    };
    CHECK(key("weights.beta = 0\n") == "weights");
    CHECK(key("time.steps = 0\n") == "time");
    CHECK(key("box.diffusivity = 5, 1\n") == "box");
    CHECK(key("layout.kind = offset\n") == "layout.polygon");
    CHECK(key("solver.armijo.contraction = 1\n") == "solver.armijo.contraction");
    CHECK(key("rom.samples = 0\n") == "rom.samples");
    CHECK(key("timing.repeats = 0\n") == "timing.repeats");
}

TEST_CASE("frame selection") {
    CHECK(select_frames("final", 100) == std::vector<int>{100});
    CHECK(select_frames("none", 100).empty());
    CHECK(select_frames("all", 3) == std::vector<int>{0, 1, 2, 3});
    CHECK(select_frames("0, 5, 200", 100) == std::vector<int>{0, 5});
    CHECK(select_frames("90:100:5,0", 100) == std::vector<int>{0, 90, 95, 100});
    CHECK(select_frames("5,5,5", 10) == std::vector<int>{5});
    CHECK(select_frames("-1,2", 10) == std::vector<int>{2});
    CHECK_THROWS_AS(select_frames("1:5:0", 10), ValidationError);
    CHECK_THROWS_AS(select_frames("a", 10), ValidationError);
}

TEST_CASE("layout selection") {
    RunConfig c;
    c.set("layout.obstacle", "false");
    CHECK(std::holds_alternative<NoObstacle>(c.layout_spec().obstacle));
    c.set("layout.kind", "discs");
    c.set("layout.obstacle", "true");
    CHECK(std::holds_alternative<DiscRing>(c.layout_spec().cloak));
}
