#include "acceptance/criteria.hpp"
#include "cloak/commands.hpp"
#include "cloak/config.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::string frames;
    std::string format;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Configuration file (key = value lines)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Sampling seed");
    cmd->add_option("--frames", f.frames, "Frames to export: final, all, none, or a list like 0,50,90:100:5");
    cmd->add_option("--format", f.format, "Export format")->check(CLI::IsMember({"csv", "vtk", "both"}));
    cmd->add_option("--set", f.overrides, "Override one key, e.g. --set weights.beta=1e-6");
}

cloak::RunConfig resolve(const CommonFlags& f, const CLI::App* cmd) {
    cloak::RunConfig cfg = f.config.empty() ? cloak::RunConfig{} : cloak::load_config(f.config);
    for (const auto& o : f.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw cloak::ConfigError("--set", "expected key=value, got '" + o + "'");
        cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (!f.out.empty()) cfg.set("output.dir", f.out);
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (!f.frames.empty()) cfg.set("output.frames", f.frames);
    if (!f.format.empty()) cfg.set("output.format", f.format);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-control thermal cloaking with full- and reduced-order models"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::vector<std::pair<std::string, CLI::App*>> commands;
    const std::vector<std::pair<std::string, std::string>> help{
        {"solve-steady", "Solve the steady control problem with the full-order model"},
        {"solve-transient", "Solve the transient control problem with the full-order model"},
        {"offline", "Sample parameters, collect snapshots and build the reduced-order archive"},
        {"online", "Solve the reduced-order model from an archive at the configured parameters"},
        {"sweep", "Run a batch of solves over one parameter and aggregate the report"},
    };
    for (const auto& [name, text] : help) {
        CLI::App* cmd = app.add_subcommand(name, text);
        add_common(cmd, flags);
        commands.emplace_back(name, cmd);
    }
    CLI::App* verify = app.add_subcommand("verify", "Run the acceptance checks");
    std::string criteria;
    bool verbose = false;
    verify->add_option("--criteria", criteria, "Subset to run, e.g. 1,2,5-8");
    verify->add_flag("-v,--verbose", verbose, "Print progress notes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            const auto results = cloak::acceptance::run_acceptance(cloak::acceptance::parse_selection(criteria), {},
                                                                   std::cout, verbose ? &std::clog : nullptr);
            int failed = 0;
            for (const auto& r : results) failed += r.pass ? 0 : 1;
            std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
            return failed == 0 ? 0 : 1;
        }
        for (const auto& [name, cmd] : commands) {
            if (!cmd->parsed()) continue;
            const cloak::RunConfig cfg = resolve(flags, cmd);
            const cloak::CommandOutcome out = cloak::run_command(name, cfg, std::clog);
            std::cout << "artifacts in " << out.directory << " (config " << cfg.hash() << ")\n";
            for (const auto& r : out.reports) {
                std::cout << "efficiency " << r.efficiency << ", MTE " << r.mte_optimal;
                if (r.rom_errors) std::cout << ", max ROM error " << r.rom_errors->max();
                if (r.timing.speedup() > 0.0) std::cout << ", speedup " << r.timing.speedup();
                std::cout << '\n';
            }
            return 0;
        }
    } catch (const cloak::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
