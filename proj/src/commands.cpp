#include "cloak/commands.hpp"

#include "cloak/export.hpp"
#include "cloak/rom.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace cloak {

namespace {

constexpr const char* kToolVersion = "cloak 1.0";

std::string frame_stem(const std::string& dir, const std::string& prefix, int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", k);
    return dir + "/" + prefix + "_" + buf;
}

template <class Write>
std::string write_file(const std::string& path, Write&& write) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write(out);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
    return path;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from) { to.insert(to.end(), from.begin(), from.end()); }

/// Manifest entries identifying the producing command, plus config.txt next to it.
Manifest run_manifest(const std::string& command, const RunConfig& cfg, const std::string& dir, CommandOutcome& out) {
    Manifest m;
    m.set("command", command);
    m.set("tool", kToolVersion);
    m.set("config_hash", cfg.hash());
    m.set("rerun", "cloak " + command + " --config " + dir + "/config.txt");
    const Manifest settings = cfg.to_manifest();
    for (const auto& [k, v] : settings.entries()) m.set("config." + k, v);
    out.files.push_back(write_file(dir + "/config.txt", [&](std::ostream& o) { write_config(o, cfg); }));
    return m;
}

void finish_manifest(Manifest m, const std::string& dir, CommandOutcome& out) {
    for (std::size_t i = 0; i < out.files.size(); ++i) m.set("file." + std::to_string(i), out.files[i]);
    m.set("warnings", static_cast<std::int64_t>(out.warnings.size()));
    for (std::size_t i = 0; i < out.warnings.size(); ++i) m.set("warning." + std::to_string(i), out.warnings[i]);
    m.save(dir + "/manifest.txt");
}

std::string prepare(const RunConfig& cfg, const std::string& sub) {
    cfg.validate();
    const std::string dir = cfg.out + "/" + sub;
    ensure_directory(dir);
    return dir;
}

Discretization build(const RunConfig& cfg, std::ostream& log) {
    Discretization d = discretize(cfg.layout_spec());
    log << "mesh: " << d.ops.reference_size() << " nodes, " << d.ops.state_size() << " state dofs, "
        << d.ops.control_size() << " control dofs\n";
    return d;
}

void export_meshes(const Discretization& d, const std::string& dir, CommandOutcome& out) {
    save_mesh(d.meshes.ocp, dir + "/mesh_ocp.txt");
    save_mesh(d.meshes.unperturbed, dir + "/mesh_unperturbed.txt");
    out.files.push_back(dir + "/mesh_ocp.txt");
    out.files.push_back(dir + "/mesh_unperturbed.txt");
}

void export_reference(const Discretization& d, const Vector& z, ExportFormat f, const std::string& stem,
                      CommandOutcome& out) {
    NodalFields ref;
    ref.add("z", z);
    append(out.files, export_fields(d.meshes.unperturbed, ref, f, stem, "reference field"));
}

void export_trajectory(const Discretization& d, const ScenarioParams& params, const Trajectory& t,
                       const std::vector<int>& frames, ExportFormat f, const std::string& dir, const std::string& prefix,
                       CommandOutcome& out) {
    for (int k : frames) {
        append(out.files, export_fields(d.meshes.ocp, ocp_fields(d, params, t, k), f, frame_stem(dir, prefix, k),
                                        prefix + " t=" + format_double(t.grid.time(k))));
        export_reference(d, t.z.col(k), f, frame_stem(dir, prefix + "_reference", k), out);
    }
}

std::string write_report(const std::string& dir, const std::vector<CloakReport>& reports) {
    return write_file(dir + "/report.csv", [&](std::ostream& o) { write_report_csv(o, reports); });
}

void note(CommandOutcome& out, std::ostream& log, const std::string& w) {
    if (w.empty()) return;
    out.warnings.push_back(w);
    log << "warning: " << w << '\n';
}

void log_report(std::ostream& log, const CloakReport& r) {
    log << "MTE uncontrolled " << r.mte_uncontrolled << ", optimal " << r.mte_optimal << ", efficiency " << r.efficiency
        << '\n';
    if (r.rom_errors)
        log << "ROM relative errors z " << r.rom_errors->z << " q " << r.rom_errors->q << " p " << r.rom_errors->p
            << " u " << r.rom_errors->u << '\n';
    if (r.timing.fom_seconds > 0.0) log << "FOM solve " << r.timing.fom_seconds << " s\n";
    if (r.timing.rom_seconds > 0.0)
        log << "ROM solve " << r.timing.rom_seconds << " s, speedup " << r.timing.speedup() << "\n";
}

double timed(const std::function<void()>& run) {
    const auto start = std::chrono::steady_clock::now();
    run();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Archive {
    RomOperators rom;
    Manifest manifest;
    SnapshotMode mode = SnapshotMode::Steady;
};

Archive open_archive(const RunConfig& cfg, const Discretization& d, std::ostream& log) {
    Archive a;
    a.rom = load_rom(cfg.archive_dir(), &a.manifest);
    if (a.manifest.get("mesh_hash") != mesh_digest(d))
        throw ConfigError("layout", "the archive in '" + cfg.archive_dir() +
                                        "' was built on a different mesh; run offline with this configuration first");
    if (a.rom.weights.beta != cfg.weights.beta || a.rom.weights.beta_g != cfg.weights.beta_g)
        throw ConfigError("weights", "the archive was built for beta = " + format_double(a.rom.weights.beta) +
                                         ", beta_g = " + format_double(a.rom.weights.beta_g) +
                                         "; use the same weights or run offline again");
    a.mode = a.manifest.has("mode") ? parse_snapshot_mode(a.manifest.get("mode"))
                                    : (a.rom.Mq.size() ? SnapshotMode::Transient : SnapshotMode::Steady);
    log << "archive: n_z " << a.rom.basis.nz() << ", n_qp " << a.rom.basis.nqp() << ", n_u " << a.rom.basis.nu()
        << " (" << to_string(a.mode) << ")\n";
    return a;
}

void apply_sweep_value(const std::string& parameter, double v, ScenarioParams& params, ControlWeights& w) {
    if (parameter == "beta") w.beta = v;
    else if (parameter == "beta_g") w.beta_g = v;
    else if (parameter == "diffusivity") params.diffusivity = v;
    else if (parameter == "intensity") params.intensity = v;
    else if (parameter == "obstacle_temperature") params.obstacle_temperature = v;
    else throw ConfigError("sweep.parameter", "unknown parameter '" + parameter + "'");
}

}  // namespace

CommandOutcome solve_steady_command(const RunConfig& cfg, std::ostream& log) {
    CommandOutcome out;
    out.directory = prepare(cfg, "steady");
    const Manifest m = run_manifest("solve-steady", cfg, out.directory, out);
    const Discretization d = build(cfg, log);

    SteadySolution s;
    Timing timing;
    timing.fom_seconds = median_seconds([&] { s = solve_steady(d.ops, cfg.params, cfg.weights); }, cfg.timing_repeats);
    CloakReport r = steady_report(d.ops, cfg.params, cfg.weights, s);
    r.layout = to_string(cfg.layout);
    r.timing = timing;
    log_report(log, r);

    append(out.files, export_fields(d.meshes.ocp, ocp_fields(d, cfg.params, s), cfg.format, out.directory + "/fields",
                                    "steady optimal control"));
    export_reference(d, s.z, cfg.format, out.directory + "/reference", out);
    export_meshes(d, out.directory, out);
    out.reports.push_back(r);
    out.files.push_back(write_report(out.directory, out.reports));
    Manifest full = m;
    full.set("mesh_hash", mesh_digest(d));
    finish_manifest(full, out.directory, out);
    return out;
}

CommandOutcome solve_transient_command(const RunConfig& cfg, std::ostream& log) {
    CommandOutcome out;
    out.directory = prepare(cfg, "transient");
    Manifest m = run_manifest("solve-transient", cfg, out.directory, out);
    const Discretization d = build(cfg, log);

    TransientResult res;
    Timing timing;
    timing.fom_seconds = timed([&] {
        res = solve_transient_ocp(d.ops, cfg.params, cfg.weights, cfg.grid, cfg.optimizer, cfg.terminal);
    });
    log << "optimizer: " << res.iterations << " iterations, " << (res.converged ? "converged" : "not converged")
        << ", cost " << res.cost << '\n';
    note(out, log, res.warning);
    CloakReport r = transient_report(d.ops, cfg.params, cfg.weights, res.trajectory);
    r.layout = to_string(cfg.layout);
    r.timing = timing;
    log_report(log, r);

    const auto frames = select_frames(cfg.frames, cfg.grid.steps);
    export_trajectory(d, cfg.params, res.trajectory, frames, cfg.format, out.directory, "frame", out);
    out.files.push_back(write_file(out.directory + "/timeline.csv", [&](std::ostream& o) {
        write_timeline(o, d.ops, res.trajectory, res.steady);
    }));
    out.files.push_back(
        write_file(out.directory + "/convergence.csv", [&](std::ostream& o) { write_convergence(o, res.log); }));
    export_meshes(d, out.directory, out);
    out.reports.push_back(r);
    out.files.push_back(write_report(out.directory, out.reports));
    m.set("mesh_hash", mesh_digest(d));
    m.set("frames", static_cast<std::int64_t>(frames.size()));
    m.set("iterations", static_cast<std::int64_t>(res.iterations));
    m.set("converged", res.converged ? "true" : "false");
    finish_manifest(m, out.directory, out);
    return out;
}

CommandOutcome offline_command(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    CommandOutcome out;
    out.directory = cfg.archive_dir();
    ensure_directory(out.directory);
    Manifest m = run_manifest("offline", cfg, out.directory, out);
    const Discretization d = build(cfg, log);
    const std::string mesh_hash = mesh_digest(d);

    const LhsSample sample = lhs_sample(cfg.box, cfg.samples, cfg.seed);
    for (const auto& w : sample.warnings) note(out, log, w);

    SnapshotOptions opt;
    opt.mode = cfg.snapshot_mode;
    opt.weights = cfg.weights;
    opt.grid = cfg.grid;
    opt.optimizer = cfg.optimizer;
    opt.threads = cfg.threads;

    std::optional<SnapshotWriter> writer;
    if (cfg.keep_snapshots())
        writer.emplace(out.directory + "/snapshots",
                       SnapshotProvenance{cfg.seed, cfg.hash(), mesh_hash, cfg.snapshot_mode, cfg.grid, cfg.weights});
    BasisBuilder builder(cfg.pod_tolerance, mesh_hash, cfg.balance);
    const double seconds = timed([&] {
        for_each_snapshot(d.ops, sample.points, opt, [&](SnapshotRecord&& rec) {
            log << "snapshot " << rec.index + 1 << "/" << cfg.samples << (rec.ok ? "" : " failed: " + rec.error);
            if (rec.ok && rec.transient)
                log << " (" << rec.transient->iterations << " iterations"
                    << (rec.transient->converged ? "" : ", not converged") << ")";
            log << '\n';
            if (writer) writer->add(rec);
            builder.add(rec);
        });
    });
    if (writer) {
        writer->finish();
        out.files.push_back(out.directory + "/snapshots/manifest.txt");
    }
    for (const auto& w : builder.warnings()) note(out, log, w);

    const PodBasis& basis = builder.basis();
    const RomOperators rom = cfg.snapshot_mode == SnapshotMode::Transient
                                 ? project_transient(d.ops, basis, cfg.weights)
                                 : project_steady(d.ops, basis, cfg.weights);
    log << "bases: n_z " << basis.nz() << ", n_qp " << basis.nqp() << ", n_u " << basis.nu() << " from "
        << basis.samples << " samples (" << seconds << " s)\n";

    m.set("mode", to_string(cfg.snapshot_mode));
    m.set("seed", std::to_string(cfg.seed));
    m.set("offline_seconds", seconds);
    for (std::size_t i = 0; i < out.files.size(); ++i) m.set("file." + std::to_string(i), out.files[i]);
    m.set("warnings", static_cast<std::int64_t>(out.warnings.size()));
    for (std::size_t i = 0; i < out.warnings.size(); ++i) m.set("warning." + std::to_string(i), out.warnings[i]);
    save_rom(rom, out.directory, m);
    out.files.push_back(out.directory + "/manifest.txt");
    out.files.push_back(out.directory + "/operators.txt");
    out.files.push_back(out.directory + "/basis.txt");
    return out;
}

CommandOutcome online_command(const RunConfig& cfg, std::ostream& log) {
    CommandOutcome out;
    cfg.validate();
    const Discretization d = build(cfg, log);
    const Archive a = open_archive(cfg, d, log);
    out.directory = prepare(cfg, "online");
    Manifest m = run_manifest("online", cfg, out.directory, out);
    m.set("archive", cfg.archive_dir());
    m.set("mesh_hash", mesh_digest(d));
    const int repeats = cfg.timing_repeats;
    CloakReport r;

    if (a.mode == SnapshotMode::Steady) {
        RomSteadySolution rs;
        Timing timing;
        timing.rom_seconds = median_seconds([&] { rs = solve_rom_steady(a.rom, cfg.params); }, repeats);
        const SteadySolution lifted = lift(a.rom, rs);
        append(out.files, export_fields(d.meshes.ocp, ocp_fields(d, cfg.params, lifted), cfg.format,
                                        out.directory + "/rom_fields", "reduced-order steady control"));
        export_reference(d, lifted.z, cfg.format, out.directory + "/rom_reference", out);
        if (cfg.compare) {
            SteadySolution fom;
            timing.fom_seconds = median_seconds([&] { fom = solve_steady(d.ops, cfg.params, cfg.weights); }, repeats);
            append(out.files, export_fields(d.meshes.ocp, ocp_fields(d, cfg.params, fom), cfg.format,
                                            out.directory + "/fom_fields", "full-order steady control"));
            export_reference(d, fom.z, cfg.format, out.directory + "/fom_reference", out);
            r = rom_fom_report(d.ops, cfg.params, cfg.weights, fom, lifted, timing);
        } else {
            r = steady_report(d.ops, cfg.params, cfg.weights, lifted);
            r.timing = timing;
        }
    } else {
        RomTransientResult rr;
        Timing timing;
        timing.rom_seconds = median_seconds(
            [&] { rr = solve_rom_transient(a.rom, cfg.params, cfg.grid, cfg.optimizer, cfg.terminal); }, repeats);
        note(out, log, rr.warning);
        const Trajectory lifted = lift(a.rom, rr);
        const SteadySolution lifted_steady = lift(a.rom, rr.steady);
        const auto frames = select_frames(cfg.frames, cfg.grid.steps);
        export_trajectory(d, cfg.params, lifted, frames, cfg.format, out.directory, "rom_frame", out);
        out.files.push_back(write_file(out.directory + "/rom_timeline.csv", [&](std::ostream& o) {
            write_timeline(o, d.ops, lifted, lifted_steady);
        }));
        out.files.push_back(
            write_file(out.directory + "/rom_convergence.csv", [&](std::ostream& o) { write_convergence(o, rr.log); }));
        if (cfg.compare) {
            TransientResult fom;
            timing.fom_seconds = median_seconds(
                [&] { fom = solve_transient_ocp(d.ops, cfg.params, cfg.weights, cfg.grid, cfg.optimizer, cfg.terminal); },
                repeats);
            note(out, log, fom.warning);
            export_trajectory(d, cfg.params, fom.trajectory, frames, cfg.format, out.directory, "fom_frame", out);
            out.files.push_back(write_file(out.directory + "/fom_timeline.csv", [&](std::ostream& o) {
                write_timeline(o, d.ops, fom.trajectory, fom.steady);
            }));
            r = rom_fom_report(d.ops, cfg.params, cfg.weights, fom.trajectory, lifted, timing);
        } else {
            r = transient_report(d.ops, cfg.params, cfg.weights, lifted);
            r.timing = timing;
        }
    }
    r.layout = to_string(cfg.layout);
    log_report(log, r);
    export_meshes(d, out.directory, out);
    out.reports.push_back(r);
    out.files.push_back(write_report(out.directory, out.reports));
    finish_manifest(m, out.directory, out);
    return out;
}

CommandOutcome sweep_command(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.sweep_values.empty()) throw ConfigError("sweep.values", "must list at least one value");
    const Discretization d = build(cfg, log);
    std::optional<Archive> archive;
    if (cfg.sweep_model == SweepModel::Rom) {
        if (cfg.sweep_parameter == "beta" || cfg.sweep_parameter == "beta_g")
            throw ConfigError("sweep.parameter",
                              "a reduced-order archive is built for fixed control weights; use sweep.model = fom");
        archive = open_archive(cfg, d, log);
        if (cfg.sweep_regime == SnapshotMode::Transient && archive->mode != SnapshotMode::Transient)
            throw ConfigError("sweep.regime", "the archive holds a steady reduced model; run offline with rom.mode = transient");
    }

    CommandOutcome out;
    out.directory = prepare(cfg, "sweep");
    Manifest m = run_manifest("sweep", cfg, out.directory, out);
    m.set("mesh_hash", mesh_digest(d));

    for (double v : cfg.sweep_values) {
        ScenarioParams params = cfg.params;
        ControlWeights w = cfg.weights;
        apply_sweep_value(cfg.sweep_parameter, v, params, w);
        CloakReport r;
        const bool transient = cfg.sweep_regime == SnapshotMode::Transient;
        if (!archive) {
            if (transient) {
                TransientResult res;
                const double t = timed([&] {
                    res = solve_transient_ocp(d.ops, params, w, cfg.grid, cfg.optimizer, cfg.terminal);
                });
                note(out, log, res.warning);
                r = transient_report(d.ops, params, w, res.trajectory);
                r.timing.fom_seconds = t;
            } else {
                SteadySolution s;
                const double t = timed([&] { s = solve_steady(d.ops, params, w); });
                r = steady_report(d.ops, params, w, s);
                r.timing.fom_seconds = t;
            }
        } else if (transient) {
            RomTransientResult rr;
            const double t = timed([&] { rr = solve_rom_transient(archive->rom, params, cfg.grid, cfg.optimizer, cfg.terminal); });
            note(out, log, rr.warning);
            r = transient_report(d.ops, params, w, lift(archive->rom, rr));
            r.timing.rom_seconds = t;
        } else {
            RomSteadySolution rs;
            const double t = timed([&] { rs = solve_rom_steady(archive->rom, params); });
            r = steady_report(d.ops, params, w, lift(archive->rom, rs));
            r.timing.rom_seconds = t;
        }
        r.layout = to_string(cfg.layout);
        log << cfg.sweep_parameter << " = " << v << ": MTE " << r.mte_optimal << ", efficiency " << r.efficiency << '\n';
        out.reports.push_back(r);
    }
    out.files.push_back(write_report(out.directory, out.reports));
    finish_manifest(m, out.directory, out);
    return out;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"solve-steady", "solve-transient", "offline", "online", "sweep"};
    return names;
}

CommandOutcome run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
    static const std::map<std::string, std::function<CommandOutcome(const RunConfig&, std::ostream&)>> table{
        {"solve-steady", solve_steady_command}, {"solve-transient", solve_transient_command},
        {"offline", offline_command},           {"online", online_command},
        {"sweep", sweep_command}};
    const auto it = table.find(name);
    if (it == table.end()) throw ValidationError("unknown command '" + name + "'");
    return it->second(cfg, log);
}

}  // namespace cloak
