#include "cloak/scenarios.hpp"

#include "cloak/io.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace cloak {

namespace {

constexpr const char* kRecordHeader = "cloak-snapshot 1";
constexpr const char* kSetFormat = "cloak-snapshot-set 1";

const Interval& dimension(const ParameterBox& box, int d) {
    return d == 0 ? box.diffusivity : d == 1 ? box.intensity : box.obstacle_temperature;
}

double& component(ScenarioParams& p, int d) {
    return d == 0 ? p.diffusivity : d == 1 ? p.intensity : p.obstacle_temperature;
}

double component(const ScenarioParams& p, int d) {
    return d == 0 ? p.diffusivity : d == 1 ? p.intensity : p.obstacle_temperature;
}

const char* kDimensionNames[] = {"diffusivity", "intensity", "obstacle_temperature"};

/// Uniform double in [0, 1) from the top 53 bits.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

SnapshotRecord solve_one(const FemOperators& ops, const ScenarioParams& p, int index, const SnapshotOptions& opt) {
    SnapshotRecord rec;
    rec.index = index;
    rec.params = p;
    try {
        if (opt.mode == SnapshotMode::Steady) {
            rec.steady = solve_steady(ops, p, opt.weights);
        } else {
            rec.transient = solve_transient_ocp(ops, p, opt.weights, opt.grid, opt.optimizer);
            rec.steady = rec.transient->steady;
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        rec.transient.reset();
    }
    return rec;
}

void write_vector(std::ostream& out, const std::string& name, const Vector& v) { write_matrix(out, name, v); }

Vector read_vector(LineReader& in, const std::string& name) {
    const Matrix m = read_matrix(in, name);
    if (m.cols() != 1) in.fail(name + ": expected a single column");
    return m.col(0);
}

std::string expect_key(LineReader& in, const std::string& key) {
    const std::string line = in.expect(key);
    if (line.compare(0, key.size() + 1, key + " ") != 0 && line != key) in.fail("expected '" + key + "'");
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

std::string record_file(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04d.txt", index);
    return buf;
}

}  // namespace

void ParameterBox::validate() const {
    for (int d = 0; d < 3; ++d) {
        const Interval& iv = dimension(*this, d);
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
            throw ValidationError(std::string("box.") + kDimensionNames[d] + ": bounds must be finite");
        if (iv.hi < iv.lo) throw ValidationError(std::string("box.") + kDimensionNames[d] + ": upper bound below lower bound");
    }
    if (!(diffusivity.lo > 0.0)) throw ValidationError("box.diffusivity: lower bound must be > 0");
}

bool ParameterBox::contains(const ScenarioParams& p) const {
    for (int d = 0; d < 3; ++d)
        if (!dimension(*this, d).contains(component(p, d))) return false;
    return true;
}

LhsSample lhs_sample(const ParameterBox& box, int n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("lhs: sample count must be >= 1");
    box.validate();
    LhsSample out;
    out.points.resize(n);
    std::mt19937_64 rng(seed);
    std::vector<int> perm(n);
    for (int d = 0; d < 3; ++d) {
        const Interval& iv = dimension(box, d);
        if (iv.width() == 0.0)
            out.warnings.push_back(std::string("lhs: ") + kDimensionNames[d] + " range has zero width, samples pinned to " +
                                   format_double(iv.lo));
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
        for (int i = 0; i < n; ++i) {
            const double t = (perm[i] + unit_draw(rng)) / n;
            component(out.points[i], d) = iv.width() == 0.0 ? iv.lo : std::min(iv.hi, iv.lo + t * iv.width());
        }
    }
    return out;
}

std::vector<std::array<int, 3>> lhs_strata(const ParameterBox& box, const std::vector<ScenarioParams>& points) {
    const int n = static_cast<int>(points.size());
    std::vector<std::array<int, 3>> out(points.size());
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) {
            const Interval& iv = dimension(box, d);
            const double t = iv.width() > 0.0 ? (component(points[i], d) - iv.lo) / iv.width() : 0.0;
            out[i][d] = std::clamp(static_cast<int>(std::floor(t * n)), 0, n - 1);
        }
    }
    return out;
}

std::string to_string(SnapshotMode m) { return m == SnapshotMode::Steady ? "steady" : "transient"; }

SnapshotMode parse_snapshot_mode(const std::string& s) {
    if (s == "steady") return SnapshotMode::Steady;
    if (s == "transient") return SnapshotMode::Transient;
    throw ValidationError("mode must be 'steady' or 'transient', got '" + s + "'");
}

int SnapshotSet::succeeded() const {
    return static_cast<int>(std::count_if(records.begin(), records.end(), [](const SnapshotRecord& r) { return r.ok; }));
}

int for_each_snapshot(const FemOperators& ops, const std::vector<ScenarioParams>& samples, const SnapshotOptions& opt,
                      const SnapshotSink& sink) {
    const int n = static_cast<int>(samples.size());
    if (n == 0) throw ValidationError("snapshots: no samples");
    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, n);

    int ok = 0;
    auto deliver = [&](SnapshotRecord&& rec) {
        ok += rec.ok ? 1 : 0;
        sink(std::move(rec));
    };

    if (threads == 1) {
        for (int i = 0; i < n; ++i) deliver(solve_one(ops, samples[i], i, opt));
    } else {
        // Workers take indices in order and park finished records until the
        // caller has consumed every earlier one, so at most `threads` records
        // are held at a time.
        std::mutex mu;
        std::condition_variable cv;
        std::map<int, SnapshotRecord> done;
        int next_index = 0, next_deliver = 0;
        auto worker = [&] {
            for (;;) {
                int i;
                {
                    std::unique_lock<std::mutex> lock(mu);
                    cv.wait(lock, [&] { return next_index >= n || next_index < next_deliver + threads; });
                    if (next_index >= n) return;
                    i = next_index++;
                }
                SnapshotRecord rec = solve_one(ops, samples[i], i, opt);
                {
                    std::lock_guard<std::mutex> lock(mu);
                    done.emplace(i, std::move(rec));
                }
                cv.notify_all();
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        while (next_deliver < n) {
            SnapshotRecord rec;
            {
                std::unique_lock<std::mutex> lock(mu);
                cv.wait(lock, [&] { return done.count(next_deliver) != 0; });
                rec = std::move(done.at(next_deliver));
                done.erase(next_deliver);
                ++next_deliver;
            }
            cv.notify_all();
            deliver(std::move(rec));
        }
        for (auto& t : pool) t.join();
    }
    if (ok == 0) throw SolverError("snapshots: all " + std::to_string(n) + " solves failed");
    return ok;
}

std::string mesh_digest(const Discretization& disc) {
    return hex_digest(disc.meshes.unperturbed.hash() ^ (disc.meshes.ocp.hash() * 1099511628211ull));
}

SnapshotSet generate_snapshots(const Discretization& disc, const std::vector<ScenarioParams>& samples,
                               const SnapshotOptions& opt, std::uint64_t seed, const std::string& config_hash) {
    SnapshotSet set;
    set.provenance = {seed, config_hash, mesh_digest(disc), opt.mode, opt.grid, opt.weights};
    set.records.reserve(samples.size());
    for_each_snapshot(disc.ops, samples, opt, [&](SnapshotRecord&& r) { set.records.push_back(std::move(r)); });
    return set;
}

void write_snapshot_record(const SnapshotRecord& rec, std::ostream& out) {
    out << kRecordHeader << '\n';
    out << "index " << rec.index << '\n';
    out << "params " << format_double(rec.params.diffusivity) << ' ' << format_double(rec.params.intensity) << ' '
        << format_double(rec.params.obstacle_temperature) << '\n';
    if (!rec.ok) {
        std::string msg = rec.error;
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << "status failed\nerror " << msg << '\n';
        return;
    }
    out << "status ok\n";
    const SteadySolution& s = rec.steady;
    out << "cost " << format_double(s.cost) << ' ' << format_double(s.tracking) << ' ' << format_double(s.control) << '\n';
    write_vector(out, "z_ss", s.z);
    write_vector(out, "q_ss", s.q);
    write_vector(out, "p_ss", s.p);
    write_vector(out, "u_ss", s.u);
    if (!rec.transient) {
        out << "transient no\n";
        return;
    }
    const TransientResult& t = *rec.transient;
    out << "transient yes\n";
    out << "grid " << format_double(t.trajectory.grid.horizon) << ' ' << t.trajectory.grid.steps << '\n';
    out << "result " << (t.converged ? 1 : 0) << ' ' << t.iterations << ' ' << format_double(t.cost) << '\n';
    out << "log " << t.log.size() << '\n';
    for (const auto& l : t.log)
        out << l.iter << ',' << format_double(l.cost) << ',' << format_double(l.merit) << ',' << format_double(l.grad_norm)
            << ',' << format_double(l.step) << ',' << l.backtracks << '\n';
    write_matrix(out, "z", t.trajectory.z);
    write_matrix(out, "q", t.trajectory.q);
    write_matrix(out, "p", t.trajectory.p);
    write_matrix(out, "u", t.trajectory.u);
}

SnapshotRecord read_snapshot_record(std::istream& in) {
    LineReader r(in);
    if (r.expect("header") != kRecordHeader) r.fail(std::string("expected '") + kRecordHeader + "'");
    SnapshotRecord rec;
    rec.index = std::stoi(expect_key(r, "index"));
    {
        std::istringstream ps(expect_key(r, "params"));
        std::string a, b, c;
        ps >> a >> b >> c;
        try {
            rec.params = {parse_double(a, "diffusivity"), parse_double(b, "intensity"), parse_double(c, "obstacle_temperature")};
        } catch (const std::invalid_argument& e) {
            r.fail(e.what());
        }
    }
    const std::string status = expect_key(r, "status");
    if (status == "failed") {
        rec.ok = false;
        rec.error = expect_key(r, "error");
        return rec;
    }
    if (status != "ok") r.fail("status must be ok or failed");
    rec.ok = true;
    {
        std::istringstream cs(expect_key(r, "cost"));
        std::string a, b, c;
        cs >> a >> b >> c;
        rec.steady.cost = parse_double(a, "cost");
        rec.steady.tracking = parse_double(b, "tracking");
        rec.steady.control = parse_double(c, "control");
    }
    rec.steady.z = read_vector(r, "z_ss");
    rec.steady.q = read_vector(r, "q_ss");
    rec.steady.p = read_vector(r, "p_ss");
    rec.steady.u = read_vector(r, "u_ss");
    const std::string has_transient = expect_key(r, "transient");
    if (has_transient == "no") return rec;
    if (has_transient != "yes") r.fail("transient must be yes or no");

    TransientResult t;
    t.steady = rec.steady;
    {
        std::istringstream gs(expect_key(r, "grid"));
        std::string a;
        gs >> a >> t.trajectory.grid.steps;
        t.trajectory.grid.horizon = parse_double(a, "horizon");
    }
    {
        std::istringstream rs(expect_key(r, "result"));
        std::string cost;
        int conv = 0;
        rs >> conv >> t.iterations >> cost;
        t.converged = conv != 0;
        t.cost = parse_double(cost, "cost");
    }
    const int log_size = std::stoi(expect_key(r, "log"));
    for (int i = 0; i < log_size; ++i) {
        std::string line = r.expect("log row");
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        IterationRecord l;
        std::string c, m, g, s;
        ls >> l.iter >> c >> m >> g >> s >> l.backtracks;
        if (!ls) r.fail("malformed log row");
        l.cost = parse_double(c, "cost");
        l.merit = parse_double(m, "merit");
        l.grad_norm = parse_double(g, "gradient norm");
        l.step = parse_double(s, "step");
        t.log.push_back(l);
    }
    t.trajectory.z = read_matrix(r, "z");
    t.trajectory.q = read_matrix(r, "q");
    t.trajectory.p = read_matrix(r, "p");
    t.trajectory.u = read_matrix(r, "u");
    if (!t.converged) t.warning = "gradient tolerance not reached";
    rec.transient = std::move(t);
    return rec;
}

SnapshotWriter::SnapshotWriter(std::string dir, SnapshotProvenance provenance)
    : dir_(std::move(dir)), provenance_(std::move(provenance)) {
    ensure_directory(dir_);
}

void SnapshotWriter::add(const SnapshotRecord& rec) {
    if (finished_) throw std::logic_error("snapshot writer already finished");
    const std::string name = record_file(rec.index);
    std::ofstream out(dir_ + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + dir_ + "/" + name);
    write_snapshot_record(rec, out);
    if (!out) throw std::runtime_error("write failed for " + dir_ + "/" + name);
    files_.push_back(name);
    if (rec.ok) ++succeeded_;
}

void SnapshotWriter::finish() {
    if (finished_) return;
    const SnapshotProvenance& pv = provenance_;
    Manifest m;
    m.set("format", kSetFormat);
    m.set("seed", std::to_string(pv.seed));
    m.set("config_hash", pv.config_hash);
    m.set("mesh_hash", pv.mesh_hash);
    m.set("mode", to_string(pv.mode));
    m.set("time.horizon", pv.grid.horizon);
    m.set("time.steps", static_cast<std::int64_t>(pv.grid.steps));
    m.set("weights.beta", pv.weights.beta);
    m.set("weights.beta_g", pv.weights.beta_g);
    m.set("n_s", static_cast<std::int64_t>(files_.size()));
    m.set("succeeded", static_cast<std::int64_t>(succeeded_));
    for (std::size_t i = 0; i < files_.size(); ++i) m.set("sample." + std::to_string(i), files_[i]);
    m.save(dir_ + "/manifest.txt");
    finished_ = true;
}

void save_snapshot_set(const SnapshotSet& set, const std::string& dir) {
    SnapshotWriter writer(dir, set.provenance);
    for (const auto& rec : set.records) writer.add(rec);
    writer.finish();
}

SnapshotSet load_snapshot_set(const std::string& dir) {
    const Manifest m = Manifest::load(dir + "/manifest.txt");
    if (m.get("format") != kSetFormat) throw std::runtime_error(dir + ": unsupported snapshot format '" + m.get("format") + "'");
    SnapshotSet set;
    SnapshotProvenance& pv = set.provenance;
    pv.seed = std::stoull(m.get("seed"));
    pv.config_hash = m.get("config_hash");
    pv.mesh_hash = m.get("mesh_hash");
    pv.mode = parse_snapshot_mode(m.get("mode"));
    pv.grid = {m.get_double("time.horizon"), static_cast<int>(m.get_int("time.steps"))};
    pv.weights = {m.get_double("weights.beta"), m.get_double("weights.beta_g")};
    const int n = static_cast<int>(m.get_int("n_s"));
    for (int i = 0; i < n; ++i) {
        const std::string path = dir + "/" + m.get("sample." + std::to_string(i));
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        try {
            set.records.push_back(read_snapshot_record(in));
        } catch (const ParseError& e) {
            throw std::runtime_error(path + ": " + e.what());
        }
    }
    return set;
}

}  // namespace cloak
