#include "cloak/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cloak {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back({});
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return parse_double(v, key);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

long long to_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    const long long n = to_integer(key, v);
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max())
        throw ConfigError(key, "integer out of range: '" + v + "'");
    return static_cast<int>(n);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

Interval to_interval(const std::string& key, const std::string& v) {
    const auto parts = split(v, ',');
    if (parts.size() != 2) throw ConfigError(key, "expected 'lo, hi', got '" + v + "'");
    return {to_double(key, parts[0]), to_double(key, parts[1])};
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
    return out;
}

std::string str(double v) { return format_double(v); }
std::string str(bool v) { return v ? "true" : "false"; }
std::string str(const Interval& i) { return format_double(i.lo) + ", " + format_double(i.hi); }
std::string str(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

template <class Enum>
Enum to_enum(const std::string& key, const std::string& v, const std::map<std::string, Enum>& names) {
    const auto it = names.find(v);
    if (it != names.end()) return it->second;
    std::string list;
    for (const auto& [n, e] : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError(key, "expected one of {" + list + "}, got '" + v + "'");
}

const std::map<std::string, LayoutKind> layout_names{
    {"annulus", LayoutKind::Annulus}, {"discs", LayoutKind::Discs}, {"offset", LayoutKind::Offset}};
const std::map<std::string, ExportFormat> format_names{
    {"csv", ExportFormat::Csv}, {"vtk", ExportFormat::Vtk}, {"both", ExportFormat::Both}};
const std::map<std::string, SweepModel> sweep_model_names{{"rom", SweepModel::Rom}, {"fom", SweepModel::Fom}};
const std::map<std::string, SnapshotMode> mode_names{{"steady", SnapshotMode::Steady},
                                                     {"transient", SnapshotMode::Transient}};
const std::map<std::string, TerminalCondition> terminal_names{{"steady", TerminalCondition::Steady},
                                                              {"natural", TerminalCondition::Natural}};
const std::map<std::string, SnapshotStorage> storage_names{
    {"auto", SnapshotStorage::Auto}, {"true", SnapshotStorage::Keep}, {"false", SnapshotStorage::Drop}};
const std::set<std::string> sweep_parameters{"beta", "beta_g", "diffusivity", "intensity", "obstacle_temperature"};

struct Field {
    std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CLOAK_DOUBLE(member) \
    {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
     [](const RunConfig& c) { return str(c.member); }}
#define CLOAK_INT(member) \
    {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_int(k, v); }, \
     [](const RunConfig& c) { return std::to_string(c.member); }}
#define CLOAK_BOOL(member) \
    {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
     [](const RunConfig& c) { return str(c.member); }}
#define CLOAK_INTERVAL(member) \
    {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_interval(k, v); }, \
     [](const RunConfig& c) { return str(c.member); }}
#define CLOAK_STRING(member) \
    {[](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
     [](const RunConfig& c) { return c.member; }}
#define CLOAK_ENUM(member, names) \
    {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_enum(k, v, names); }, \
     [](const RunConfig& c) { \
         for (const auto& [n, e] : names) \
             if (e == c.member) return n; \
         return std::string(); \
     }}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table{
        {"layout.kind", CLOAK_ENUM(layout, layout_names)},
        {"layout.mesh_size", CLOAK_DOUBLE(mesh_size)},
        {"layout.obstacle", CLOAK_BOOL(obstacle)},
        {"layout.polygon", CLOAK_STRING(polygon)},
        {"layout.offset_thickness", CLOAK_DOUBLE(offset_thickness)},
        {"weights.beta", CLOAK_DOUBLE(weights.beta)},
        {"weights.beta_g", CLOAK_DOUBLE(weights.beta_g)},
        {"time.horizon", CLOAK_DOUBLE(grid.horizon)},
        {"time.steps", CLOAK_INT(grid.steps)},
        {"params.diffusivity", CLOAK_DOUBLE(params.diffusivity)},
        {"params.intensity", CLOAK_DOUBLE(params.intensity)},
        {"params.obstacle_temperature", CLOAK_DOUBLE(params.obstacle_temperature)},
        {"box.diffusivity", CLOAK_INTERVAL(box.diffusivity)},
        {"box.intensity", CLOAK_INTERVAL(box.intensity)},
        {"box.obstacle_temperature", CLOAK_INTERVAL(box.obstacle_temperature)},
        {"rom.tolerance", CLOAK_DOUBLE(pod_tolerance)},
        {"rom.samples", CLOAK_INT(samples)},
        {"rom.mode", CLOAK_ENUM(snapshot_mode, mode_names)},
        {"rom.balance", CLOAK_BOOL(balance)},
        {"rom.archive", CLOAK_STRING(archive)},
        {"seed",
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }}},
        {"offline.threads", CLOAK_INT(threads)},
        {"offline.save_snapshots", CLOAK_ENUM(save_snapshots, storage_names)},
        {"solver.tol", CLOAK_DOUBLE(optimizer.tol)},
        {"solver.max_iter", CLOAK_INT(optimizer.max_iter)},
        {"solver.terminal", CLOAK_ENUM(terminal, terminal_names)},
        {"solver.armijo.initial", CLOAK_DOUBLE(optimizer.armijo.initial)},
        {"solver.armijo.contraction", CLOAK_DOUBLE(optimizer.armijo.contraction)},
        {"solver.armijo.c1", CLOAK_DOUBLE(optimizer.armijo.c1)},
        {"solver.armijo.max_backtracks", CLOAK_INT(optimizer.armijo.max_backtracks)},
        {"online.compare", CLOAK_BOOL(compare)},
        {"timing.repeats", CLOAK_INT(timing_repeats)},
        {"sweep.parameter",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              if (!sweep_parameters.count(v))
                  throw ConfigError(k, "expected beta, beta_g, diffusivity, intensity or obstacle_temperature, got '" +
                                           v + "'");
              c.sweep_parameter = v;
          },
          [](const RunConfig& c) { return c.sweep_parameter; }}},
        {"sweep.values",
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_values = to_list(k, v); },
          [](const RunConfig& c) { return str(c.sweep_values); }}},
        {"sweep.model", CLOAK_ENUM(sweep_model, sweep_model_names)},
        {"sweep.regime", CLOAK_ENUM(sweep_regime, mode_names)},
        {"output.dir", CLOAK_STRING(out)},
        {"output.format", CLOAK_ENUM(format, format_names)},
        {"output.frames",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                  select_frames(v, 0);
              } catch (const ValidationError& e) {
                  throw ConfigError(k, e.what());
              }
              c.frames = v;
          },
          [](const RunConfig& c) { return c.frames; }}},
    };
    return table;
}

#undef CLOAK_DOUBLE
#undef CLOAK_INT
#undef CLOAK_BOOL
#undef CLOAK_INTERVAL
#undef CLOAK_STRING
#undef CLOAK_ENUM

const Field& field(const std::string& key) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(key, "unknown key");
    return it->second;
}

}  // namespace

std::string to_string(LayoutKind k) {
    for (const auto& [n, e] : layout_names)
        if (e == k) return n;
    return {};
}

std::string to_string(ExportFormat f) {
    for (const auto& [n, e] : format_names)
        if (e == f) return n;
    return {};
}

std::string to_string(SweepModel m) { return m == SweepModel::Rom ? "rom" : "fom"; }

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields()) k.push_back(name);
        return k;
    }();
    return out;
}

void RunConfig::validate() const {
    auto wrap = [](const std::string& key, auto&& check) {
        try {
            check();
        } catch (const ConfigError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ConfigError(key, e.what());
        }
    };
    wrap("weights", [&] { weights.validate(); });
    wrap("time", [&] { grid.validate(); });
    wrap("box", [&] { box.validate(); });
    if (!(mesh_size > 0.0)) throw ConfigError("layout.mesh_size", "must be > 0");
    if (layout == LayoutKind::Offset && polygon.empty())
        throw ConfigError("layout.polygon", "the offset layout needs a polygon vertex file");
    if (!(params.diffusivity > 0.0)) throw ConfigError("params.diffusivity", "must be > 0");
    if (!(pod_tolerance >= 0.0)) throw ConfigError("rom.tolerance", "must be >= 0");
    if (samples < 1) throw ConfigError("rom.samples", "must be >= 1");
    if (threads < 0) throw ConfigError("offline.threads", "must be >= 0");
    if (!(optimizer.tol > 0.0)) throw ConfigError("solver.tol", "must be > 0");
    if (optimizer.max_iter < 0) throw ConfigError("solver.max_iter", "must be >= 0");
    if (!(optimizer.armijo.initial > 0.0)) throw ConfigError("solver.armijo.initial", "must be > 0");
    if (!(optimizer.armijo.contraction > 0.0 && optimizer.armijo.contraction < 1.0))
        throw ConfigError("solver.armijo.contraction", "must lie in (0, 1)");
    if (!(optimizer.armijo.c1 > 0.0 && optimizer.armijo.c1 < 1.0))
        throw ConfigError("solver.armijo.c1", "must lie in (0, 1)");
    if (optimizer.armijo.max_backtracks < 0) throw ConfigError("solver.armijo.max_backtracks", "must be >= 0");
    if (timing_repeats < 1) throw ConfigError("timing.repeats", "must be >= 1");
    if (out.empty()) throw ConfigError("output.dir", "must not be empty");
}

LayoutSpec RunConfig::layout_spec() const {
    LayoutSpec spec;
    switch (layout) {
        case LayoutKind::Annulus: spec = annulus_layout(mesh_size); break;
        case LayoutKind::Discs: spec = disc_ring_layout(mesh_size); break;
        case LayoutKind::Offset:
            if (polygon.empty()) throw ConfigError("layout.polygon", "the offset layout needs a polygon vertex file");
            spec = offset_layout(load_polygon(polygon), offset_thickness, mesh_size);
            break;
    }
    if (!obstacle) spec.obstacle = NoObstacle{};
    return spec;
}

std::string RunConfig::archive_dir() const { return archive.empty() ? out + "/rom" : archive; }

bool RunConfig::keep_snapshots() const {
    if (save_snapshots == SnapshotStorage::Auto) return snapshot_mode == SnapshotMode::Steady;
    return save_snapshots == SnapshotStorage::Keep;
}

Manifest RunConfig::to_manifest() const {
    Manifest m;
    for (const auto& key : keys()) m.set(key, get(key));
    return m;
}

std::string RunConfig::hash() const {
    std::string text;
    for (const auto& key : keys())
        if (key != "output.dir") text += key + "=" + get(key) + "\n";
    return hex_digest(fnv1a(text));
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line), "expected 'key = value', got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        try {
            if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
            cfg.set(key, text.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(e.key(), e.detail() + " (line " + std::to_string(line) + ")");
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
    for (const auto& key : RunConfig::keys()) out << key << " = " << cfg.get(key) << '\n';
}

std::vector<int> select_frames(const std::string& spec, int steps) {
    const std::string s = trim(spec);
    std::set<int> picked;
    if (s == "none" || s.empty()) return {};
    if (s == "final") return {steps};
    if (s == "all") {
        std::vector<int> all(steps + 1);
        for (int k = 0; k <= steps; ++k) all[k] = k;
        return all;
    }
    auto integer = [&](const std::string& t) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
            throw ValidationError("bad frame index '" + t + "' in '" + spec + "'");
        return v;
    };
    for (const auto& item : split(s, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() == 1) {
            picked.insert(integer(parts[0]));
        } else if (parts.size() == 3) {
            const int a = integer(parts[0]), b = integer(parts[1]), step = integer(parts[2]);
            if (step < 1) throw ValidationError("frame range step must be >= 1 in '" + spec + "'");
            for (int k = a; k <= b; k += step) picked.insert(k);
        } else {
            throw ValidationError("frames: expected an index or start:stop:step, got '" + item + "'");
        }
    }
    std::vector<int> out;
    for (int k : picked)
        if (k >= 0 && k <= steps) out.push_back(k);
    return out;
}

}  // namespace cloak
