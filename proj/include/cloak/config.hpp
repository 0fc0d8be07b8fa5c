#pragma once

#include "cloak/geometry.hpp"
#include "cloak/io.hpp"
#include "cloak/scenarios.hpp"
#include "cloak/transient.hpp"
#include "cloak/types.hpp"

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace cloak {

/// Invalid configuration. The message starts with the offending key.
class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& key, const std::string& detail)
        : ValidationError(key + ": " + detail), key_(key), detail_(detail) {}
    const std::string& key() const { return key_; }
    const std::string& detail() const { return detail_; }

private:
    std::string key_;
    std::string detail_;
};

enum class LayoutKind { Annulus, Discs, Offset };
enum class ExportFormat { Csv, Vtk, Both };
enum class SweepModel { Rom, Fom };
/// Whether offline keeps the raw snapshots; Auto keeps steady ones only.
enum class SnapshotStorage { Auto, Keep, Drop };

std::string to_string(LayoutKind k);
std::string to_string(ExportFormat f);
std::string to_string(SweepModel m);

/// Everything one command needs. Keys of the text form are listed by keys().
struct RunConfig {
    LayoutKind layout = LayoutKind::Annulus;
    double mesh_size = 1.0 / 60.0;
    bool obstacle = true;
    std::string polygon;  // vertex file of the offset layout
    double offset_thickness = 0.05;

    ControlWeights weights;
    TimeGrid grid;
    ScenarioParams params;
    ParameterBox box;

    double pod_tolerance = 1e-7;
    int samples = 50;
    SnapshotMode snapshot_mode = SnapshotMode::Steady;
    bool balance = true;
    std::uint64_t seed = 2024;
    int threads = 1;
    SnapshotStorage save_snapshots = SnapshotStorage::Auto;

    OptimizerOptions optimizer;
    TerminalCondition terminal = TerminalCondition::Steady;

    std::string archive;  // empty: <out>/rom
    bool compare = true;  // online: also run the full-order model
    int timing_repeats = 5;

    std::string sweep_parameter = "beta";
    std::vector<double> sweep_values;
    SweepModel sweep_model = SweepModel::Fom;
    SnapshotMode sweep_regime = SnapshotMode::Steady;

    std::string out = "out";
    ExportFormat format = ExportFormat::Csv;
    std::string frames = "final";

    /// Sets one key from its text value; throws ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    /// Text value of a key in canonical form.
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// Cross-field checks: weights, grid, box, tolerances and layout.
    void validate() const;
    LayoutSpec layout_spec() const;
    std::string archive_dir() const;
    bool keep_snapshots() const;

    /// Every key in canonical form, sorted.
    Manifest to_manifest() const;
    /// Digest of every key except output.dir; independent of key order in the file.
    std::string hash() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError with the key and the line number.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
void write_config(std::ostream& out, const RunConfig& cfg);

/// Frame selection: "final", "all", "none", a comma list of indices and
/// start:stop:step ranges. Returns the sorted indices that fall in [0, steps].
std::vector<int> select_frames(const std::string& spec, int steps);

}  // namespace cloak
