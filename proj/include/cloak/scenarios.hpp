#pragma once

#include "cloak/fem.hpp"
#include "cloak/steady.hpp"
#include "cloak/transient.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cloak {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Box of admissible parameters.
struct ParameterBox {
    Interval diffusivity{1.0, 5.0};
    Interval intensity{5e2, 1.5e4};
    Interval obstacle_temperature{0.0, 200.0};

    /// Throws ValidationError when a bound is reversed, non-finite, or the diffusivity is not positive.
    void validate() const;
    bool contains(const ScenarioParams& p) const;
};

struct LhsSample {
    std::vector<ScenarioParams> points;
    std::vector<std::string> warnings;
};

/// Latin hypercube: each dimension is split into n equal strata, a random
/// permutation assigns strata to samples and the point is jittered uniformly
/// inside its stratum. Zero-width dimensions are pinned with a warning.
LhsSample lhs_sample(const ParameterBox& box, int n, std::uint64_t seed);

/// Stratum index of each sample along each dimension (n x 3).
std::vector<std::array<int, 3>> lhs_strata(const ParameterBox& box, const std::vector<ScenarioParams>& points);

enum class SnapshotMode { Steady, Transient };
std::string to_string(SnapshotMode m);
SnapshotMode parse_snapshot_mode(const std::string& s);

struct SnapshotRecord {
    int index = 0;
    ScenarioParams params;
    bool ok = false;
    std::string error;
    SteadySolution steady;
    std::optional<TransientResult> transient;
};

struct SnapshotProvenance {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string mesh_hash;
    SnapshotMode mode = SnapshotMode::Steady;
    TimeGrid grid;
    ControlWeights weights;
};

struct SnapshotSet {
    SnapshotProvenance provenance;
    std::vector<SnapshotRecord> records;

    int succeeded() const;
};

struct SnapshotOptions {
    SnapshotMode mode = SnapshotMode::Steady;
    ControlWeights weights;
    TimeGrid grid;
    OptimizerOptions optimizer;
    int threads = 1;  // 0 = hardware concurrency
};

/// Called once per sample, in sample order, from the calling thread.
using SnapshotSink = std::function<void(SnapshotRecord&&)>;

/// Runs one full-order solve per sample on a work pool and hands the records
/// to `sink` in sample order. Failed solves are delivered with ok = false.
/// Returns the number of successful solves; throws SolverError when all fail.
int for_each_snapshot(const FemOperators& ops, const std::vector<ScenarioParams>& samples, const SnapshotOptions& opt,
                      const SnapshotSink& sink);

/// Collects every record of for_each_snapshot.
SnapshotSet generate_snapshots(const Discretization& disc, const std::vector<ScenarioParams>& samples,
                               const SnapshotOptions& opt, std::uint64_t seed = 0, const std::string& config_hash = {});

/// Digest of both meshes of a discretization.
std::string mesh_digest(const Discretization& disc);

/// Writes records of a snapshot set one at a time; finish() writes the manifest.
class SnapshotWriter {
public:
    SnapshotWriter(std::string dir, SnapshotProvenance provenance);

    void add(const SnapshotRecord& rec);
    void finish();

private:
    std::string dir_;
    SnapshotProvenance provenance_;
    std::vector<std::string> files_;
    int succeeded_ = 0;
    bool finished_ = false;
};

/// Versioned text container: `manifest.txt` plus `sample_NNNN.txt` per record.
void save_snapshot_set(const SnapshotSet& set, const std::string& dir);
SnapshotSet load_snapshot_set(const std::string& dir);

void write_snapshot_record(const SnapshotRecord& rec, std::ostream& out);
SnapshotRecord read_snapshot_record(std::istream& in);

}  // namespace cloak
