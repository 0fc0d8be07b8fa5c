#pragma once

#include "cloak/config.hpp"
#include "cloak/metrics.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace cloak {

struct CommandOutcome {
    std::string directory;  // where the artifacts went
    std::vector<std::string> files;
    std::vector<CloakReport> reports;
    std::vector<std::string> warnings;
};

/// One-shot steady FOM: fields, reference field, meshes, report.csv.
CommandOutcome solve_steady_command(const RunConfig& cfg, std::ostream& log);
/// Transient FOM: requested frames, timeline.csv, convergence.csv, report.csv.
CommandOutcome solve_transient_command(const RunConfig& cfg, std::ostream& log);
/// LHS sample, snapshots, POD bases and projected operators written to the archive directory.
CommandOutcome offline_command(const RunConfig& cfg, std::ostream& log);
/// Loads the archive and solves the ROM at the configured parameters, optionally against the FOM.
CommandOutcome online_command(const RunConfig& cfg, std::ostream& log);
/// One report row per value of the swept parameter.
CommandOutcome sweep_command(const RunConfig& cfg, std::ostream& log);

/// Names accepted by run_command.
const std::vector<std::string>& command_names();
/// Dispatches by name; throws ValidationError for an unknown command.
CommandOutcome run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace cloak
