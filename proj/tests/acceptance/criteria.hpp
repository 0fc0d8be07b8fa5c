#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cloak::acceptance {

/// Problem sizes of the acceptance run.
struct Scale {
    double mesh_size = 1.0 / 60.0;           // default layout, criteria 5-8
    double transient_mesh_size = 1.0 / 27.0;  // ~3k nodes, criterion 4
    double order_mesh_size = 0.1;             // criterion 9
    int steady_samples = 50;
    int steady_holdout = 5;
    int transient_samples = 25;
    double steady_tolerance = 1e-10;
    double transient_tolerance = 1e-7;
    int timing_repeats = 5;
    int threads = 1;
};

struct Outcome {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

const std::vector<int>& all_criteria();

/// Runs the selected criteria in order, printing one PASS/FAIL line each.
/// Returns the outcomes; progress notes go to `log` when it is not null.
std::vector<Outcome> run_acceptance(const std::vector<int>& ids, const Scale& scale, std::ostream& out,
                                    std::ostream* log = nullptr);

/// Parses "1,2,5-8" style selections; empty selects everything.
std::vector<int> parse_selection(const std::string& text);

}  // namespace cloak::acceptance
