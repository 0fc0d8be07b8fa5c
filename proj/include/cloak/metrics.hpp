#pragma once

#include "cloak/fem.hpp"
#include "cloak/steady.hpp"
#include "cloak/transient.hpp"
#include "cloak/types.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cloak {

/// sqrt(f^T M f). Throws ValidationError on a shape mismatch.
double l2_norm(const Vector& f, const SparseMatrix& M);

/// Trapezoidal rule over the squared spatial norms of the columns of f.
double l2_spacetime_norm(const Matrix& f, const SparseMatrix& M, const TimeGrid& grid);

/// |Omega_obs| as 1^T M_obs 1.
double observation_measure(const FemOperators& ops);

/// sqrt((q - Ez)^T M_obs (q - Ez) / |Omega_obs|). Throws when the observation region is empty.
double mean_tracking_error(const FemOperators& ops, const Vector& q, const Vector& z);

/// |mte_unc - mte_opt| / mte_unc. Throws when mte_unc is not positive.
double cloaking_efficiency(double mte_unc, double mte_opt);

/// Tracking error of a transient run at t = T and as the root-mean-square over [0, T].
struct TransientTracking {
    double final_time = 0.0;
    double time_average = 0.0;
};

TransientTracking transient_tracking_error(const FemOperators& ops, const Trajectory& t);

/// Relative distance ||f(t_k) - f_ss|| / ||f_ss|| for every instant.
std::vector<double> steady_distance(const Matrix& f, const Vector& f_ss, const SparseMatrix& M);

/// ||approx - ref|| / ||ref||; 0 when both vanish, +inf when only ref does.
double relative_error(const Vector& ref, const Vector& approx, const SparseMatrix& M);
double relative_error(const Matrix& ref, const Matrix& approx, const SparseMatrix& M, const TimeGrid& grid);

struct FieldErrors {
    double z = 0.0;
    double q = 0.0;
    double p = 0.0;
    double u = 0.0;

    double max() const;
};

/// Per-field relative L2 errors of a ROM solution against the FOM one.
FieldErrors rom_fom_errors(const FemOperators& ops, const SteadySolution& fom, const SteadySolution& rom);
/// Per-field relative L2(0,T;L2) errors. Both trajectories must share the grid.
FieldErrors rom_fom_errors(const FemOperators& ops, const Trajectory& fom, const Trajectory& rom);

struct Timing {
    double fom_seconds = 0.0;
    double rom_seconds = 0.0;

    /// 0 when no ROM timing was recorded.
    double speedup() const { return rom_seconds > 0.0 ? fom_seconds / rom_seconds : 0.0; }
};

/// Wall-clock seconds of `run`, median over `repeats` calls.
double median_seconds(const std::function<void()>& run, int repeats = 5);

struct CloakReport {
    std::string layout;
    std::string regime;  // "steady" or "transient"
    ScenarioParams params;
    ControlWeights weights;

    double mte_uncontrolled = 0.0;
    double mte_optimal = 0.0;
    double efficiency = 0.0;
    // time-averaged variant for transient runs (extension; the final-time value is in mte_optimal)
    std::optional<double> mte_time_average;

    double tracking_cost = 0.0;
    double control_cost = 0.0;

    std::optional<FieldErrors> rom_errors;
    Timing timing;
};

/// MTE, efficiency and cost split of a steady solution.
CloakReport steady_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                          const SteadySolution& s);

/// The same for a transient run; the MTE is taken at t = T against the uncontrolled steady state.
CloakReport transient_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                             const Trajectory& t);

/// Report of `rom` against `fom` with errors and timings filled in.
CloakReport rom_fom_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                           const SteadySolution& fom, const SteadySolution& rom, const Timing& timing);
CloakReport rom_fom_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                           const Trajectory& fom, const Trajectory& rom, const Timing& timing);

/// report.csv: one header line and one row per report; missing values are left empty.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const CloakReport& r);
void write_report_csv(std::ostream& out, const std::vector<CloakReport>& reports);

}  // namespace cloak
