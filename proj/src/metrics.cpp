#include "cloak/metrics.hpp"

#include "cloak/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace cloak {

namespace {

void check_size(Eigen::Index n, const SparseMatrix& M, const char* what) {
    if (M.rows() != M.cols() || n != M.rows())
        throw ValidationError(std::string(what) + ": field has " + std::to_string(n) + " entries, matrix is " +
                              std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

void check_trajectory(const Trajectory& t, const FemOperators& ops, const char* what) {
    const int cols = t.grid.steps + 1;
    auto ok = [&](const Matrix& m, int rows) { return m.rows() == rows && m.cols() == cols; };
    if (!ok(t.z, ops.reference_size()) || !ok(t.q, ops.state_size()) || !ok(t.p, ops.state_size()) ||
        !ok(t.u, ops.control_size()))
        throw ValidationError(std::string(what) + ": trajectory is missing a field or has the wrong shape");
}

void check_steady(const SteadySolution& s, const FemOperators& ops, const char* what) {
    if (s.z.size() != ops.reference_size() || s.q.size() != ops.state_size() || s.p.size() != ops.state_size() ||
        s.u.size() != ops.control_size())
        throw ValidationError(std::string(what) + ": steady solution is missing a field or has the wrong shape");
}

double ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

double l2_norm(const Vector& f, const SparseMatrix& M) {
    check_size(f.size(), M, "l2_norm");
    return std::sqrt(std::max(0.0, f.dot(M * f)));
}

double l2_spacetime_norm(const Matrix& f, const SparseMatrix& M, const TimeGrid& grid) {
    grid.validate();
    check_size(f.rows(), M, "l2_spacetime_norm");
    if (f.cols() != grid.steps + 1)
        throw ValidationError("l2_spacetime_norm: expected " + std::to_string(grid.steps + 1) + " columns, got " +
                              std::to_string(f.cols()));
    double sum = 0.0;
    for (int k = 0; k <= grid.steps; ++k) sum += grid.weight(k) * f.col(k).dot(M * f.col(k));
    return std::sqrt(std::max(0.0, sum));
}

double observation_measure(const FemOperators& ops) { return ops.M_obs.sum(); }

double mean_tracking_error(const FemOperators& ops, const Vector& q, const Vector& z) {
    check_size(q.size(), ops.M_obs, "mean_tracking_error");
    if (z.size() != ops.reference_size()) throw ValidationError("mean_tracking_error: reference field has the wrong size");
    const double area = observation_measure(ops);
    if (!(area > 0.0)) throw ValidationError("mean_tracking_error: observation region has zero measure");
    const Vector e = q - ops.E * z;
    return std::sqrt(std::max(0.0, e.dot(ops.M_obs * e)) / area);
}

double cloaking_efficiency(double mte_unc, double mte_opt) {
    if (!(mte_unc > 0.0)) throw ValidationError("cloaking efficiency is undefined when the uncontrolled MTE is zero");
    return std::abs(mte_unc - mte_opt) / mte_unc;
}

TransientTracking transient_tracking_error(const FemOperators& ops, const Trajectory& t) {
    check_trajectory(t, ops, "transient_tracking_error");
    const int N = t.grid.steps;
    TransientTracking out;
    out.final_time = mean_tracking_error(ops, t.q.col(N), t.z.col(N));
    double sum = 0.0;
    for (int k = 0; k <= N; ++k) {
        const double m = mean_tracking_error(ops, t.q.col(k), t.z.col(k));
        sum += t.grid.weight(k) * m * m;
    }
    out.time_average = std::sqrt(sum / t.grid.horizon);
    return out;
}

std::vector<double> steady_distance(const Matrix& f, const Vector& f_ss, const SparseMatrix& M) {
    check_size(f.rows(), M, "steady_distance");
    if (f_ss.size() != f.rows()) throw ValidationError("steady_distance: steady field has the wrong size");
    const double ref = l2_norm(f_ss, M);
    std::vector<double> out(f.cols());
    for (Eigen::Index k = 0; k < f.cols(); ++k) out[k] = ratio(l2_norm(f.col(k) - f_ss, M), ref);
    return out;
}

double relative_error(const Vector& ref, const Vector& approx, const SparseMatrix& M) {
    if (ref.size() != approx.size()) throw ValidationError("relative_error: fields differ in size");
    return ratio(l2_norm(approx - ref, M), l2_norm(ref, M));
}

double relative_error(const Matrix& ref, const Matrix& approx, const SparseMatrix& M, const TimeGrid& grid) {
    if (ref.rows() != approx.rows() || ref.cols() != approx.cols())
        throw ValidationError("relative_error: trajectories differ in shape");
    return ratio(l2_spacetime_norm(approx - ref, M, grid), l2_spacetime_norm(ref, M, grid));
}

double FieldErrors::max() const { return std::max({z, q, p, u}); }

FieldErrors rom_fom_errors(const FemOperators& ops, const SteadySolution& fom, const SteadySolution& rom) {
    check_steady(fom, ops, "rom_fom_errors (full order)");
    check_steady(rom, ops, "rom_fom_errors (reduced)");
    return {relative_error(fom.z, rom.z, ops.M), relative_error(fom.q, rom.q, ops.M_tilde),
            relative_error(fom.p, rom.p, ops.M_tilde), relative_error(fom.u, rom.u, ops.M_u)};
}

FieldErrors rom_fom_errors(const FemOperators& ops, const Trajectory& fom, const Trajectory& rom) {
    check_trajectory(fom, ops, "rom_fom_errors (full order)");
    check_trajectory(rom, ops, "rom_fom_errors (reduced)");
    if (fom.grid.steps != rom.grid.steps || fom.grid.horizon != rom.grid.horizon)
        throw ValidationError("rom_fom_errors: trajectories live on different time grids");
    const TimeGrid& g = fom.grid;
    return {relative_error(fom.z, rom.z, ops.M, g), relative_error(fom.q, rom.q, ops.M_tilde, g),
            relative_error(fom.p, rom.p, ops.M_tilde, g), relative_error(fom.u, rom.u, ops.M_u, g)};
}

double median_seconds(const std::function<void()>& run, int repeats) {
    if (repeats < 1) throw ValidationError("median_seconds: repeats must be >= 1");
    std::vector<double> t;
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        run();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    const int n = repeats;
    return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

CloakReport steady_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                          const SteadySolution& s) {
    check_steady(s, ops, "steady_report");
    CloakReport r;
    r.regime = "steady";
    r.params = params;
    r.weights = w;
    r.mte_uncontrolled = mean_tracking_error(ops, solve_uncontrolled_steady(ops, params), s.z);
    r.mte_optimal = mean_tracking_error(ops, s.q, s.z);
    r.efficiency = cloaking_efficiency(r.mte_uncontrolled, r.mte_optimal);
    r.tracking_cost = steady_tracking(ops, s.z, s.q);
    r.control_cost = steady_control(ops, w, s.u);
    return r;
}

CloakReport transient_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                             const Trajectory& t) {
    check_trajectory(t, ops, "transient_report");
    const int N = t.grid.steps;
    CloakReport r;
    r.regime = "transient";
    r.params = params;
    r.weights = w;
    r.mte_uncontrolled = mean_tracking_error(ops, solve_uncontrolled_steady(ops, params), solve_reference_steady(ops, params));
    const TransientTracking tt = transient_tracking_error(ops, t);
    r.mte_optimal = tt.final_time;
    r.mte_time_average = tt.time_average;
    r.efficiency = cloaking_efficiency(r.mte_uncontrolled, r.mte_optimal);
    const SparseMatrix P = ops.control_matrix(w);
    for (int k = 0; k <= N; ++k) {
        r.tracking_cost += t.grid.weight(k) * steady_tracking(ops, t.z.col(k), t.q.col(k));
        r.control_cost += t.grid.weight(k) * 0.5 * t.u.col(k).dot(P * t.u.col(k));
    }
    return r;
}

CloakReport rom_fom_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                           const SteadySolution& fom, const SteadySolution& rom, const Timing& timing) {
    CloakReport r = steady_report(ops, params, w, rom);
    r.rom_errors = rom_fom_errors(ops, fom, rom);
    r.timing = timing;
    return r;
}

CloakReport rom_fom_report(const FemOperators& ops, const ScenarioParams& params, const ControlWeights& w,
                           const Trajectory& fom, const Trajectory& rom, const Timing& timing) {
    CloakReport r = transient_report(ops, params, w, rom);
    r.rom_errors = rom_fom_errors(ops, fom, rom);
    r.timing = timing;
    return r;
}

void write_report_header(std::ostream& out) {
    out << "layout,regime,diffusivity,intensity,obstacle_temperature,beta,beta_g,mte_uncontrolled,mte_optimal,"
           "efficiency,mte_time_average,tracking_cost,control_cost,err_z,err_q,err_p,err_u,fom_seconds,rom_seconds,"
           "speedup\n";
}

void write_report_row(std::ostream& out, const CloakReport& r) {
    auto f = [](double v) { return format_double(v); };
    out << r.layout << ',' << r.regime << ',' << f(r.params.diffusivity) << ',' << f(r.params.intensity) << ','
        << f(r.params.obstacle_temperature) << ',' << f(r.weights.beta) << ',' << f(r.weights.beta_g) << ','
        << f(r.mte_uncontrolled) << ',' << f(r.mte_optimal) << ',' << f(r.efficiency) << ','
        << optional_cell(r.mte_time_average) << ',' << f(r.tracking_cost) << ',' << f(r.control_cost);
    if (r.rom_errors)
        out << ',' << f(r.rom_errors->z) << ',' << f(r.rom_errors->q) << ',' << f(r.rom_errors->p) << ','
            << f(r.rom_errors->u);
    else
        out << ",,,,";
    auto timing = [&](double v) { return v > 0.0 ? f(v) : std::string(); };
    out << ',' << timing(r.timing.fom_seconds) << ',' << timing(r.timing.rom_seconds) << ','
        << timing(r.timing.speedup()) << '\n';
}

void write_report_csv(std::ostream& out, const std::vector<CloakReport>& reports) {
    write_report_header(out);
    for (const auto& r : reports) write_report_row(out, r);
}

}  // namespace cloak
