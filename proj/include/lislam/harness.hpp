/**
 * @file harness.hpp
 * @brief Simulation/observer run loop, monitors, and CSV / JSON export.
 */
#pragma once

#include "lislam/metrics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>

namespace lislam {

enum class AttitudeInit { reference_literal, reference_normalized, rotvec };
enum class AzSource { reference_literal, factorized };
enum class SeedPreset { reference, midpoint, custom };

struct TrajectorySpec {
    enum class Kind { circle, samples, custom };
    Kind kind = Kind::circle;
    /// rows of (t, wx, wy, wz, ax, ay, az), zero-order hold between rows
    std::vector<std::array<double, 7>> samples;
    InputProfile custom;
    Vec3 initial_rotvec = Vec3::Zero();
    Vec3 initial_velocity = Vec3::UnitY();
    Vec3 initial_position = Vec3::UnitX() + Vec3::UnitZ();
};

struct InitialEstimate {
    AttitudeInit attitude = AttitudeInit::reference_literal;
    Vec3 attitude_rotvec = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 position = Vec3::Zero();
    std::vector<Vec3> landmarks;  ///< empty: all zero
    Matrix vz;                    ///< empty: zero
    AzSource az_source = AzSource::reference_literal;
    SeedPreset seeds = SeedPreset::reference;
    PSeeds custom_seeds{};
};

struct RunConfig {
    SystemParams params = SystemParams::circle_scenario();
    TrajectorySpec trajectory;
    Gains gains = Gains::reference();
    GnssSchedule schedule = GnssSchedule::reference_default();
    double dt = 5e-4;
    double horizon = 40.0;
    int log_interval = 4;
    InitialEstimate estimate;
    NoiseModel noise;
    std::uint64_t seed = 1;
    bool allow_infeasible = false;
    bool record_lyapunov = false;  ///< keep L(t_k) for every step in RunResult
    bool monitors = true;          ///< per-step P and V_Z checks; off for long batch runs

    /// The circular reference experiment: 40 s at 2000 Hz, 5 landmarks, periodic GNSS.
    static RunConfig reference() { return {}; }

    void validate() const
    {
        params.validate();
        gains.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("RunConfig: dt must be positive");
        if (!(horizon >= 0.0)) throw std::invalid_argument("RunConfig: horizon must be non-negative");
        if (log_interval < 1) throw std::invalid_argument("RunConfig: log_interval must be >= 1");
    }
};

/// Raised when a run is refused or aborted; carries the reason for the CLI.
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline InputProfile make_input_profile(const RunConfig& cfg)
{
    const double g = cfg.params.gravity;
    switch (cfg.trajectory.kind) {
        case TrajectorySpec::Kind::circle:
            return [g](double t) { return circular_trajectory_input(t, g); };
        case TrajectorySpec::Kind::samples: {
            auto samples = cfg.trajectory.samples;
            if (samples.empty()) throw std::invalid_argument("trajectory: sample list is empty");
            return [samples](double t) {
                auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                           [](double v, const std::array<double, 7>& s) { return v < s[0]; });
                const auto& s = (it == samples.begin()) ? *it : *(it - 1);
                return ImuInput{{s[1], s[2], s[3]}, {s[4], s[5], s[6]}};
            };
        }
        case TrajectorySpec::Kind::custom:
            if (!cfg.trajectory.custom) throw std::invalid_argument("trajectory: custom profile not set");
            return cfg.trajectory.custom;
    }
    throw std::logic_error("unreachable");
}

inline SEn3 make_initial_truth(const RunConfig& cfg)
{
    return {so3_exp(cfg.trajectory.initial_rotvec),
            stack_translations(cfg.trajectory.initial_velocity, cfg.trajectory.initial_position, cfg.params.landmarks)};
}

inline Matrix make_initial_az(const RunConfig& cfg)
{
    const Index n = cfg.params.n();
    if (cfg.estimate.az_source == AzSource::reference_literal) return reference_az0(n);
    PSeeds s{};
    switch (cfg.estimate.seeds) {
        case SeedPreset::reference: s = reference_seeds(n); break;
        case SeedPreset::midpoint: s = midpoint_seeds(cfg.gains, n); break;
        case SeedPreset::custom: s = cfg.estimate.custom_seeds; break;
    }
    return az_from_P0(build_P0(cfg.gains, n, s.s_x, s.s_vx, s.s_v));
}

inline ObserverState make_initial_observer(const RunConfig& cfg)
{
    const Index n = cfg.params.n();
    Rotation r;
    switch (cfg.estimate.attitude) {
        case AttitudeInit::reference_literal: r = reference_initial_attitude(false); break;
        case AttitudeInit::reference_normalized: r = reference_initial_attitude(true); break;
        case AttitudeInit::rotvec: r = so3_exp(cfg.estimate.attitude_rotvec); break;
    }
    std::vector<Vec3> lms = cfg.estimate.landmarks;
    if (lms.empty()) lms.assign(static_cast<std::size_t>(n), Vec3::Zero());
    if (static_cast<Index>(lms.size()) != n) throw std::invalid_argument("estimate: landmark count mismatch");
    Matrix vz = cfg.estimate.vz.size() == 0 ? Matrix::Zero(3, n + 2) : cfg.estimate.vz;
    if (vz.rows() != 3 || vz.cols() != n + 2) throw std::invalid_argument("estimate: V_Z must be 3 x (n+2)");
    return {SEn3(r, stack_translations(cfg.estimate.velocity, cfg.estimate.position, lms)), std::move(vz),
            make_initial_az(cfg)};
}

struct RunResult {
    std::vector<MetricsRow> rows;
    nlohmann::json summary;
    std::vector<double> lyapunov_trace;  ///< filled when RunConfig::record_lyapunov is set
};

/**
 * Simulate truth and observer side by side.
 *
 * Rows are logged at every log_interval-th step and once more at the final
 * time. Monitors run on every step: Lyapunov increments, V_E contraction
 * against e^{-2qt}, P-block intervals, Schur determinant, A_Z conditioning and
 * the V_Z drift inequality. A full eigensolve of P runs every 1000 steps.
 */
inline RunResult run(const RunConfig& cfg)
{
    using nlohmann::json;
    const auto wall_start = std::chrono::steady_clock::now();
    cfg.validate();
    const Index n = cfg.params.n();
    const GainCheck gc = check_gain_condition(cfg.gains, n);
    if (!gc.feasible && !cfg.allow_infeasible) {
        std::ostringstream os;
        os << "infeasible gains: condition margin " << gc.margin << " <= 0 (use --allow-infeasible to override)";
        throw RunError(os.str());
    }
    const TpeReport tpe = check_tpe(cfg.schedule, cfg.gains.T, cfg.gains.tau, cfg.horizon);
    if (!tpe.dwell_ok && !cfg.allow_infeasible) {
        std::ostringstream os;
        os << "GNSS schedule is not persistently exciting for T = " << cfg.gains.T << ", tau = " << cfg.gains.tau
           << " (minimum on-time " << tpe.min_dwell << " at t = " << tpe.worst_dwell_t << ")";
        throw RunError(os.str());
    }

    const PBounds bounds = p_bounds(cfg.gains, n);
    const InputProfile input = make_input_profile(cfg);
    SEn3 truth = make_initial_truth(cfg);
    ObserverState obs = make_initial_observer(cfg);
    std::mt19937_64 rng(cfg.seed);
    const double g = cfg.params.gravity;
    const auto steps = static_cast<std::int64_t>(std::llround(cfg.horizon / cfg.dt));

    RunResult res;
    json violations = json::array();
    std::int64_t p_violations = 0;
    auto add_violation = [&](const std::string& kind, double t, double value) {
        ++p_violations;
        if (violations.size() < 100) violations.push_back({{"kind", kind}, {"t", t}, {"value", value}});
    };

    const ErrorState e0 = compute_error(truth, obs);
    const double ve0 = e0.VE.squaredNorm();
    double lyap_prev = lyapunov(e0);
    double max_lyap_increase = -std::numeric_limits<double>::infinity();
    std::int64_t lyap_increase_count = 0;
    double max_contraction_ratio = 0.0;
    double sup_x = 0.0, sup_p = 0.0, sup_m = 0.0, sup_total = 0.0;
    double min_schur = std::numeric_limits<double>::infinity();
    double max_sp_dev = 0.0, max_asym = 0.0;
    double min_sv = std::numeric_limits<double>::infinity();
    double min_eig_p = std::numeric_limits<double>::infinity();
    double min_sx = min_schur, max_sx = -min_schur, min_svx = min_schur, max_svx = -min_schur, min_sv_ = min_schur,
           max_sv_ = -min_schur;
    double max_vz = 0.0, min_m_margin = std::numeric_limits<double>::infinity();
    std::int64_t vz_bound_violations = 0, vz_printed_bound_violations = 0;
    if (cfg.record_lyapunov) res.lyapunov_trace.push_back(lyap_prev);

    MetricsRow first{};
    bool have_first = false;
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        AzInverse ai;
        try {
            ai = az_inverse(obs.AZ());
        } catch (const std::domain_error& ex) {
            throw RunError("aborted at step " + std::to_string(k) + ": " + ex.what());
        }
        const MeasurementBundle meas = measure_all(truth, cfg.params, cfg.schedule, t, cfg.noise, &rng);
        const SensorCorrections parts = compute_corrections(obs, ai, meas, cfg.gains, cfg.params.mag_reference);
        const TangentCorrection total = parts.total();

        sup_x = std::max(sup_x, parts.gnss.norm());
        sup_p = std::max(sup_p, parts.landmark.norm());
        sup_m = std::max(sup_m, parts.magnetometer.norm());
        sup_total = std::max(sup_total, total.norm());
        min_sv = std::min(min_sv, ai.min_sv);

        if (cfg.monitors) {
            const PMatrix p = PMatrix::from_az(obs.AZ());
            const PBoundCheck pc = check_p_bounds(p, bounds);
            if (!pc.s_x_ok) add_violation("s_x", t, p.s_x());
            if (!pc.s_vx_ok) add_violation("s_vx", t, p.s_vx());
            if (!pc.s_v_ok) add_violation("s_v", t, p.s_v());
            if (!pc.schur_ok) add_violation("schur_det", t, pc.schur_det);
            min_schur = std::min(min_schur, pc.schur_det);
            max_sp_dev = std::max(max_sp_dev, pc.sp_deviation);
            max_asym = std::max(max_asym, p.asymmetry());
            min_sx = std::min(min_sx, p.s_x());
            max_sx = std::max(max_sx, p.s_x());
            min_svx = std::min(min_svx, p.s_vx());
            max_svx = std::max(max_svx, p.s_vx());
            min_sv_ = std::min(min_sv_, p.s_v());
            max_sv_ = std::max(max_sv_, p.s_v());
            if (k % 1000 == 0) min_eig_p = std::min(min_eig_p, p.min_eigenvalue());

            const VzDrift drift = vz_drift(obs, ai, meas.sigma, cfg.gains, meas.yx, g);
            const Matrix& vz = obs.VZ();
            const double vz_norm = vz.norm();
            const double dvz2 = 2.0 * (vz.array() * (-vz * drift.M + drift.B).array()).sum();
            const double bnorm = drift.B.norm();
            const double tol = 1e-9 * (1.0 + vz_norm * bnorm + vz_norm * vz_norm);
            if (dvz2 > 2.0 * vz_norm * bnorm - 2.0 * cfg.gains.q * vz_norm * vz_norm + tol) ++vz_bound_violations;
            if (dvz2 > vz_norm * bnorm - cfg.gains.q * vz_norm * vz_norm + tol) ++vz_printed_bound_violations;
            max_vz = std::max(max_vz, vz_norm);
            min_m_margin = std::min(min_m_margin, drift.min_eig_M_minus_q);
        }

        const bool log_now = (k < steps && k % cfg.log_interval == 0) || (k == steps && steps > 0);
        if (log_now || !have_first) {
            MetricsRow row = metrics_row(truth, obs, ai, parts, t, meas.sigma, gc.margin);
            if (!have_first) {
                first = row;
                have_first = true;
            }
            if (log_now) res.rows.push_back(std::move(row));
        }
        if (k == steps) break;

        const ImuInput u = input(t);
        try {
            obs = observer_step(obs, ai, u, total, g, cfg.dt);
        } catch (const std::domain_error& ex) {
            throw RunError("aborted at step " + std::to_string(k) + ": " + ex.what());
        }
        truth = propagate_truth(truth, u, g, cfg.dt);

        const ErrorState e = compute_error(truth, obs);
        const double lyap = lyapunov(e);
        const double inc = lyap - lyap_prev;
        max_lyap_increase = std::max(max_lyap_increase, inc);
        if (inc > 1e-6) ++lyap_increase_count;
        lyap_prev = lyap;
        if (cfg.record_lyapunov) res.lyapunov_trace.push_back(lyap);
        const double t1 = t + cfg.dt;
        if (ve0 > 0.0)
            max_contraction_ratio =
                std::max(max_contraction_ratio, e.VE.squaredNorm() / (ve0 * std::exp(-2.0 * cfg.gains.q * t1)));
    }

    const MetricsRow& last = res.rows.empty() ? first : res.rows.back();
    auto max_of = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
    json& s = res.summary;
    s["steps"] = steps;
    s["dt"] = cfg.dt;
    s["horizon"] = cfg.horizon;
    s["n"] = n;
    s["margin"] = gc.margin;
    s["feasible"] = gc.feasible ? 1 : 0;
    s["tpe_T"] = cfg.gains.T;
    s["tpe_tau"] = cfg.gains.tau;
    s["tpe_dwell_ok"] = tpe.dwell_ok ? 1 : 0;
    s["tpe_contiguous_ok"] = tpe.contiguous_ok ? 1 : 0;
    s["initial_att_err"] = first.att_err;
    s["initial_yaw_err"] = first.yaw_err;
    s["initial_vel_err"] = first.vel_err;
    s["initial_pos_err"] = first.pos_err;
    s["initial_lm_err_max"] = max_of(first.lm_err);
    s["initial_lyap"] = first.lyap;
    s["initial_ve_sq"] = first.ve_sq;
    s["final_t"] = last.t;
    s["final_att_err"] = last.att_err;
    s["final_yaw_err"] = last.yaw_err;
    s["final_vel_err"] = last.vel_err;
    s["final_pos_err"] = last.pos_err;
    s["final_lm_err_max"] = max_of(last.lm_err);
    s["final_lm_err_rms"] = last.lm_err_rms;
    s["final_lyap"] = last.lyap;
    s["final_ve_sq"] = last.ve_sq;
    s["max_lyap_increase"] = steps > 0 ? max_lyap_increase : 0.0;
    s["lyap_increase_steps"] = lyap_increase_count;
    s["max_ve_contraction_ratio"] = max_contraction_ratio;
    s["sup_corr_gnss"] = sup_x;
    s["sup_corr_landmark"] = sup_p;
    s["sup_corr_mag"] = sup_m;
    s["sup_corr_total"] = sup_total;
    s["p_bound_violations"] = p_violations;
    s["min_schur_det"] = min_schur;
    s["schur_det_bound"] = bounds.schur_det_min;
    s["max_sp_deviation"] = max_sp_dev;
    s["max_p_asymmetry"] = max_asym;
    s["min_sv_az"] = min_sv;
    s["min_eig_p"] = min_eig_p;
    s["min_s_x"] = min_sx;
    s["max_s_x"] = max_sx;
    s["min_s_vx"] = min_svx;
    s["max_s_vx"] = max_svx;
    s["min_s_v"] = min_sv_;
    s["max_s_v"] = max_sv_;
    s["max_vz_norm"] = max_vz;
    s["min_eig_m_minus_q"] = min_m_margin;
    s["vz_bound_violations"] = vz_bound_violations;
    s["vz_printed_bound_violations"] = vz_printed_bound_violations;
    s["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    s["violations"] = violations;
    return res;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline void write_csv(std::ostream& os, Index n, const std::vector<MetricsRow>& rows)
{
    const auto header = metrics_header(n);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        const auto vals = metrics_values(r);
        for (std::size_t i = 0; i < vals.size(); ++i) os << (i ? "," : "") << format_double(vals[i]);
        os << '\n';
    }
}

/// Writes metrics.csv and summary.json into `dir` (created if missing).
inline void write_outputs(const std::filesystem::path& dir, Index n, const RunResult& res)
{
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw std::runtime_error("cannot open " + (dir / "metrics.csv").string());
    write_csv(csv, n, res.rows);
    std::ofstream js(dir / "summary.json");
    if (!js) throw std::runtime_error("cannot open " + (dir / "summary.json").string());
    js << res.summary.dump(2) << '\n';
}

}  // namespace lislam
