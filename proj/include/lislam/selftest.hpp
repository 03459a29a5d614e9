/**
 * @file selftest.hpp
 * @brief Fast runtime invariant checks behind `lislam_cli selftest`.
 *
 * These are smoke-level versions of the unit and acceptance suites, cheap
 * enough to run on any install.
 */
#pragma once

#include "lislam/harness.hpp"

#include <random>
#include <string>
#include <vector>

namespace lislam {

struct SelfTestResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    return {nd(rng), nd(rng), nd(rng)};
}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    return m;
}

/// Uniformly distributed rotation (Haar measure) via a unit quaternion.
inline Rotation random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
    q.normalize();
    return q.toRotationMatrix();
}

/// A_Z = I + 0.3 * noise, redrawn until comfortably invertible.
inline Matrix random_az(std::mt19937_64& rng, Index cols)
{
    for (;;) {
        Matrix a = Matrix::Identity(cols, cols) + random_matrix(rng, cols, cols, 0.3);
        if (min_singular_value(a) > 0.2) return a;
    }
}

inline ObserverState random_observer_state(std::mt19937_64& rng, Index n)
{
    return {SEn3(random_rotation(rng), random_matrix(rng, 3, n + 2)), random_matrix(rng, 3, n + 2), random_az(rng, n + 2)};
}

inline std::vector<SelfTestResult> run_selftest(std::uint64_t seed = 7)
{
    std::vector<SelfTestResult> out;
    std::mt19937_64 rng(seed);
    auto record = [&](std::string name, bool pass, const std::string& detail) {
        out.push_back({std::move(name), pass, detail});
    };
    auto num = [](double v) { return format_double(v); };

    {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const Index m = 7;
            const SIMn3 a(random_rotation(rng), random_matrix(rng, 3, m), random_az(rng, m));
            const SIMn3 b(random_rotation(rng), random_matrix(rng, 3, m), random_az(rng, m));
            const SIMn3 c(random_rotation(rng), random_matrix(rng, 3, m), random_az(rng, m));
            worst = std::max(worst, (((a * b) * c).matrix() - (a * (b * c)).matrix()).norm());
            worst = std::max(worst, ((a * a.inverse()).matrix() - Matrix::Identity(m + 3, m + 3)).norm());
        }
        record("group axioms (associativity, inverse)", worst < 1e-9, "max residual " + num(worst));
    }

    {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const Index m = 7;
            const SIMTangent xi{random_vec3(rng), random_matrix(rng, 3, m), random_matrix(rng, m, m, 0.5)};
            const Matrix dense = (0.01 * xi.matrix()).exp();
            worst = std::max(worst, (tangent_exp(xi, 0.01).matrix() - dense).norm());
        }
        record("tangent exponential vs dense matrix exponential", worst < 1e-12, "max residual " + num(worst));
    }

    {
        const Gains g = Gains::reference();
        const GainCheck gc = check_gain_condition(g, 5);
        record("gain condition at reference gains", gc.feasible && std::abs(gc.margin - 0.390) <= 1e-3,
               "margin " + num(gc.margin));
        const PBoundCheck pc = check_p_bounds(PMatrix::from_az(reference_az0(5)), p_bounds(g, 5));
        record("reference A_Z(0) inside P intervals", pc.ok(), "schur det " + num(pc.schur_det));
    }

    {
        const TpeReport rep = check_tpe(GnssSchedule::reference_default(), 10.0, 5.0, 40.0);
        record("reference GNSS schedule is persistently exciting", rep.dwell_ok,
               "minimum on-time per window " + num(rep.min_dwell));
    }

    {
        const Index n = 5;
        const SystemParams params = SystemParams::circle_scenario();
        SEn3 truth = circle_initial_state(params);
        ObserverState obs = random_observer_state(rng, n);
        const ErrorState e0 = compute_error(truth, obs);
        const TangentCorrection zero = TangentCorrection::zero(n + 2);
        const double dt = 5e-4;
        for (int k = 0; k < 4000; ++k) {
            const double t = k * dt;
            const ImuInput u{Vec3(std::sin(t), 0.3, std::cos(2 * t)), Vec3(0.5 * t, 9.81, -std::sin(t))};
            obs = observer_step(obs, u, zero, params.gravity, dt);
            truth = propagate_truth(truth, u, params.gravity, dt);
        }
        const ErrorState e1 = compute_error(truth, obs);
        const double drift = std::max((e1.RE - e0.RE).norm(), (e1.VE - e0.VE).norm());
        record("synchrony with zero corrections (2 s)", drift < 1e-6, "error drift " + num(drift));
    }

    {
        const Gains g = Gains::reference();
        const Vec3 mref = Vec3::UnitX();
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 200; ++i) {
            const Index n = 5;
            const ObserverState obs = random_observer_state(rng, n);
            const SEn3 truth(random_rotation(rng), random_matrix(rng, 3, n + 2));
            const AzInverse ai = az_inverse(obs.AZ());
            const ErrorState e = compute_error(truth, obs);
            const GnssReading gr{position_of(truth), 1};
            const TangentCorrection cx = gnss_correction(obs, ai, gr.yx, 1, g);
            const TangentCorrection cp = landmark_correction(obs, ai, measure_landmarks(truth), g);
            const TangentCorrection cm = magnetometer_correction(obs, truth.R().transpose() * mref, g, mref);
            worst = std::max(worst, lyapunov_rate(e, cx) - gnss_rate_bound(obs, ai, e, gr.yx, 1, g));
            worst = std::max(worst, lyapunov_rate(e, cp) - landmark_rate_bound(obs, ai, e, g));
            worst = std::max(worst, std::abs(lyapunov_rate(e, cm) - magnetometer_rate(e, g, mref)));
        }
        record("per-sensor Lyapunov rate bounds", worst <= 1e-8, "worst excess " + num(worst));
    }

    {
        RunConfig cfg = RunConfig::reference();
        cfg.horizon = 1.0;
        cfg.log_interval = 100;
        const RunResult r = run(cfg);
        const bool ok = r.summary["max_lyap_increase"].get<double>() <= 1e-6 &&
                        r.summary["p_bound_violations"].get<std::int64_t>() == 0;
        record("reference run, first second", ok,
               "max Lyapunov increase " + num(r.summary["max_lyap_increase"].get<double>()));
    }
    return out;
}

}  // namespace lislam
