/**
 * @file slam_system.hpp
 * @brief Ground-truth landmark-inertial system: inputs, propagation, sensors
 *        and the GNSS availability schedule.
 */
#pragma once

#include "lislam/lie_group.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace lislam {

struct SystemParams {
    double gravity = 9.81;
    Vec3 mag_reference = Vec3::UnitX();
    std::vector<Vec3> landmarks;

    Index n() const { return static_cast<Index>(landmarks.size()); }

    void validate() const
    {
        if (landmarks.empty()) throw std::invalid_argument("SystemParams: at least one landmark is required");
        if (!(std::abs(mag_reference.norm() - 1.0) < 1e-12))
            throw std::invalid_argument("SystemParams: magnetic reference direction must be a unit vector");
        if (!std::isfinite(gravity)) throw std::invalid_argument("SystemParams: gravity must be finite");
    }

    /// The five ground-plane landmarks of the circular reference scenario.
    static SystemParams circle_scenario()
    {
        SystemParams p;
        p.landmarks = {{0.5, 0.5, 0.0}, {0.5, -0.5, 0.0}, {-1.0, 0.5, 0.0}, {1.0, 1.0, 0.0}, {-1.2, -1.2, 0.0}};
        return p;
    }
};

/// Body-frame angular velocity (rad/s) and proper acceleration (m/s^2).
struct ImuInput {
    Vec3 omega = Vec3::Zero();
    Vec3 accel = Vec3::Zero();
};

using InputProfile = std::function<ImuInput(double)>;

/// Constant inputs of the 1 m radius, 1 m/s circle flown at 1 m height.
inline ImuInput circular_trajectory_input(double /*t*/, double gravity = 9.81)
{
    return {Vec3::UnitZ(), -Vec3::UnitX() - gravity * Vec3::UnitZ()};
}

/// State matrix V = (v, x, p_1, ..., p_n).
inline Matrix stack_translations(const Vec3& v, const Vec3& x, const std::vector<Vec3>& landmarks)
{
    Matrix m(3, static_cast<Index>(landmarks.size()) + 2);
    m.col(0) = v;
    m.col(1) = x;
    for (std::size_t i = 0; i < landmarks.size(); ++i) m.col(static_cast<Index>(i) + 2) = landmarks[i];
    return m;
}

/// R(0) = I, v(0) = e2, x(0) = e1 + e3.
inline SEn3 circle_initial_state(const SystemParams& params)
{
    return {Mat3::Identity(), stack_translations(Vec3::UnitY(), Vec3::UnitX() + Vec3::UnitZ(), params.landmarks)};
}

/// Analytic circle: x(t) = (cos t, sin t, 1), v(t) = (-sin t, cos t, 0), R(t) = Rz(t).
struct CircleTruth {
    Mat3 R;
    Vec3 v;
    Vec3 x;
};

inline CircleTruth circle_truth(double t)
{
    return {so3_exp(Vec3::UnitZ(), t), {-std::sin(t), std::cos(t), 0.0}, {std::cos(t), std::sin(t), 1.0}};
}

/// X+ = exp(dt (G + N)) X exp(dt (U - N)).
inline SEn3 propagate_truth(const SEn3& state, const ImuInput& u, double gravity, double dt)
{
    const Index n = state.cols() - 2;
    return mixed_euler_step(state, gravity_and_coupling(gravity, n), input_minus_coupling(u.omega, u.accel, n), dt);
}

inline Vec3 velocity_of(const SEn3& x) { return x.V().col(0); }
inline Vec3 position_of(const SEn3& x) { return x.V().col(1); }
inline Vec3 landmark_of(const SEn3& x, Index i) { return x.V().col(i + 2); }

/// y_i = R^T (p_i - x), one column per landmark.
inline Matrix measure_landmarks(const SEn3& state)
{
    const Index n = state.cols() - 2;
    Matrix y(3, n);
    const Vec3 x = position_of(state);
    for (Index i = 0; i < n; ++i) y.col(i) = state.R().transpose() * (landmark_of(state, i) - x);
    return y;
}

/// Matrix form Y_p = -R^T V C.
inline Matrix measure_landmarks_matrix_form(const SEn3& state)
{
    return -state.R().transpose() * state.V() * landmark_selector(state.cols() - 2);
}

inline Vec3 measure_magnetometer(const SEn3& state, const SystemParams& params)
{
    return state.R().transpose() * params.mag_reference;
}

struct TimeWindow {
    double begin;
    double end;
};

/**
 * GNSS availability sigma(t) in {0, 1} together with the declared
 * persistence constants (T, tau).
 *
 * periodic:  on over [start + j period, start + j period + on_duration), j >= 0
 * windows:   on over each listed [begin, end)
 * always_on: sigma = 1
 */
class GnssSchedule {
public:
    enum class Mode { periodic, windows, always_on };

    static GnssSchedule periodic(double start, double on_duration, double period)
    {
        if (!(on_duration > 0.0 && period > on_duration && start >= 0.0))
            throw std::invalid_argument("GnssSchedule::periodic: need start >= 0 and 0 < on_duration < period");
        GnssSchedule s(Mode::periodic, period, on_duration);
        s.start_ = start;
        s.on_ = on_duration;
        s.period_ = period;
        return s;
    }

    static GnssSchedule windows(std::vector<TimeWindow> w, double T, double tau)
    {
        for (const auto& win : w)
            if (!(win.end > win.begin)) throw std::invalid_argument("GnssSchedule::windows: empty or reversed window");
        std::sort(w.begin(), w.end(), [](const TimeWindow& a, const TimeWindow& b) { return a.begin < b.begin; });
        GnssSchedule s(Mode::windows, T, tau);
        s.windows_ = std::move(w);
        return s;
    }

    static GnssSchedule always_on(double T = 1.0, double tau = 0.99)
    {
        return GnssSchedule(Mode::always_on, T, tau);
    }

    /// The reference schedule: 5 s on, 5 s off, starting at 5 s (T = 10, tau = 5).
    static GnssSchedule reference_default() { return periodic(5.0, 5.0, 10.0); }

    Mode mode() const { return mode_; }
    double T() const { return T_; }
    double tau() const { return tau_; }
    double start() const { return start_; }
    double on_duration() const { return on_; }
    double period() const { return period_; }
    const std::vector<TimeWindow>& listed_windows() const { return windows_; }

    void set_constants(double T, double tau)
    {
        if (!(T > tau && tau > 0.0)) throw std::invalid_argument("GnssSchedule: need T > tau > 0");
        T_ = T;
        tau_ = tau;
    }

    int sigma(double t) const
    {
        switch (mode_) {
            case Mode::always_on:
                return 1;
            case Mode::periodic: {
                if (t < start_) return 0;
                const double phase = std::fmod(t - start_, period_);
                return phase < on_ ? 1 : 0;
            }
            case Mode::windows:
                for (const auto& w : windows_)
                    if (t >= w.begin && t < w.end) return 1;
                return 0;
        }
        return 0;
    }

    /// Merged on-intervals clipped to [0, horizon).
    std::vector<TimeWindow> on_intervals(double horizon) const
    {
        std::vector<TimeWindow> raw;
        switch (mode_) {
            case Mode::always_on:
                raw.push_back({0.0, horizon});
                break;
            case Mode::periodic:
                for (double b = start_; b < horizon; b += period_) raw.push_back({b, b + on_});
                break;
            case Mode::windows:
                raw = windows_;
                break;
        }
        std::vector<TimeWindow> out;
        for (auto w : raw) {
            w.begin = std::max(w.begin, 0.0);
            w.end = std::min(w.end, horizon);
            if (w.end <= w.begin) continue;
            if (!out.empty() && w.begin <= out.back().end)
                out.back().end = std::max(out.back().end, w.end);
            else
                out.push_back(w);
        }
        return out;
    }

private:
    GnssSchedule(Mode m, double T, double tau) : mode_(m) { set_constants(T, tau); }

    Mode mode_;
    double T_ = 0.0;
    double tau_ = 0.0;
    double start_ = 0.0;
    double on_ = 0.0;
    double period_ = 0.0;
    std::vector<TimeWindow> windows_;
};

/**
 * Persistence scan over every window [t, t + T) inside [0, horizon].
 *
 * Two readings are evaluated. `contiguous` asks for a single on-run of length
 * >= tau inside each window. `dwell` asks for accumulated on-time >= tau,
 * which is the quantity the s_x lower bound integrates. Both coverage
 * functions are piecewise linear in t; evaluating them at every breakpoint
 * and at every exit/entry crossing finds the exact minima.
 */
struct TpeReport {
    double T = 0.0;
    double tau = 0.0;
    double horizon = 0.0;
    bool dwell_ok = true;
    bool contiguous_ok = true;
    double min_dwell = std::numeric_limits<double>::infinity();
    double min_contiguous = std::numeric_limits<double>::infinity();
    double worst_dwell_t = 0.0;
    double worst_contiguous_t = 0.0;
    bool vacuous = false;  ///< horizon shorter than T: no complete window
};

inline TpeReport check_tpe(const GnssSchedule& sched, double T, double tau, double horizon, double slack = 1e-9)
{
    TpeReport rep;
    rep.T = T;
    rep.tau = tau;
    rep.horizon = horizon;
    if (!(T > tau && tau > 0.0)) throw std::invalid_argument("check_tpe: need T > tau > 0");
    if (horizon < T) {
        rep.vacuous = true;
        return rep;
    }
    const auto on = sched.on_intervals(horizon);
    const double t_max = horizon - T;
    std::vector<double> candidates{0.0, t_max};
    for (const auto& w : on)
        for (double c : {w.begin, w.end, w.begin - T, w.end - T})
            if (c >= 0.0 && c <= t_max) candidates.push_back(c);
    // The longest stretch is a max of piecewise-linear terms; its minima also
    // sit where one window's exit meets another window's entry.
    for (const auto& a : on)
        for (const auto& b : on) {
            const double c = 0.5 * (a.end + b.begin - T);
            if (c >= 0.0 && c <= t_max) candidates.push_back(c);
        }
    for (double t : candidates) {
        double dwell = 0.0;
        double longest = 0.0;
        for (const auto& w : on) {
            const double len = std::max(0.0, std::min(w.end, t + T) - std::max(w.begin, t));
            dwell += len;
            longest = std::max(longest, len);
        }
        if (dwell < rep.min_dwell) {
            rep.min_dwell = dwell;
            rep.worst_dwell_t = t;
        }
        if (longest < rep.min_contiguous) {
            rep.min_contiguous = longest;
            rep.worst_contiguous_t = t;
        }
    }
    rep.dwell_ok = rep.min_dwell >= tau - slack;
    rep.contiguous_ok = rep.min_contiguous >= tau - slack;
    return rep;
}

/// Landmark matrix Y_p, magnetometer direction y_m and GNSS pair (y_x, sigma).
struct MeasurementBundle {
    Matrix Yp;
    Vec3 ym = Vec3::UnitX();
    Vec3 yx = Vec3::Zero();
    int sigma = 0;
};

struct GnssReading {
    Vec3 yx;
    int sigma;
};

inline GnssReading measure_gnss(const SEn3& state, const GnssSchedule& sched, double t)
{
    const int s = sched.sigma(t);
    return {s == 1 ? Vec3(position_of(state)) : Vec3::Zero(), s};
}

/// Additive Gaussian measurement noise; every standard deviation defaults to zero.
struct NoiseModel {
    double landmark_std = 0.0;
    double magnetometer_std = 0.0;
    double gnss_std = 0.0;

    bool enabled() const { return landmark_std > 0.0 || magnetometer_std > 0.0 || gnss_std > 0.0; }
};

inline MeasurementBundle measure_all(const SEn3& state, const SystemParams& params, const GnssSchedule& sched, double t,
                                     const NoiseModel& noise = {}, std::mt19937_64* rng = nullptr)
{
    MeasurementBundle m;
    m.Yp = measure_landmarks(state);
    m.ym = measure_magnetometer(state, params);
    const GnssReading g = measure_gnss(state, sched, t);
    m.yx = g.yx;
    m.sigma = g.sigma;
    if (noise.enabled() && rng != nullptr) {
        std::normal_distribution<double> normal(0.0, 1.0);
        auto draw = [&](double sd) { return sd * normal(*rng); };
        for (Index j = 0; j < m.Yp.cols(); ++j)
            for (Index r = 0; r < 3; ++r) m.Yp(r, j) += draw(noise.landmark_std);
        for (Index r = 0; r < 3; ++r) m.ym(r) += draw(noise.magnetometer_std);
        m.ym.normalize();
        if (m.sigma == 1)
            for (Index r = 0; r < 3; ++r) m.yx(r) += draw(noise.gnss_std);
    }
    return m;
}

}  // namespace lislam
