/**
 * @file metrics.hpp
 * @brief Scalar convergence and health metrics for logging and acceptance checks.
 */
#pragma once

#include "lislam/gain_design.hpp"

#include <algorithm>
#include <vector>

namespace lislam {

/// Geodesic angle of a rotation, in [0, pi]. atan2 keeps small angles accurate.
inline double attitude_error_angle(const Rotation& r)
{
    const Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return std::atan2(0.5 * s.norm(), 0.5 * (r.trace() - 1.0));
}

/// |yaw| of the Z-Y-X decomposition of a rotation error.
inline double yaw_error_angle(const Rotation& r)
{
    return std::abs(std::atan2(r(1, 0), r(0, 0)));
}

struct MetricsRow {
    double t = 0.0;
    int sigma = 0;
    double att_err = 0.0;
    double yaw_err = 0.0;
    double vel_err = 0.0;
    double pos_err = 0.0;
    std::vector<double> lm_err;
    double lm_err_rms = 0.0;
    double lyap = 0.0;
    double ve_sq = 0.0;  ///< |V_E|^2
    double tr_re_plus1 = 0.0;
    double corr_gnss = 0.0;
    double corr_landmark = 0.0;
    double corr_mag = 0.0;
    Vec3 mu_x = Vec3::Zero();
    Vec3 mu_z = Vec3::Zero();
    Vec3 x = Vec3::Zero();
    Vec3 xhat = Vec3::Zero();
    std::vector<Vec3> p;
    std::vector<Vec3> phat;
    // P = A_Z A_Z^T diagnostics
    double s_x = 0.0;
    double s_vx = 0.0;
    double s_v = 0.0;
    double schur_det = 0.0;
    double min_sv_az = 0.0;
    double margin = 0.0;
};

inline MetricsRow metrics_row(const SEn3& truth, const ObserverState& obs, const AzInverse& ai,
                              const SensorCorrections& corr, double t, int sigma, double margin)
{
    const Index n = obs.n();
    const ErrorState e = compute_error(truth, obs);
    const Matrix diff = obs.xhat().V() - truth.V();
    MetricsRow r;
    r.t = t;
    r.sigma = sigma;
    r.att_err = attitude_error_angle(e.RE);
    r.yaw_err = yaw_error_angle(e.RE);
    r.vel_err = diff.col(0).norm();
    r.pos_err = diff.col(1).norm();
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double d = diff.col(i + 2).norm();
        r.lm_err.push_back(d);
        ss += d * d;
        r.p.push_back(truth.V().col(i + 2));
        r.phat.push_back(obs.xhat().V().col(i + 2));
    }
    r.lm_err_rms = std::sqrt(ss / static_cast<double>(n));
    r.lyap = lyapunov(e);
    r.ve_sq = e.VE.squaredNorm();
    r.tr_re_plus1 = e.RE.trace() + 1.0;
    r.corr_gnss = corr.gnss.norm();
    r.corr_landmark = corr.landmark.norm();
    r.corr_mag = corr.magnetometer.norm();
    const BoundTerms bt = bound_terms(truth, obs, ai, e);
    r.mu_x = bt.mu_x;
    r.mu_z = bt.mu_z;
    r.x = position_of(truth);
    r.xhat = position_of(obs.xhat());
    const PMatrix p = PMatrix::from_az(obs.AZ());
    r.s_x = p.s_x();
    r.s_vx = p.s_vx();
    r.s_v = p.s_v();
    r.schur_det = p.schur_det();
    r.min_sv_az = ai.min_sv;
    r.margin = margin;
    return r;
}

/// Fixed CSV header for n landmarks.
inline std::vector<std::string> metrics_header(Index n)
{
    std::vector<std::string> h{"t", "sigma", "att_err", "yaw_err", "vel_err", "pos_err"};
    for (Index i = 1; i <= n; ++i) h.push_back("lm_err_" + std::to_string(i));
    for (const char* s : {"lm_err_rms", "lyap", "ve_sq", "tr_re_plus1", "corr_gnss", "corr_landmark", "corr_mag",
                          "mu_x_x", "mu_x_y", "mu_x_z", "mu_z_x", "mu_z_y", "mu_z_z", "x_x", "x_y", "x_z", "xhat_x",
                          "xhat_y", "xhat_z"})
        h.emplace_back(s);
    for (Index i = 1; i <= n; ++i)
        for (const char* ax : {"x", "y", "z"}) h.push_back("p" + std::to_string(i) + "_" + ax);
    for (Index i = 1; i <= n; ++i)
        for (const char* ax : {"x", "y", "z"}) h.push_back("phat" + std::to_string(i) + "_" + ax);
    for (const char* s : {"s_x", "s_vx", "s_v", "schur_det", "min_sv_az", "margin"}) h.emplace_back(s);
    return h;
}

inline std::vector<double> metrics_values(const MetricsRow& r)
{
    std::vector<double> v{r.t, static_cast<double>(r.sigma), r.att_err, r.yaw_err, r.vel_err, r.pos_err};
    v.insert(v.end(), r.lm_err.begin(), r.lm_err.end());
    for (double d : {r.lm_err_rms, r.lyap, r.ve_sq, r.tr_re_plus1, r.corr_gnss, r.corr_landmark, r.corr_mag})
        v.push_back(d);
    for (const Vec3* w : {&r.mu_x, &r.mu_z, &r.x, &r.xhat}) v.insert(v.end(), w->data(), w->data() + 3);
    for (const auto& w : r.p) v.insert(v.end(), w.data(), w.data() + 3);
    for (const auto& w : r.phat) v.insert(v.end(), w.data(), w.data() + 3);
    for (double d : {r.s_x, r.s_vx, r.s_v, r.schur_det, r.min_sv_az, r.margin}) v.push_back(d);
    return v;
}

}  // namespace lislam
