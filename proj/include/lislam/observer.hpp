/**
 * @file observer.hpp
 * @brief Synchronous observer for GNSS- and magnetometer-aided landmark-inertial SLAM.
 *
 * Observer state: estimate Xhat in SE_{n+2}(3) and auxiliary Z = (I, V_Z, A_Z)
 * in SIM_{n+2}(3). Error Ebar = Z^{-1} X Xhat^{-1} Z evolves independently of
 * the IMU input:
 *
 *   d/dt R_E = -R_E Omega_Delta^x
 *   d/dt V_E = -V_E S_Gamma + (I - R_E) W_Gamma - R_E W_Delta
 *
 * Each sensor contributes a correction (Delta, Gamma) that does not increase
 * L(Ebar) = |V_E|^2 + tr(I - R_E); the applied correction is their sum.
 */
#pragma once

#include "lislam/lie_group.hpp"
#include "lislam/slam_system.hpp"

#include <numbers>
#include <span>

namespace lislam {

struct Gains {
    double kx = 1.0;
    double kp = 2.0;
    double kRx = 0.001;
    double kRp = 0.0005;
    double km = 0.1;
    double q = 0.1;
    double T = 10.0;   ///< persistence window of the GNSS schedule (s)
    double tau = 5.0;  ///< guaranteed on-time inside each window (s)

    static Gains reference() { return {}; }

    void validate() const
    {
        for (double g : {kx, kp, kRx, kRp, km, q, T, tau})
            if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("Gains: all gains and T, tau must be positive");
        if (!(tau < T)) throw std::invalid_argument("Gains: tau must be smaller than T");
    }
};

/// A_Z^{-1} together with its conditioning.
struct AzInverse {
    Matrix inv;
    double min_sv = 0.0;
};

inline AzInverse az_inverse(const Matrix& a)
{
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    AzInverse out;
    out.min_sv = s(s.size() - 1);
    if (!(out.min_sv > kMinSingularValue)) {
        std::ostringstream os;
        os << "singular A_Z: smallest singular value " << out.min_sv;
        throw std::domain_error(os.str());
    }
    out.inv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return out;
}

class ObserverState {
public:
    ObserverState(SEn3 xhat, SIMn3 z) : xhat_(std::move(xhat)), z_(std::move(z))
    {
        require_same_cols(xhat_.cols(), z_.cols(), "ObserverState");
        if (!z_.R().isIdentity(0.0)) throw std::invalid_argument("ObserverState: rotation of Z must be the identity");
    }

    ObserverState(SEn3 xhat, Matrix vz, Matrix az)
        : ObserverState(std::move(xhat), SIMn3(Mat3::Identity(), std::move(vz), std::move(az)))
    {
    }

    const SEn3& xhat() const { return xhat_; }
    const SIMn3& z() const { return z_; }
    const Matrix& VZ() const { return z_.V(); }
    const Matrix& AZ() const { return z_.A(); }
    Index cols() const { return xhat_.cols(); }
    Index n() const { return xhat_.cols() - 2; }

private:
    SEn3 xhat_;
    SIMn3 z_;
};

/// Per-sensor correction pair (Delta in se_{n+2}(3), Gamma in sim_{n+2}(3) with Omega_Gamma = 0).
struct TangentCorrection {
    SETangent delta;
    SIMTangent gamma;

    static TangentCorrection zero(Index cols) { return {SETangent::zero(cols), SIMTangent::zero(cols)}; }
    Index cols() const { return delta.cols(); }

    double norm() const
    {
        return std::sqrt(hat(delta.omega).squaredNorm() + delta.W.squaredNorm() + gamma.W.squaredNorm() +
                         gamma.S.squaredNorm());
    }

    bool all_finite() const
    {
        return delta.omega.allFinite() && delta.W.allFinite() && gamma.W.allFinite() && gamma.S.allFinite();
    }

    TangentCorrection operator+(const TangentCorrection& o) const { return {delta + o.delta, gamma + o.gamma}; }
};

/// GNSS position correction; sigma = 0 leaves only S_Gamma = q I.
inline TangentCorrection gnss_correction(const ObserverState& obs, const AzInverse& ai, const Vec3& yx, int sigma,
                                         const Gains& gains)
{
    const Index m = obs.cols();
    const double s = sigma ? 1.0 : 0.0;
    const double k = gains.kx + gains.kRx;
    const Vector ainv_cx = ai.inv.col(1);  // A_Z^{-1} C_x
    const Vec3 vz_cx = obs.VZ() * ainv_cx;
    const Vec3 xhat = position_of(obs.xhat());
    const Vec3 r_gamma = yx - s * vz_cx;

    TangentCorrection c = TangentCorrection::zero(m);
    c.delta.W = k * (yx - s * xhat) * ainv_cx.transpose();
    c.delta.omega = 4.0 * gains.kRx * s * (xhat - vz_cx).cross(r_gamma);
    c.gamma.W = -k * r_gamma * ainv_cx.transpose();
    c.gamma.S = -0.5 * gains.kx * s * ainv_cx * ainv_cx.transpose() + gains.q * Matrix::Identity(m, m);
    return c;
}

inline TangentCorrection gnss_correction(const ObserverState& obs, const Vec3& yx, int sigma, const Gains& gains)
{
    return gnss_correction(obs, az_inverse(obs.AZ()), yx, sigma, gains);
}

/// Landmark correction built from the residual Rhat (Y - Yhat), Yhat = -Rhat^T Vhat C.
inline TangentCorrection landmark_correction(const ObserverState& obs, const AzInverse& ai, const Matrix& Yp,
                                             const Gains& gains)
{
    const Index n = obs.n();
    if (Yp.rows() != 3 || Yp.cols() != n) throw std::invalid_argument("landmark_correction: Y_p must be 3 x n");
    const Matrix c_sel = landmark_selector(n);
    const Mat3& rhat = obs.xhat().R();
    const Matrix residual = rhat * Yp + obs.xhat().V() * c_sel;  // Rhat (Y - Yhat)
    const Matrix ainv_c = ai.inv * c_sel;
    const double k = gains.kp + static_cast<double>(n) * gains.kRp;
    const Matrix proj = ainv_c * ainv_c.transpose();  // A_Z^{-1} C C^T A_Z^{-T}

    TangentCorrection c = TangentCorrection::zero(obs.cols());
    c.delta.W = -k * residual * ainv_c.transpose();
    c.delta.omega = 4.0 * gains.kRp * Vec3(obs.VZ() * ainv_c.rowwise().sum()).cross(Vec3(residual.rowwise().sum()));
    c.gamma.W = k * obs.VZ() * proj;
    c.gamma.S = -0.5 * gains.kp * proj;
    return c;
}

inline TangentCorrection landmark_correction(const ObserverState& obs, const Matrix& Yp, const Gains& gains)
{
    return landmark_correction(obs, az_inverse(obs.AZ()), Yp, gains);
}

/// Magnetometer correction Omega_Delta = 4 k_m (Rhat y_m) x mag_ref; the direction is renormalised first.
inline TangentCorrection magnetometer_correction(const ObserverState& obs, const Vec3& ym, const Gains& gains,
                                                 const Vec3& mag_reference)
{
    if (!(ym.norm() > 0.0)) throw std::invalid_argument("magnetometer_correction: zero direction");
    TangentCorrection c = TangentCorrection::zero(obs.cols());
    c.delta.omega = 4.0 * gains.km * Vec3(obs.xhat().R() * ym.normalized()).cross(mag_reference);
    return c;
}

inline TangentCorrection combine_corrections(std::span<const TangentCorrection> parts, Index cols)
{
    TangentCorrection sum = TangentCorrection::zero(cols);
    for (const auto& p : parts) {
        require_same_cols(p.cols(), cols, "combine_corrections");
        sum = sum + p;
    }
    return sum;
}

struct SensorCorrections {
    TangentCorrection gnss;
    TangentCorrection landmark;
    TangentCorrection magnetometer;

    TangentCorrection total() const { return gnss + landmark + magnetometer; }
};

inline SensorCorrections compute_corrections(const ObserverState& obs, const AzInverse& ai,
                                             const MeasurementBundle& meas, const Gains& gains,
                                             const Vec3& mag_reference)
{
    return {gnss_correction(obs, ai, meas.yx, meas.sigma, gains), landmark_correction(obs, ai, meas.Yp, gains),
            magnetometer_correction(obs, meas.ym, gains, mag_reference)};
}

/// Z Delta Z^{-1} evaluated on the dense embedding; must land in se_{n+2}(3).
inline SETangent conjugate_correction(const SIMn3& z, const AzInverse& ai, const SETangent& delta,
                                      double tol = kAxiomTolerance)
{
    const Index m = z.cols();
    const SIMn3 zinv(z.R().transpose(), -z.R().transpose() * z.V() * ai.inv, ai.inv);
    const Matrix c = z.matrix() * delta.matrix() * zinv.matrix();
    const double lower = c.bottomRows(m).norm();
    if (!(lower < tol)) {
        std::ostringstream os;
        os << "conjugate_correction: Z Delta Z^-1 left se(3) (lower blocks norm " << lower << ")";
        throw std::domain_error(os.str());
    }
    const Mat3 top = c.topLeftCorner<3, 3>();
    return {vee(top, tol * (1.0 + top.norm())), c.topRightCorner(3, m)};
}

/**
 * One observer step with the correction held over [t, t + dt):
 *   Xhat+ = exp(dt (G + N + Z Delta Z^{-1})) Xhat exp(dt (U - N))
 *   Z+    = exp(dt (G + N)) Z exp(-dt Gamma)
 */
inline ObserverState observer_step(const ObserverState& obs, const AzInverse& ai, const ImuInput& u,
                                   const TangentCorrection& corr, double gravity, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("observer_step: dt must be positive");
    if (!corr.all_finite()) throw std::domain_error("observer_step: non-finite correction term (check the gains)");
    if (!corr.gamma.omega.isZero(0.0)) throw std::invalid_argument("observer_step: Omega_Gamma must be zero");
    const Index n = obs.n();
    const SIMTangent gn = gravity_and_coupling(gravity, n);
    const SETangent conj = conjugate_correction(obs.z(), ai, corr.delta);
    const SIMTangent left = gn + SIMTangent::from(conj);
    const SIMTangent right = input_minus_coupling(u.omega, u.accel, n);

    SEn3 xhat = mixed_euler_step(obs.xhat(), left, right, dt);
    SIMn3 z = mixed_euler_step(obs.z(), gn, -corr.gamma, dt);
    if (!xhat.V().allFinite() || !z.V().allFinite() || !z.A().allFinite())
        throw std::domain_error("observer_step: state became non-finite");
    return {std::move(xhat), std::move(z)};
}

inline ObserverState observer_step(const ObserverState& obs, const ImuInput& u, const TangentCorrection& corr,
                                   double gravity, double dt)
{
    return observer_step(obs, az_inverse(obs.AZ()), u, corr, gravity, dt);
}

/// Measure-correct-propagate using all three sensors.
inline ObserverState observer_step(const ObserverState& obs, const ImuInput& u, const MeasurementBundle& meas,
                                   const Gains& gains, const SystemParams& params, double dt)
{
    const AzInverse ai = az_inverse(obs.AZ());
    const auto parts = compute_corrections(obs, ai, meas, gains, params.mag_reference);
    return observer_step(obs, ai, u, parts.total(), params.gravity, dt);
}

struct ErrorState {
    Rotation RE;
    Matrix VE;
};

/// R_E = R Rhat^T,  V_E = (V A_Z - V_Z) - R_E (Vhat A_Z - V_Z).
inline ErrorState compute_error(const SEn3& truth, const ObserverState& obs)
{
    require_same_cols(truth.cols(), obs.cols(), "compute_error");
    const Rotation re = truth.R() * obs.xhat().R().transpose();
    const Matrix& a = obs.AZ();
    const Matrix& vz = obs.VZ();
    return {re, (truth.V() * a - vz) - re * (obs.xhat().V() * a - vz)};
}

/// Ebar = Z^{-1} X Xhat^{-1} Z by group products.
inline SEn3 compute_error_group(const SEn3& truth, const ObserverState& obs)
{
    const SIMn3& z = obs.z();
    const SIMn3 x_xhat_inv = SIMn3::from(truth * obs.xhat().inverse());
    const SIMn3 e = z.inverse() * x_xhat_inv * z;
    const double scale = 1.0 + e.A().norm();
    return e.to_se(kAxiomTolerance * scale * scale);
}

inline double lyapunov(const ErrorState& e)
{
    return e.VE.squaredNorm() + (3.0 - e.RE.trace());
}

struct ErrorRate {
    Mat3 dRE;
    Matrix dVE;
};

inline ErrorRate error_dynamics_rhs(const ErrorState& e, const TangentCorrection& c)
{
    const Mat3 eye = Mat3::Identity();
    return {-e.RE * hat(c.delta.omega), -e.VE * c.gamma.S + (eye - e.RE) * c.gamma.W - e.RE * c.delta.W};
}

/// dL/dt along the error dynamics: 2 <V_E, dV_E> - tr(dR_E).
inline double lyapunov_rate(const ErrorState& e, const TangentCorrection& c)
{
    const ErrorRate r = error_dynamics_rhs(e, c);
    return 2.0 * (e.VE.array() * r.dVE.array()).sum() - r.dRE.trace();
}

/// Quantities entering the per-sensor derivative bounds.
struct BoundTerms {
    Vec3 ex;      ///< V_E A_Z^{-1} C_x
    Matrix ep;    ///< V_E A_Z^{-1} C
    Vec3 mu_x;    ///< x - V_Z A_Z^{-1} C_x
    Vec3 mu_z;    ///< V_Z A_Z^{-1} C 1_n
    Mat3 i_minus_re2;
};

inline BoundTerms bound_terms(const SEn3& truth, const ObserverState& obs, const AzInverse& ai, const ErrorState& e)
{
    const Matrix ainv_c = ai.inv * landmark_selector(obs.n());
    const Vector ainv_cx = ai.inv.col(1);
    BoundTerms b;
    b.ex = e.VE * ainv_cx;
    b.ep = e.VE * ainv_c;
    b.mu_x = position_of(truth) - obs.VZ() * ainv_cx;
    b.mu_z = obs.VZ() * ainv_c.rowwise().sum();
    b.i_minus_re2 = Mat3::Identity() - e.RE * e.RE;
    return b;
}

/// Upper bound on dL/dt under the GNSS correction alone (y_x is the GNSS measurement).
inline double gnss_rate_bound(const ObserverState& obs, const AzInverse& ai, const ErrorState& e, const Vec3& yx,
                              int sigma, const Gains& g)
{
    const double s = sigma ? 1.0 : 0.0;
    const Vector ainv_cx = ai.inv.col(1);
    const Vec3 ex = e.VE * ainv_cx;
    const Vec3 r = yx - s * obs.VZ() * ainv_cx;
    const Mat3 i_re2 = Mat3::Identity() - e.RE * e.RE;
    const double gap = (i_re2 * r).norm() - s * ex.norm();
    return -2.0 * g.kRx * gap * gap - s * g.kx * ex.squaredNorm() - 2.0 * g.q * e.VE.squaredNorm();
}

/// Upper bound on dL/dt under the landmark correction alone.
inline double landmark_rate_bound(const ObserverState& obs, const AzInverse& ai, const ErrorState& e, const Gains& g)
{
    const Index n = obs.n();
    const Matrix ainv_c = ai.inv * landmark_selector(n);
    const double ep = (e.VE * ainv_c).norm();
    const Vec3 mu_z = obs.VZ() * ainv_c.rowwise().sum();
    const double gap = std::sqrt(static_cast<double>(n)) * ep - ((Mat3::Identity() - e.RE * e.RE) * mu_z).norm();
    return -g.kp * ep * ep - 2.0 * g.kRp * gap * gap;
}

/// dL/dt under the magnetometer correction alone: -2 k_m |(I - R_E^2) mag_ref|^2 (an equality).
inline double magnetometer_rate(const ErrorState& e, const Gains& g, const Vec3& mag_reference)
{
    return -2.0 * g.km * ((Mat3::Identity() - e.RE * e.RE) * mag_reference).squaredNorm();
}

/// R(0) = exp(pi/4 * b^x), b = (1, 1, 1). `normalized_axis` uses b / |b| instead of the literal b.
inline Rotation reference_initial_attitude(bool normalized_axis = false)
{
    Vec3 b = Vec3::Ones();
    if (normalized_axis) b.normalize();
    return so3_exp(0.25 * std::numbers::pi * b);
}

}  // namespace lislam
