/**
 * @file gain_design.hpp
 * @brief Gain feasibility, A_Z(0) construction and P = A_Z A_Z^T monitors.
 *
 * P is laid out as
 *
 *   | s_v    s_vx   S_pv^T |
 *   | s_vx   s_x    S_px^T |
 *   | S_pv   S_px   S_p    |
 *
 * and obeys dP/dt = (S_N - qI) P + P (S_N - qI)^T + sigma k_x C_x C_x^T + k_p C C^T.
 */
#pragma once

#include "lislam/observer.hpp"

#include <string>
#include <vector>

namespace lislam {

struct GainCheck {
    bool feasible = false;
    double margin = 0.0;
};

/// margin = 2 n tau q e^{-2qT} k_p + (8 q^2 tau^2 e^{-4qT} - 1) k_x; feasible iff margin > 0.
inline GainCheck check_gain_condition(const Gains& g, Index n)
{
    g.validate();
    if (n < 1) throw std::invalid_argument("check_gain_condition: n must be at least 1");
    const double e2 = std::exp(-2.0 * g.q * g.T);
    const double margin = 2.0 * static_cast<double>(n) * g.tau * g.q * e2 * g.kp +
                          (8.0 * g.q * g.q * g.tau * g.tau * e2 * e2 - 1.0) * g.kx;
    return {margin > 0.0, margin};
}

struct Interval {
    double lo;
    double hi;
    bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
};

/// Interval bounds on the scalar blocks of P and the Schur-complement determinant floor.
struct PBounds {
    double delta = 0.0;  ///< k_x e^{-2qT} tau
    double margin = 0.0;
    Interval s_x{};
    Interval s_vx{};
    Interval s_v{};
    double schur_det_min = 0.0;  ///< k_x margin / (16 q^4)
    double S_p = 0.0;            ///< steady k_p / 2q
    double S_px = 0.0;           ///< steady -k_p / 2q
    double S_pv = 0.0;           ///< steady k_p / 4q^2
};

inline PBounds p_bounds(const Gains& g, Index n)
{
    const GainCheck gc = check_gain_condition(g, n);
    const double nk = static_cast<double>(n) * g.kp;
    const double q = g.q;
    PBounds b;
    b.delta = g.kx * std::exp(-2.0 * q * g.T) * g.tau;
    b.margin = gc.margin;
    b.s_x = {nk / (2 * q) + b.delta, (nk + g.kx) / (2 * q)};
    b.s_vx = {-(nk + g.kx) / (4 * q * q), -nk / (4 * q * q) - b.delta / (2 * q)};
    b.s_v = {nk / (4 * q * q * q) + b.delta / (2 * q * q), (nk + g.kx) / (4 * q * q * q)};
    b.schur_det_min = g.kx * gc.margin / (16.0 * q * q * q * q);
    b.S_p = g.kp / (2 * q);
    b.S_px = -g.kp / (2 * q);
    b.S_pv = g.kp / (4 * q * q);
    return b;
}

/// Symmetric P = A_Z A_Z^T with named block access.
class PMatrix {
public:
    explicit PMatrix(Matrix p) : p_(std::move(p))
    {
        if (p_.rows() != p_.cols() || p_.rows() < 3) throw std::invalid_argument("PMatrix: must be square with n >= 1");
    }

    static PMatrix from_az(const Matrix& az) { return PMatrix(az * az.transpose()); }

    const Matrix& matrix() const { return p_; }
    Index n() const { return p_.rows() - 2; }

    double s_v() const { return p_(0, 0); }
    double s_vx() const { return p_(0, 1); }
    double s_x() const { return p_(1, 1); }
    Vector S_pv() const { return p_.col(0).tail(n()); }
    Vector S_px() const { return p_.col(1).tail(n()); }
    Matrix S_p() const { return p_.bottomRightCorner(n(), n()); }

    double asymmetry() const { return (p_ - p_.transpose()).norm(); }

    /// det(A_p - B_p C_p^{-1} B_p^T) with C_p the live S_p block.
    double schur_det() const
    {
        const Matrix ap = p_.topLeftCorner(2, 2);
        const Matrix bp = p_.topRightCorner(2, n());
        const Matrix sc = ap - bp * S_p().llt().solve(bp.transpose());
        return sc.determinant();
    }

    double min_eigenvalue() const
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (p_ + p_.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }

private:
    Matrix p_;
};

/**
 * P_0 from the three free scalars; S_p, S_px, S_pv are fixed at their steady values.
 * Throws std::invalid_argument naming the violated bound, or if P_0 is not PD.
 */
inline PMatrix build_P0(const Gains& g, Index n, double sx0, double svx0, double sv0)
{
    const PBounds b = p_bounds(g, n);
    auto check = [](const char* name, double v, const Interval& iv) {
        if (!iv.contains(v)) {
            std::ostringstream os;
            os << "build_P0: " << name << "(0) = " << v << (v < iv.lo ? " is below its lower bound " : " is above its upper bound ")
               << (v < iv.lo ? iv.lo : iv.hi);
            throw std::invalid_argument(os.str());
        }
    };
    check("s_x", sx0, b.s_x);
    check("s_vx", svx0, b.s_vx);
    check("s_v", sv0, b.s_v);

    Matrix p = Matrix::Zero(n + 2, n + 2);
    p(0, 0) = sv0;
    p(0, 1) = p(1, 0) = svx0;
    p(1, 1) = sx0;
    p.col(0).tail(n).setConstant(b.S_pv);
    p.row(0).tail(n).setConstant(b.S_pv);
    p.col(1).tail(n).setConstant(b.S_px);
    p.row(1).tail(n).setConstant(b.S_px);
    p.bottomRightCorner(n, n) = b.S_p * Matrix::Identity(n, n);
    PMatrix out(p);
    if (!(out.schur_det() > 0.0) || !(out.s_v() - static_cast<double>(n) * b.S_pv * b.S_pv / b.S_p > 0.0))
        throw std::invalid_argument("build_P0: P_0 is not positive definite (Schur complement test)");
    return out;
}

/// Lower Cholesky factor L with L L^T = P_0.
inline Matrix az_from_P0(const PMatrix& p0)
{
    Eigen::LLT<Matrix> llt(p0.matrix());
    if (llt.info() != Eigen::Success) throw std::invalid_argument("az_from_P0: P_0 is not positive definite");
    return llt.matrixL();
}

/// The literal A_Z(0) of the reference simulation (n landmarks; tuned for n = 5).
inline Matrix reference_az0(Index n)
{
    Matrix a = Matrix::Zero(n + 2, n + 2);
    a(0, 0) = 36.7423;
    a.row(0).tail(n).setConstant(15.8114);
    a(1, 0) = -0.2722;
    a(1, 1) = 1.3878;
    a.row(1).tail(n).setConstant(-3.1623);
    a.bottomRightCorner(n, n) = 3.1623 * Matrix::Identity(n, n);
    return a;
}

struct PSeeds {
    double s_x;
    double s_vx;
    double s_v;
};

/// Scalars realised by reference_az0 (about 52.0, -260.0, 2600.0 for n = 5).
inline PSeeds reference_seeds(Index n)
{
    const PMatrix p = PMatrix::from_az(reference_az0(n));
    return {p.s_x(), p.s_vx(), p.s_v()};
}

inline PSeeds midpoint_seeds(const Gains& g, Index n)
{
    const PBounds b = p_bounds(g, n);
    auto mid = [](const Interval& iv) { return 0.5 * (iv.lo + iv.hi); };
    return {mid(b.s_x), mid(b.s_vx), mid(b.s_v)};
}

inline Matrix p_dynamics_rhs(const PMatrix& p, int sigma, const Gains& g)
{
    const Index n = p.n();
    const Matrix a = velocity_coupling(n) - g.q * Matrix::Identity(n + 2, n + 2);
    const Vector cx = position_selector(n);
    const Matrix c = landmark_selector(n);
    return a * p.matrix() + p.matrix() * a.transpose() + (sigma ? g.kx : 0.0) * cx * cx.transpose() +
           g.kp * c * c.transpose();
}

/// dV_Z/dt = -V_Z M + B.
struct VzDrift {
    Matrix M;
    Matrix B;
    double min_eig_M_minus_q = 0.0;
};

inline VzDrift vz_drift(const ObserverState& obs, const AzInverse& ai, int sigma, const Gains& g, const Vec3& yx,
                        double gravity)
{
    const Index n = obs.n();
    const Vector ainv_cx = ai.inv.col(1);
    const Matrix ainv_c = ai.inv * landmark_selector(n);
    VzDrift d;
    const Matrix extra = (sigma ? (0.5 * g.kx + g.kRx) : 0.0) * ainv_cx * ainv_cx.transpose() +
                         (0.5 * g.kp + static_cast<double>(n) * g.kRp) * ainv_c * ainv_c.transpose();
    d.M = extra + g.q * Matrix::Identity(n + 2, n + 2);
    d.B = gravity_columns(gravity, n) * obs.AZ() + (g.kx + g.kRx) * yx * ainv_cx.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (extra + extra.transpose()), Eigen::EigenvaluesOnly);
    d.min_eig_M_minus_q = es.eigenvalues()(0);
    return d;
}

inline VzDrift vz_drift(const ObserverState& obs, int sigma, const Gains& g, const Vec3& yx, double gravity)
{
    return vz_drift(obs, az_inverse(obs.AZ()), sigma, g, yx, gravity);
}

/// Scalar-block interval checks of a live P against the bound set.
struct PBoundCheck {
    bool s_x_ok = true;
    bool s_vx_ok = true;
    bool s_v_ok = true;
    bool schur_ok = true;
    double schur_det = 0.0;
    double sp_deviation = 0.0;  ///< max |S_p - (k_p/2q) I|

    bool ok() const { return s_x_ok && s_vx_ok && s_v_ok && schur_ok; }
};

inline PBoundCheck check_p_bounds(const PMatrix& p, const PBounds& b, double slack = 1e-6)
{
    PBoundCheck c;
    c.s_x_ok = b.s_x.contains(p.s_x(), slack);
    c.s_vx_ok = b.s_vx.contains(p.s_vx(), slack);
    c.s_v_ok = b.s_v.contains(p.s_v(), slack);
    c.schur_det = p.schur_det();
    c.schur_ok = c.schur_det >= b.schur_det_min - slack;
    const Index n = p.n();
    c.sp_deviation = (p.S_p() - b.S_p * Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    return c;
}

}  // namespace lislam
