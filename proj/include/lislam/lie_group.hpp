/**
 * @file lie_group.hpp
 * @brief SO(3), SE_k(3) and SIM_k(3) with structure-preserving exponential steps.
 *
 * Elements are stored by blocks rather than as dense (k+3)x(k+3) matrices:
 *
 *   SE_k(3):   | R  V |        SIM_k(3):  | R  V |
 *              | 0  I |                   | 0  A |
 *
 * with R in SO(3), V a 3 x k matrix and A an invertible k x k matrix. The
 * landmark SLAM state uses k = n + 2 columns (velocity, position, n landmarks).
 */
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lislam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Rotation is a 3x3 direction-cosine matrix; validity is checked by is_rotation().
using Rotation = Mat3;

/// Group-membership tolerance for rotations (orthogonality and determinant).
inline constexpr double kGroupTolerance = 1e-9;
/// Tolerance used when checking group axioms against dense arithmetic.
inline constexpr double kAxiomTolerance = 1e-11;
/// Smallest admissible singular value of the SIM scale block.
inline constexpr double kMinSingularValue = 1e-9;

inline Mat3 hat(const Vec3& w)
{
    Mat3 m;
    m << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return m;
}

/// Inverse of hat(). Rejects matrices whose symmetric part is not negligible.
inline Vec3 vee(const Mat3& m, double tol = kGroupTolerance)
{
    const double asym = (m + m.transpose()).norm();
    if (!(asym < tol)) {
        std::ostringstream os;
        os << "vee: matrix is not antisymmetric (|M + M^T| = " << asym << ")";
        throw std::invalid_argument(os.str());
    }
    const Mat3 a = 0.5 * (m - m.transpose());
    return {a(2, 1), a(0, 2), a(1, 0)};
}

inline bool is_rotation(const Mat3& r, double tol = kGroupTolerance)
{
    return (r.transpose() * r - Mat3::Identity()).norm() < tol && std::abs(r.determinant() - 1.0) < tol;
}

namespace detail {

// c_p(theta) = sum_{m>=0} (-1)^m theta^{2m} / (2m + p)!
//
// Powers of hat(phi) collapse via K^3 = -theta^2 K, so every series
// sum_k K^k / (k + j)! equals I/j! + c_{j+1} K + c_{j+2} K^2.
inline double trig_series_coefficient(int p, double theta)
{
    const double t2 = theta * theta;
    if (theta < 1.0) {
        double fact = 1.0;
        for (int i = 2; i <= p; ++i) fact *= i;
        double term = 1.0 / fact;
        double sum = term;
        for (int m = 1; m < 14; ++m) {
            term *= -t2 / ((2.0 * m + p - 1.0) * (2.0 * m + p));
            sum += term;
        }
        return sum;
    }
    double even = std::cos(theta);
    double odd = std::sin(theta) / theta;
    double fact_even = 1.0;  // 0!
    double fact_odd = 1.0;   // 1!
    for (int q = 2; q <= p; ++q) {
        if (q % 2 == 0) {
            even = (1.0 / fact_even - even) / t2;
            fact_even *= (q - 1) * q;
        } else {
            odd = (1.0 / fact_odd - odd) / t2;
            fact_odd *= (q - 1) * q;
        }
    }
    return (p % 2 == 0) ? even : odd;
}

inline double inv_factorial(int j)
{
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    return 1.0 / f;
}

}  // namespace detail

/// sum_{k>=0} hat(phi)^k / (k + j)!.  j = 0 is the exponential, j = 1 the left Jacobian.
inline Mat3 so3_series(const Vec3& phi, int j)
{
    const double theta = phi.norm();
    const Mat3 k = hat(phi);
    return detail::inv_factorial(j) * Mat3::Identity() + detail::trig_series_coefficient(j + 1, theta) * k +
           detail::trig_series_coefficient(j + 2, theta) * k * k;
}

/// Rodrigues exponential of hat(omega * dt).
inline Rotation so3_exp(const Vec3& omega, double dt = 1.0)
{
    return so3_series(omega * dt, 0);
}

/// Tangent of SE_k(3): (Omega, W).
struct SETangent {
    Vec3 omega = Vec3::Zero();
    Matrix W;

    static SETangent zero(Index cols) { return {Vec3::Zero(), Matrix::Zero(3, cols)}; }
    Index cols() const { return W.cols(); }

    Matrix matrix() const
    {
        Matrix m = Matrix::Zero(3 + cols(), 3 + cols());
        m.topLeftCorner<3, 3>() = hat(omega);
        m.topRightCorner(3, cols()) = W;
        return m;
    }

    SETangent operator+(const SETangent& o) const { return {omega + o.omega, W + o.W}; }
    SETangent operator-() const { return {-omega, -W}; }
};

/// Tangent of SIM_k(3): (Omega, W, S).
struct SIMTangent {
    Vec3 omega = Vec3::Zero();
    Matrix W;
    Matrix S;

    static SIMTangent zero(Index cols) { return {Vec3::Zero(), Matrix::Zero(3, cols), Matrix::Zero(cols, cols)}; }
    static SIMTangent from(const SETangent& t) { return {t.omega, t.W, Matrix::Zero(t.cols(), t.cols())}; }
    Index cols() const { return W.cols(); }

    Matrix matrix() const
    {
        Matrix m = Matrix::Zero(3 + cols(), 3 + cols());
        m.topLeftCorner<3, 3>() = hat(omega);
        m.topRightCorner(3, cols()) = W;
        m.bottomRightCorner(cols(), cols()) = S;
        return m;
    }

    SIMTangent operator+(const SIMTangent& o) const { return {omega + o.omega, W + o.W, S + o.S}; }
    SIMTangent operator-() const { return {-omega, -W, -S}; }
};

inline void require_same_cols(Index a, Index b, const char* where)
{
    if (a != b) {
        std::ostringstream os;
        os << where << ": column count mismatch (" << a << " vs " << b << ")";
        throw std::invalid_argument(os.str());
    }
}

class SIMn3;

/// Element (R, V) of SE_k(3).
class SEn3 {
public:
    SEn3(const Rotation& r, Matrix v) : r_(r), v_(std::move(v))
    {
        if (v_.rows() != 3) throw std::invalid_argument("SEn3: V must have 3 rows");
    }

    static SEn3 identity(Index cols) { return {Mat3::Identity(), Matrix::Zero(3, cols)}; }

    /// Parse a dense (k+3)x(k+3) matrix; the lower blocks must be (0, I) within tol.
    static SEn3 from_matrix(const Matrix& m, double tol = kAxiomTolerance)
    {
        const Index k = m.rows() - 3;
        if (m.cols() != m.rows() || k < 0) throw std::invalid_argument("SEn3::from_matrix: bad shape");
        const double off = m.bottomLeftCorner(k, 3).norm() + (m.bottomRightCorner(k, k) - Matrix::Identity(k, k)).norm();
        if (!(off < tol)) throw std::invalid_argument("SEn3::from_matrix: lower blocks are not (0, I)");
        return {m.topLeftCorner<3, 3>(), m.topRightCorner(3, k)};
    }

    const Rotation& R() const { return r_; }
    const Matrix& V() const { return v_; }
    Index cols() const { return v_.cols(); }

    Matrix matrix() const
    {
        Matrix m = Matrix::Identity(3 + cols(), 3 + cols());
        m.topLeftCorner<3, 3>() = r_;
        m.topRightCorner(3, cols()) = v_;
        return m;
    }

    SEn3 operator*(const SEn3& b) const
    {
        require_same_cols(cols(), b.cols(), "SEn3::compose");
        return {r_ * b.r_, r_ * b.v_ + v_};
    }

    SEn3 inverse() const
    {
        const Mat3 rt = r_.transpose();
        return {rt, -rt * v_};
    }

private:
    Rotation r_;
    Matrix v_;
};

/// Element (R, V, A) of SIM_k(3).
class SIMn3 {
public:
    SIMn3(const Rotation& r, Matrix v, Matrix a) : r_(r), v_(std::move(v)), a_(std::move(a))
    {
        if (v_.rows() != 3) throw std::invalid_argument("SIMn3: V must have 3 rows");
        if (a_.rows() != v_.cols() || a_.cols() != v_.cols()) throw std::invalid_argument("SIMn3: A must be k x k");
    }

    static SIMn3 identity(Index cols) { return {Mat3::Identity(), Matrix::Zero(3, cols), Matrix::Identity(cols, cols)}; }
    static SIMn3 from(const SEn3& x) { return {x.R(), x.V(), Matrix::Identity(x.cols(), x.cols())}; }

    static SIMn3 from_matrix(const Matrix& m, double tol = kAxiomTolerance)
    {
        const Index k = m.rows() - 3;
        if (m.cols() != m.rows() || k < 0) throw std::invalid_argument("SIMn3::from_matrix: bad shape");
        if (!(m.bottomLeftCorner(k, 3).norm() < tol)) throw std::invalid_argument("SIMn3::from_matrix: lower-left block is not 0");
        return {m.topLeftCorner<3, 3>(), m.topRightCorner(3, k), m.bottomRightCorner(k, k)};
    }

    const Rotation& R() const { return r_; }
    const Matrix& V() const { return v_; }
    const Matrix& A() const { return a_; }
    Index cols() const { return v_.cols(); }

    Matrix matrix() const
    {
        Matrix m = Matrix::Zero(3 + cols(), 3 + cols());
        m.topLeftCorner<3, 3>() = r_;
        m.topRightCorner(3, cols()) = v_;
        m.bottomRightCorner(cols(), cols()) = a_;
        return m;
    }

    SIMn3 operator*(const SIMn3& b) const
    {
        require_same_cols(cols(), b.cols(), "SIMn3::compose");
        return {r_ * b.r_, r_ * b.v_ + v_ * b.a_, a_ * b.a_};
    }

    SIMn3 inverse() const;

    /// Drop the scale block, which must equal I within tol.
    SEn3 to_se(double tol = kAxiomTolerance) const
    {
        const double dev = (a_ - Matrix::Identity(cols(), cols())).norm();
        if (!(dev < tol)) {
            std::ostringstream os;
            os << "SIMn3::to_se: scale block deviates from identity by " << dev;
            throw std::domain_error(os.str());
        }
        return {r_, v_};
    }

private:
    Rotation r_;
    Matrix v_;
    Matrix a_;
};

inline double min_singular_value(const Matrix& a)
{
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Inverse of a SIM scale block, rejecting near-singular matrices.
inline Matrix checked_inverse(const Matrix& a, double min_sv = kMinSingularValue)
{
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (!(smin > min_sv)) {
        std::ostringstream os;
        os << "singular A_Z: smallest singular value " << smin << " <= " << min_sv;
        throw std::domain_error(os.str());
    }
    return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

inline SIMn3 SIMn3::inverse() const
{
    const Matrix ainv = checked_inverse(a_);
    const Mat3 rt = r_.transpose();
    return {rt, -rt * v_ * ainv, ainv};
}

namespace detail {

enum class Nilpotency { zero, order2, order3, none };

inline Nilpotency nilpotency(const Matrix& s, Matrix& s2)
{
    if (s.isZero(0.0)) return Nilpotency::zero;
    s2 = s * s;
    if (s2.isZero(0.0)) return Nilpotency::order2;
    if ((s2 * s).isZero(0.0)) return Nilpotency::order3;
    return Nilpotency::none;
}

}  // namespace detail

/**
 * exp(dt * xi) for xi in sim_k(3).
 *
 * The rotation block is always Rodrigues. When S is nilpotent of order <= 3
 * (every S built from the velocity-coupling matrix S_N is) the translation
 * block is the closed form
 *
 *   V = dt J1 W + dt^2 J2 W S + dt^3 J3 W S^2,  J_j = so3_series(dt Omega, j),
 *
 * otherwise the dense embedding goes through scaling-and-squaring.
 */
inline SIMn3 tangent_exp(const SIMTangent& xi, double dt)
{
    const Index k = xi.cols();
    const Vec3 phi = xi.omega * dt;
    const Rotation r = so3_exp(xi.omega, dt);
    Matrix s2;
    switch (detail::nilpotency(xi.S, s2)) {
        case detail::Nilpotency::zero:
            return {r, dt * so3_series(phi, 1) * xi.W, Matrix::Identity(k, k)};
        case detail::Nilpotency::order2:
            return {r, dt * so3_series(phi, 1) * xi.W + dt * dt * so3_series(phi, 2) * xi.W * xi.S,
                    Matrix::Identity(k, k) + dt * xi.S};
        case detail::Nilpotency::order3:
            return {r,
                    dt * so3_series(phi, 1) * xi.W + dt * dt * so3_series(phi, 2) * xi.W * xi.S +
                        dt * dt * dt * so3_series(phi, 3) * xi.W * s2,
                    Matrix::Identity(k, k) + dt * xi.S + 0.5 * dt * dt * s2};
        case detail::Nilpotency::none:
            break;
    }
    const Matrix e = (dt * xi.matrix()).exp();
    return {r, e.topRightCorner(3, k), e.bottomRightCorner(k, k)};
}

/// exp(dt * xi) for xi in se_k(3): (exp(dt Omega^x), dt J_l(dt Omega) W).
inline SEn3 tangent_exp(const SETangent& xi, double dt)
{
    return {so3_exp(xi.omega, dt), dt * so3_series(xi.omega * dt, 1) * xi.W};
}

/// exp(dt left) * x * exp(dt right) on SIM_k(3).
inline SIMn3 mixed_euler_step(const SIMn3& x, const SIMTangent& left, const SIMTangent& right, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("mixed_euler_step: dt must be positive");
    return tangent_exp(left, dt) * x * tangent_exp(right, dt);
}

/**
 * exp(dt left) * x * exp(dt right) for x in SE_k(3). The scale blocks of the
 * two factors must cancel (e.g. left carries S_N and right carries -S_N).
 */
inline SEn3 mixed_euler_step(const SEn3& x, const SIMTangent& left, const SIMTangent& right, double dt)
{
    return mixed_euler_step(SIMn3::from(x), left, right, dt).to_se();
}

inline SEn3 mixed_euler_step(const SEn3& x, const SETangent& left, const SETangent& right, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("mixed_euler_step: dt must be positive");
    return tangent_exp(left, dt) * x * tangent_exp(right, dt);
}

// Constant matrices of the lifted landmark-inertial dynamics, for n landmarks
// (k = n + 2 columns ordered velocity, position, landmarks).

/// Landmark selector C: first row 0, second row 1^T, lower block -I_n.
inline Matrix landmark_selector(Index n)
{
    Matrix c = Matrix::Zero(n + 2, n);
    c.row(1).setOnes();
    c.bottomRows(n) = -Matrix::Identity(n, n);
    return c;
}

/// Position selector C_x = e_2 in R^{n+2}.
inline Vector position_selector(Index n)
{
    Vector cx = Vector::Zero(n + 2);
    cx(1) = 1.0;
    return cx;
}

/// Velocity coupling S_N: single -1 at (velocity, position); S_N^2 = 0.
inline Matrix velocity_coupling(Index n)
{
    Matrix s = Matrix::Zero(n + 2, n + 2);
    s(0, 1) = -1.0;
    return s;
}

/// W_G = (g e3, 0, ..., 0).
inline Matrix gravity_columns(double g, Index n)
{
    Matrix w = Matrix::Zero(3, n + 2);
    w(2, 0) = g;
    return w;
}

/// G + N in sim_{n+2}(3).
inline SIMTangent gravity_and_coupling(double g, Index n)
{
    return {Vec3::Zero(), gravity_columns(g, n), velocity_coupling(n)};
}

/// U - N for IMU input (Omega, a): W_U = (a, 0, ..., 0), scale block -S_N.
inline SIMTangent input_minus_coupling(const Vec3& omega, const Vec3& accel, Index n)
{
    Matrix w = Matrix::Zero(3, n + 2);
    w.col(0) = accel;
    return {omega, w, -velocity_coupling(n)};
}

}  // namespace lislam
