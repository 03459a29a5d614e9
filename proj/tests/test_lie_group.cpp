#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace lislam;
using namespace lislam::testing;

TEST(Hat, UnitZ)
{
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    EXPECT_EQ(hat(Vec3::UnitZ()), expected);
    EXPECT_TRUE(hat(Vec3::Zero()).isZero(0.0));
}

TEST(Hat, MatchesCrossProduct)
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Vec3 w = random_vec3(rng), v = random_vec3(rng);
        const Mat3 h = hat(w);
        EXPECT_LT((h + h.transpose()).norm(), 1e-15);
        EXPECT_LT((h * v - w.cross(v)).norm(), 1e-14);
    }
}

TEST(Vee, RoundTrip)
{
    EXPECT_EQ(vee(hat(Vec3(1, 2, 3))), Vec3(1, 2, 3));
    EXPECT_TRUE(vee(Mat3::Zero()).isZero(0.0));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        const Vec3 w = random_vec3(rng, 10.0);
        EXPECT_LT((vee(hat(w)) - w).norm(), 1e-14);
    }
}

TEST(Vee, RejectsSymmetricPart)
{
    Mat3 m = hat(Vec3(1, 2, 3));
    m(0, 1) += 1e-6;
    EXPECT_THROW(vee(m), std::invalid_argument);
}

TEST(So3Exp, HalfTurnAboutZ)
{
    const Rotation r = so3_exp(Vec3(0, 0, std::numbers::pi), 1.0);
    Mat3 expected;
    expected << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    EXPECT_LT((r - expected).norm(), 1e-15);
    EXPECT_EQ(so3_exp(Vec3::Zero(), 0.3), Mat3::Identity());
}

TEST(So3Exp, TinyAngleMatchesTruncatedSeries)
{
    const Vec3 w = Vec3(1, -2, 0.5).normalized() * 1e-10;
    const Mat3 k = hat(w);
    const Mat3 series = Mat3::Identity() + k + 0.5 * k * k;
    EXPECT_LT((so3_exp(w) - series).norm(), 1e-15);
}

TEST(So3Exp, MatchesDenseOracleAcrossBranch)
{
    std::mt19937_64 rng(3);
    for (double scale : {1e-6, 0.3, 0.99, 1.01, 2.0, 3.1, 7.0}) {
        for (int i = 0; i < 20; ++i) {
            const Vec3 w = random_vec3(rng).normalized() * scale;
            const Rotation r = so3_exp(w);
            EXPECT_LT((r - taylor_expm(hat(w))).norm(), 1e-13) << "angle " << scale;
            EXPECT_TRUE(is_rotation(r, 1e-14));
        }
    }
}

TEST(So3Series, LeftJacobianAndHigherMatchIntegralOracle)
{
    // sum_k K^k/(k+j)! read off the exponential of an augmented nilpotent block matrix.
    std::mt19937_64 rng(4);
    for (double scale : {1e-4, 0.5, 1.5, 4.0}) {
        const Vec3 phi = random_vec3(rng).normalized() * scale;
        Matrix big = Matrix::Zero(12, 12);
        big.block<3, 3>(0, 0) = hat(phi);
        for (int b = 0; b < 3; ++b) big.block<3, 3>(3 * b, 3 * b + 3) = Mat3::Identity();
        const Matrix e = taylor_expm(big);
        for (int j = 1; j <= 3; ++j)
            EXPECT_LT((so3_series(phi, j) - e.block<3, 3>(0, 3 * j)).norm(), 1e-13) << "j=" << j << " |phi|=" << scale;
    }
}

TEST(SEn3, ComposeMatchesDenseProduct)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const SEn3 a = random_se(rng, 7), b = random_se(rng, 7), c = random_se(rng, 7);
        EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).norm(), 1e-13);
        EXPECT_LT((((a * b) * c).matrix() - (a * (b * c)).matrix()).norm(), 1e-12);
        EXPECT_EQ((a * SEn3::identity(7)).matrix(), a.matrix());
        EXPECT_LT(((a * a.inverse()).matrix() - Matrix::Identity(10, 10)).norm(), 1e-12);
        EXPECT_LT((a.inverse().matrix() - a.matrix().inverse()).norm(), 1e-11);
        EXPECT_TRUE(is_rotation((a * b * c).R()));
    }
}

TEST(SEn3, InverseClosedForm)
{
    std::mt19937_64 rng(6);
    const SEn3 a = random_se(rng, 4);
    EXPECT_EQ(a.inverse().R(), a.R().transpose());
    EXPECT_LT((a.inverse().V() + a.R().transpose() * a.V()).norm(), 1e-15);
    EXPECT_EQ(SEn3::identity(4).inverse().matrix(), Matrix::Identity(7, 7));
}

TEST(SEn3, DimensionMismatchThrows)
{
    EXPECT_THROW(SEn3::identity(3) * SEn3::identity(4), std::invalid_argument);
}

TEST(SIMn3, GroupAxiomsAgainstDenseArithmetic)
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const SIMn3 a = random_sim(rng, 7), b = random_sim(rng, 7), c = random_sim(rng, 7);
        EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).norm(), 1e-12);
        EXPECT_LT((((a * b) * c).matrix() - (a * (b * c)).matrix()).norm(), 1e-11);
        EXPECT_LT(((a * a.inverse()).matrix() - Matrix::Identity(10, 10)).norm(), 1e-11);
        EXPECT_LT((a.inverse().matrix() - a.matrix().inverse()).norm(), 1e-11);
        const Matrix prod = (a * b).matrix();
        EXPECT_TRUE(prod.bottomLeftCorner(7, 3).isZero(0.0));
    }
}

TEST(SIMn3, SingularScaleBlockNamesSingularValue)
{
    Matrix a = Matrix::Identity(4, 4);
    a(3, 3) = 1e-12;
    const SIMn3 z(Mat3::Identity(), Matrix::Zero(3, 4), a);
    try {
        (void)z.inverse();
        FAIL() << "expected domain_error";
    } catch (const std::domain_error& ex) {
        EXPECT_NE(std::string(ex.what()).find("smallest singular value"), std::string::npos);
    }
}

TEST(ConstantMatrices, Structure)
{
    const Index n = 4;
    const Matrix c = landmark_selector(n);
    EXPECT_TRUE(c.row(0).isZero(0.0));
    EXPECT_TRUE(c.row(1).isOnes(0.0));
    EXPECT_EQ(Matrix(c.bottomRows(n)), Matrix(-Matrix::Identity(n, n)));
    Vector cx = Vector::Zero(n + 2);
    cx(1) = 1.0;
    EXPECT_EQ(position_selector(n), cx);
    const Matrix sn = velocity_coupling(n);
    EXPECT_TRUE((sn * sn).isZero(0.0));
}

TEST(ConstantMatrices, EmbeddingsAreNilpotent)
{
    const Index n = 5;
    const Matrix sn = SIMTangent{Vec3::Zero(), Matrix::Zero(3, n + 2), velocity_coupling(n)}.matrix();
    EXPECT_TRUE((sn * sn).isZero(0.0));
    const Matrix gn = gravity_and_coupling(9.81, n).matrix();
    EXPECT_TRUE((gn * gn * gn).isZero(0.0));
    EXPECT_FALSE((gn * gn).isZero(0.0));
}

TEST(TangentExp, ZeroIsIdentity)
{
    EXPECT_EQ(tangent_exp(SIMTangent::zero(6), 0.5).matrix(), Matrix::Identity(9, 9));
    EXPECT_EQ(tangent_exp(SETangent::zero(6), 0.5).matrix(), Matrix::Identity(9, 9));
}

TEST(TangentExp, GravityCouplingTerminatesAtSecondOrder)
{
    const Index n = 5;
    const double dt = 0.37;
    const Matrix a = dt * gravity_and_coupling(9.81, n).matrix();
    const Matrix closed = Matrix::Identity(n + 5, n + 5) + a + 0.5 * a * a;
    const Matrix lib = tangent_exp(gravity_and_coupling(9.81, n), dt).matrix();
    EXPECT_LT((lib - closed).norm(), 1e-14);
    EXPECT_LT((lib - taylor_expm(a)).norm(), 1e-14);
}

TEST(TangentExp, NilpotentOrderThreeBranch)
{
    // S strictly upper triangular 3x3 block: S^3 = 0, S^2 != 0.
    std::mt19937_64 rng(8);
    const Index m = 5;
    Matrix s = Matrix::Zero(m, m);
    s(0, 1) = 0.7;
    s(1, 2) = -1.3;
    const SIMTangent xi{random_vec3(rng), random_matrix(rng, 3, m), s};
    for (double dt : {1e-3, 0.2, 1.7}) EXPECT_LT((tangent_exp(xi, dt).matrix() - taylor_expm(dt * xi.matrix())).norm(), 1e-12);
}

TEST(TangentExp, RandomSimTangentsMatchOracle)
{
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Index m = 7;
        const SIMTangent xi{random_vec3(rng), random_matrix(rng, 3, m), random_matrix(rng, m, m, 0.5)};
        const double dt = 0.05 + 0.01 * i;
        const SIMn3 e = tangent_exp(xi, dt);
        EXPECT_LT((e.matrix() - taylor_expm(dt * xi.matrix())).norm(), 1e-12 * (1.0 + e.matrix().norm()));
        EXPECT_TRUE(is_rotation(e.R()));
    }
}

TEST(TangentExp, RandomSeTangentsMatchOracle)
{
    std::mt19937_64 rng(10);
    for (int i = 0; i < 100; ++i) {
        const SETangent xi{random_vec3(rng, 2.0), random_matrix(rng, 3, 7)};
        EXPECT_LT((tangent_exp(xi, 0.8).matrix() - taylor_expm(0.8 * xi.matrix())).norm(), 1e-12);
    }
}

TEST(MixedEulerStep, ZeroTangentsLeaveStateUnchanged)
{
    std::mt19937_64 rng(11);
    const SEn3 x = random_se(rng, 7);
    EXPECT_EQ(mixed_euler_step(x, SETangent::zero(7), SETangent::zero(7), 0.1).matrix(), x.matrix());
    const SIMn3 z = random_sim(rng, 7);
    EXPECT_LT((mixed_euler_step(z, SIMTangent::zero(7), SIMTangent::zero(7), 0.1).matrix() - z.matrix()).norm(), 1e-15);
}

TEST(MixedEulerStep, RejectsNonPositiveDt)
{
    const SEn3 x = SEn3::identity(3);
    EXPECT_THROW(mixed_euler_step(x, SETangent::zero(3), SETangent::zero(3), 0.0), std::invalid_argument);
    EXPECT_THROW(mixed_euler_step(SIMn3::identity(3), SIMTangent::zero(3), SIMTangent::zero(3), -1.0),
                 std::invalid_argument);
}

TEST(MixedEulerStep, TruthStepLocalErrorIsSecondOrder)
{
    const Index n = 5;
    const SystemParams p = SystemParams::circle_scenario();
    const SEn3 x0 = circle_initial_state(p);
    const InputProfile input = wobbly_input();
    std::vector<double> errs;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const SEn3 step = propagate_truth(x0, input(0.0), p.gravity, dt);
        const Matrix oracle = rk4_truth(x0.matrix(), input, p.gravity, n, 0.0, dt, 50);
        errs.push_back((step.matrix() - oracle).norm());
    }
    EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.4);
    EXPECT_NEAR(errs[1] / errs[2], 4.0, 0.4);
}

TEST(MixedEulerStep, ZStepIsExactForFrozenGamma)
{
    // With constant left/right tangents the step is the exact flow of Zdot = (G+N) Z - Z Gamma.
    std::mt19937_64 rng(12);
    const Index n = 5, m = n + 2;
    const SIMn3 z(Mat3::Identity(), random_matrix(rng, 3, m), random_az(rng, m));
    SIMTangent gamma{Vec3::Zero(), random_matrix(rng, 3, m), random_matrix(rng, m, m, 0.3)};
    const SIMTangent gn = gravity_and_coupling(9.81, n);
    const double dt = 0.01;
    const SIMn3 step = mixed_euler_step(z, gn, -gamma, dt);
    Matrix zz = z.matrix();
    const int sub = 200;
    const double h = dt / sub;
    auto f = [&](const Matrix& x) -> Matrix { return gn.matrix() * x - x * gamma.matrix(); };
    for (int k = 0; k < sub; ++k) {
        const Matrix k1 = f(zz), k2 = f(zz + 0.5 * h * k1), k3 = f(zz + 0.5 * h * k2), k4 = f(zz + h * k3);
        zz += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    EXPECT_LT((step.matrix() - zz).norm(), 1e-11);
}

TEST(MixedEulerStep, DtHalvingShowsFirstOrderConvergence)
{
    const Index n = 5;
    const SystemParams p = SystemParams::circle_scenario();
    const InputProfile input = wobbly_input(0.4);
    auto integrate = [&](double dt) {
        SEn3 x = circle_initial_state(p);
        const int steps = static_cast<int>(std::lround(2.0 / dt));
        for (int k = 0; k < steps; ++k) x = propagate_truth(x, input(k * dt), p.gravity, dt);
        return x;
    };
    const SEn3 a = integrate(4e-3), b = integrate(2e-3), c = integrate(1e-3);
    const double r = (a.matrix() - b.matrix()).norm() / (b.matrix() - c.matrix()).norm();
    EXPECT_GE(r, 1.8);
    EXPECT_LE(r, 2.2);
    const Matrix oracle = rk4_truth(circle_initial_state(p).matrix(), input, p.gravity, n, 0.0, 2.0, 4000);
    EXPECT_LT((c.matrix() - oracle).norm(), (a.matrix() - oracle).norm() / 3.0);
}

TEST(MixedEulerStep, LongRunKeepsRotationOnGroup)
{
    const SystemParams p = SystemParams::circle_scenario();
    const InputProfile input = wobbly_input();
    SEn3 x = circle_initial_state(p);
    for (int k = 0; k < 80000; ++k) x = propagate_truth(x, input(k * 5e-4), p.gravity, 5e-4);
    EXPECT_LT((x.R().transpose() * x.R() - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT(std::abs(x.R().determinant() - 1.0), 1e-9);
}
