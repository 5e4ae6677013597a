#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pbcbf/harness/controllers.hpp"
#include "pbcbf/system.hpp"

using namespace pbcbf;

namespace {

StateVector vec(std::initializer_list<double> v) {
    StateVector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return x;
}

}  // namespace

TEST(DoubleIntegratorPolar, RestStateIsEquilibrium) {
    const AffineSystem di = double_integrator_polar();
    EXPECT_TRUE(di.dynamics(vec({2, 0, 0, 0}), vec({0, 0})).isZero(0.0));
}

TEST(DoubleIntegratorPolar, CentripetalTerm) {
    const StateVector xd = double_integrator_polar().dynamics(vec({2, 0, 0, 1}), vec({0, 0}));
    EXPECT_DOUBLE_EQ(xd[2], 2.0);
    EXPECT_DOUBLE_EQ(xd[3], 0.0);
}

TEST(DoubleIntegratorPolar, CoriolisTerm) {
    const StateVector xd = double_integrator_polar().dynamics(vec({2, 0, 1, 1}), vec({0, 0}));
    EXPECT_DOUBLE_EQ(xd[3], -1.0);
}

TEST(DoubleIntegratorPolar, SingularityAtOriginIsADomainError) {
    const AffineSystem di = double_integrator_polar(1.0, 1e-6);
    EXPECT_THROW(di.dynamics(vec({1e-7, 0, 0, 0}), vec({0, 0})), DomainError);
    EXPECT_THROW(di.dynamics(vec({-1, 0, 0, 0}), vec({0, 0})), DomainError);
}

TEST(DoubleIntegratorPolar, UsesANormBall) {
    const AffineSystem di = double_integrator_polar(2.5);
    ASSERT_TRUE(di.bounds.is_norm_ball());
    EXPECT_EQ(di.bounds.as_norm_ball().radius, 2.5);
}

TEST(DoubleIntegratorPolar, MatchesCartesianSimulation) {
    // Same closed loop in polar and in Cartesian coordinates over 10 s.
    const AffineSystem di = double_integrator_polar();
    harness::TrackingGains g;
    g.kp = 2.0;
    g.kd = 1.0;
    g.keepout_radius = 0.0;
    const double dt = 1e-3;

    StateVector xp = harness::cartesian_to_polar({-2.0, 1.0}, {1.0, 0.25});
    StateVector xc = vec({-2.0, 1.0, 1.0, 0.25});
    for (int k = 0; k < 10000; ++k) {
        const double t = k * dt;
        // One Cartesian acceleration per step, resolved into the polar
        // channels at each stage so both runs see the same physical input.
        const InputVector u = harness::tracking_controller_di(xp, t, g);
        const Eigen::Vector2d er(std::cos(xp[1]), std::sin(xp[1]));
        const Eigen::Vector2d et(-std::sin(xp[1]), std::cos(xp[1]));
        const Eigen::Vector2d a = u[0] * er + u[1] * et;
        const auto polar = [&](double, const StateVector& y) {
            const Eigen::Vector2d e_r(std::cos(y[1]), std::sin(y[1]));
            const Eigen::Vector2d e_t(-std::sin(y[1]), std::cos(y[1]));
            return di.dynamics(y, vec({a.dot(e_r), a.dot(e_t)}));
        };
        xp = rk4_step(polar, xp, t, dt);
        xc = rk4_step([&](double, const StateVector& y) { return vec({y[2], y[3], a.x(), a.y()}); },
                      xc, t, dt);
    }
    const auto [p, v] = harness::polar_to_cartesian(xp);
    EXPECT_NEAR(p.x(), xc[0], 1e-5);
    EXPECT_NEAR(p.y(), xc[1], 1e-5);
    EXPECT_NEAR(v.x(), xc[2], 1e-5);
    EXPECT_NEAR(v.y(), xc[3], 1e-5);
}

TEST(AccSystem, MatchedSpeedsAndBalancedForceIsEquilibrium) {
    const auto resistance = polynomial_resistance({50.0, 2.0});
    const AffineSystem acc = acc_system(1000.0, 20.0, 3.0, resistance);
    const StateVector xd = acc.dynamics(vec({20.0, 40.0}), vec({resistance(20.0)}));
    EXPECT_NEAR(xd[0], 0.0, 1e-15);
    EXPECT_EQ(xd[1], 0.0);
}

TEST(AccSystem, FullBrakeGivesMinusAmax) {
    const AffineSystem acc = acc_system(1200.0, 20.0, 3.0);
    const StateVector xd = acc.dynamics(vec({25.0, 40.0}), acc.bounds.as_box().lower);
    EXPECT_DOUBLE_EQ(xd[0], -3.0);
}

TEST(AccSystem, GapClosesAtRelativeSpeed) {
    const AffineSystem acc = acc_system(1200.0, 20.0, 3.0);
    EXPECT_DOUBLE_EQ(acc.dynamics(vec({30.0, 40.0}), vec({0.0}))[1], -10.0);
}

TEST(AccSystem, RejectsBadParameters) {
    EXPECT_THROW(acc_system(0.0, 20.0, 3.0), Error);
    EXPECT_THROW(acc_system(1000.0, 20.0, -1.0), Error);
}

TEST(InputBounds, BoxRejectsInvertedLimits) {
    EXPECT_THROW(InputBounds::box(vec({1.0}), vec({0.0})), Error);
    EXPECT_THROW(InputBounds::norm_ball(0.0), Error);
}

TEST(InputBounds, ClampProjectsOntoTheSet) {
    const InputBounds ball = InputBounds::norm_ball(2.0);
    EXPECT_NEAR(ball.clamp(vec({3.0, 4.0})).norm(), 2.0, 1e-15);
    EXPECT_EQ(ball.clamp(vec({0.5, 0.5})), vec({0.5, 0.5}));
    const InputBounds box = InputBounds::box(vec({-1.0, 0.0}), vec({1.0, 100.0}));
    EXPECT_EQ(box.clamp(vec({-3.0, 150.0})), vec({-1.0, 100.0}));
}

TEST(Affinity, DynamicsAreAffineInTheInput) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const AffineSystem di = double_integrator_polar();
    const AffineSystem acc = acc_system(1500.0, 15.0, 3.0, polynomial_resistance({10.0, 0.5, 0.1}));
    for (int trial = 0; trial < 50; ++trial) {
        const double lambda = 2.0 * U(rng);
        const StateVector x = vec({1.5 + U(rng), U(rng), U(rng), U(rng)});
        const InputVector u1 = vec({U(rng), U(rng)});
        const InputVector u2 = vec({U(rng), U(rng)});
        const StateVector lhs = di.dynamics(x, lambda * u1 + (1.0 - lambda) * u2);
        const StateVector rhs = lambda * di.dynamics(x, u1) + (1.0 - lambda) * di.dynamics(x, u2);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);

        const StateVector y = vec({20.0 + 5.0 * U(rng), 50.0});
        const InputVector f1 = vec({4000.0 * U(rng)});
        const InputVector f2 = vec({4000.0 * U(rng)});
        const StateVector a = acc.dynamics(y, lambda * f1 + (1.0 - lambda) * f2);
        const StateVector b = lambda * acc.dynamics(y, f1) + (1.0 - lambda) * acc.dynamics(y, f2);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Linearize, ExactForLinearDrift) {
    Eigen::Matrix3d A0;
    A0 << 0, 1, 0, -2, -0.5, 1, 0.3, 0, -1;
    AffineSystem lin;
    lin.name = "lti";
    lin.n = 3;
    lin.m = 1;
    lin.bounds = InputBounds::box(vec({-1.0}), vec({1.0}));
    lin.evaluate = [A0](const StateVector& x) {
        Dynamics d{A0 * x, Eigen::MatrixXd::Zero(3, 1)};
        d.G(2, 0) = 1.0;
        return d;
    };
    const LinearModel m = linearize(lin, vec({0.4, -2.0, 7.0}), vec({0.0}));
    EXPECT_LE((m.A - Eigen::MatrixXd(A0)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(m.B(2, 0), 1.0);
}

TEST(Linearize, DoubleIntegratorInputMap) {
    const LinearModel m = linearize(double_integrator_polar(), vec({2, 0, 0, 0}), vec({0, 0}));
    EXPECT_EQ(m.B(2, 0), 1.0);
    EXPECT_EQ(m.B(2, 1), 0.0);
    EXPECT_EQ(m.B(3, 0), 0.0);
    EXPECT_EQ(m.B(3, 1), 0.5);
}
