#include <cmath>

#include <gtest/gtest.h>

#include "pbcbf/aircraft.hpp"
#include "pbcbf/barrier.hpp"
#include "pbcbf/harness/scenario.hpp"
#include "pbcbf/policy.hpp"

using namespace pbcbf;

namespace {

constexpr double kDeg = M_PI / 180.0;

StateVector vec(std::initializer_list<double> v) {
    StateVector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return x;
}

AircraftParams bare_airframe() {
    AircraftParams p;
    p.mass = 5000.0;
    p.Iy = 20000.0;
    p.S = 20.0;
    p.chord = 2.0;
    return p;
}

AircraftParams trainer() {
    return harness::load_aircraft_params(std::string(PBCBF_SCENARIO_DIR) +
                                         "/aircraft_trainer.json");
}

}  // namespace

TEST(Aircraft, ZeroCoefficientsGiveFreeFall) {
    const AffineSystem sys = aircraft_longitudinal(bare_airframe());
    const StateVector xd = sys.dynamics(vec({80.0, 0.0, 0.0, 0.0}), vec({0.0, 0.0}));
    EXPECT_NEAR(xd[0], 0.0, 1e-12);
    EXPECT_NEAR(xd[1], 9.80665, 1e-12);
    EXPECT_NEAR(xd[2], 0.0, 1e-12);
    EXPECT_NEAR(xd[3], 0.0, 1e-12);
}

TEST(Aircraft, RotationalCouplingWithoutAero) {
    const AffineSystem sys = aircraft_longitudinal(bare_airframe());
    const StateVector xd = sys.dynamics(vec({80.0, 5.0, 0.1, 0.0}), vec({0.0, 0.0}));
    EXPECT_NEAR(xd[0], -0.1 * 5.0, 1e-12);
    EXPECT_NEAR(xd[1], 0.1 * 80.0 + 9.80665, 1e-12);
    EXPECT_NEAR(xd[3], 0.1, 1e-15);
}

TEST(Aircraft, AlphaAndItsGradientAtZeroIncidence) {
    const StateVector x = vec({50.0, 0.0, 0.0, 0.0});
    EXPECT_EQ(angle_of_attack(x), 0.0);
    const Eigen::Vector2d c = alpha_gradient(x);
    EXPECT_EQ(c[0], 0.0);
    EXPECT_DOUBLE_EQ(c[1], 1.0 / 50.0);
}

TEST(Aircraft, NoAlphaDotTermsMeansNoCoupling) {
    // With the alpha_dot derivatives zeroed, W' is the raw force balance.
    AircraftParams p = trainer();
    p.c_F_alphadot.setZero();
    p.C_m_alphadot = 0.0;
    const AffineSystem sys = aircraft_longitudinal(p);
    const StateVector x = vec({84.0, 15.0, 0.02, 0.18});
    const Dynamics d = sys.eval(x);

    const double V = std::hypot(x[0], x[1]);
    const double alpha = std::atan2(x[1], x[0]);
    const double qbar = 0.5 * p.rho * V * V;
    const double CL = p.c_F0[0] + p.C_Fi(0, 0) * alpha + p.C_Fi(0, 1) * V / p.speed_of_sound +
                      p.C_Fi(0, 2) * x[2];
    const double CD = p.c_F0[1] + p.C_Fi(1, 0) * alpha + p.C_Fi(1, 1) * V / p.speed_of_sound +
                      p.C_Fi(1, 2) * x[2];
    const double L = qbar * p.S * CL;
    const double D = qbar * p.S * CD;
    // Lift is normal to the velocity, drag along it; body z points down.
    const double X = L * std::sin(alpha) - D * std::cos(alpha);
    const double Z = -L * std::cos(alpha) - D * std::sin(alpha);
    const double Udot = -x[2] * x[1] - p.g * std::sin(x[3]) + X / p.mass;
    const double Wdot = x[2] * x[0] + p.g * std::cos(x[3]) + Z / p.mass;
    const double Cm = p.C_m0 + p.c_mi[0] * alpha + p.c_mi[1] * V / p.speed_of_sound +
                      p.c_mi[2] * x[2];
    EXPECT_NEAR(d.f[0], Udot, 1e-9);
    EXPECT_NEAR(d.f[1], Wdot, 1e-9);
    EXPECT_NEAR(d.f[2], qbar * p.S * p.chord * Cm / p.Iy, 1e-9);
    EXPECT_NEAR(d.G(0, 1), p.X_delta_th, 1e-15);
    EXPECT_NEAR(d.G(2, 0), qbar * p.S * p.chord * p.C_m_delta_E / p.Iy, 1e-9);
}

TEST(Aircraft, DomainGuards) {
    const AffineSystem sys = aircraft_longitudinal(bare_airframe());
    EXPECT_THROW(sys.dynamics(vec({0.5, 0.0, 0.0, 0.0}), vec({0.0, 0.0})), DomainError);
    AircraftParams bad = bare_airframe();
    bad.S = 0.0;
    EXPECT_THROW(aircraft_longitudinal(bad), Error);
}

TEST(Aircraft, SingularCouplingIsReported) {
    AircraftParams p = bare_airframe();
    // Choose C_L_alphadot so that 1 + kf C_L_alphadot cos(alpha) U / V^2 vanishes
    // at alpha = 0: the W' coefficient of the coupling matrix is zero.
    const double V = 80.0;
    const double kf = 0.5 * p.rho * V * V * p.S / p.mass;
    p.c_F_alphadot << -V / kf, 0.0;
    const AffineSystem sys = aircraft_longitudinal(p);
    EXPECT_THROW(sys.eval(vec({V, 0.0, 0.0, 0.0})), SingularMassMatrix);
}

TEST(Trim, ZeroCoefficientAirframeCannotTrim) {
    EXPECT_THROW(trim_solve(bare_airframe(), 80.0, 0.0), TrimNotConverged);
}

TEST(Trim, ShippedTrainerTrimsNearTenDegrees) {
    const AircraftParams p = trainer();
    const TrimPoint trim = trim_solve(p, 85.34, 0.0);
    const double alpha = angle_of_attack(trim.x);
    EXPECT_GE(alpha, 9.0 * kDeg);
    EXPECT_LE(alpha, 11.0 * kDeg);

    const AffineSystem sys = aircraft_longitudinal(p);
    EXPECT_LT(sys.dynamics(trim.x, trim.u).head<3>().norm(), 1e-9);
    EXPECT_TRUE(sys.bounds.contains(trim.u));
    EXPECT_NEAR(std::hypot(trim.x[0], trim.x[1]), 85.34, 1e-9);
    EXPECT_EQ(trim.x[2], 0.0);
    EXPECT_NEAR(trim.x[3], alpha, 1e-12);

    // Equilibrium: alpha does not move, so neither stall barrier moves.
    EXPECT_NEAR(h_dot(aoa_upper_barrier(15.0 * kDeg), sys, trim.x, trim.u), 0.0, 1e-9);
}

TEST(Trim, ClimbingTrimHoldsFlightPathAngle) {
    const TrimPoint trim = trim_solve(trainer(), 85.34, 2.0 * kDeg);
    EXPECT_NEAR(trim.x[3] - angle_of_attack(trim.x), 2.0 * kDeg, 1e-12);
}

TEST(Linearize, AircraftAtTrimHasKinematicPitchRow) {
    const AircraftParams p = trainer();
    const TrimPoint trim = trim_solve(p, 85.34, 0.0);
    const AffineSystem sys = aircraft_longitudinal(p);
    const LinearModel lin = linearize(sys, trim.x, trim.u);
    EXPECT_EQ(lin.A(3, 0), 0.0);
    EXPECT_EQ(lin.A(3, 1), 0.0);
    EXPECT_NEAR(lin.A(3, 2), 1.0, 1e-9);
    EXPECT_EQ(lin.A(3, 3), 0.0);
    // Pitch moment does not depend on attitude.
    EXPECT_NEAR(lin.A(2, 3), 0.0, 1e-9);
    EXPECT_TRUE(lin.B.row(3).isZero(0.0));
}

TEST(Linearize, ThrottleEntryOfCABIsNegligibleForTheStallBarrier) {
    const AircraftParams p = trainer();
    const TrimPoint trim = trim_solve(p, 85.34, 0.0);
    const AffineSystem sys = aircraft_longitudinal(p);
    const LinearReference ref =
        make_linear_reference(sys, aoa_upper_barrier(15.0 * kDeg), trim.x, trim.u);
    const Eigen::RowVectorXd g = ref.c.transpose() * ref.A * ref.B;
    // Elevator dominates; throttle sits far below a 1e-3 relative threshold.
    EXPECT_GT(g[0], 0.0);
    EXPECT_LT(std::abs(g[1]), 1e-3 * std::abs(g[0]));
    const InputVector u0 = bang_bang_u0(ref.c, ref.A, ref.B, sys.bounds.as_box(),
                                        GradientSource::CAB, vec({0.0, 42.0}), 1e-3);
    EXPECT_DOUBLE_EQ(u0[0], p.delta_E_max);
    EXPECT_EQ(u0[1], 42.0);
}

TEST(AircraftParamsJson, AnglesInDegreesAndRequiredKeys) {
    const AircraftParams p = trainer();
    EXPECT_NEAR(p.delta_E_min, -20.0 * kDeg, 1e-15);
    EXPECT_NEAR(p.delta_E_max, 10.0 * kDeg, 1e-15);
    EXPECT_EQ(p.delta_th_max, 100.0);

    harness::json j = {{"m", 1.0}, {"Iy", 1.0}, {"S", 1.0}, {"c", 1.0}};
    EXPECT_THROW(harness::aircraft_params_from_json(j), Error);
}
