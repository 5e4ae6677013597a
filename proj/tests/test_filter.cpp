#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pbcbf/filter.hpp"

using namespace pbcbf;

namespace {

StateVector vec(std::initializer_list<double> v) {
    StateVector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return x;
}

// x' = u on the line, |u| <= 1, keep x > 0.
AffineSystem line_system() {
    AffineSystem s;
    s.name = "line";
    s.n = 1;
    s.m = 1;
    s.bounds = InputBounds::box(vec({-1.0}), vec({1.0}));
    s.evaluate = [](const StateVector&) {
        return Dynamics{StateVector::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
    };
    return s;
}

Barrier positive_x() {
    Barrier b;
    b.name = "positive";
    b.h = [](const StateVector& x) { return x[0]; };
    b.c = [](const StateVector&) { return vec({1.0}); };
    return b;
}

std::vector<GuardedBarrier> keepout(double R = 1.0, double mu = 1.5) {
    return {{radial_keepout_barrier(R, mu), {NormBallGradient{}}}};
}

FilterConfig config(FilterMode mode, double gamma) {
    FilterConfig c;
    c.mode = mode;
    c.kappa = ClassKappa::linear(gamma);
    return c;
}

}  // namespace

TEST(FilterConfig, RejectsBadWeights) {
    FilterConfig c;
    c.H = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_NO_THROW(c.validate(2));
    EXPECT_THROW(c.validate(3), Error);
    c.H(0, 1) = 0.5;
    EXPECT_THROW(c.validate(2), Error);
    c.H << 1, 2, 2, 1;  // symmetric, indefinite
    EXPECT_THROW(c.validate(2), Error);
}

TEST(FilterStep, InactiveFilterPassesTheNominalThrough) {
    const AffineSystem di = double_integrator_polar(1.0);
    const StateVector x = vec({3.0, 0.0, 0.5, 0.0});  // moving away
    const InputVector u = vec({0.3, -0.2});
    for (FilterMode mode : {FilterMode::Base, FilterMode::PredictionBased}) {
        const FilterOutput out = filter_step(di, keepout(), config(mode, 2.0), x, u);
        EXPECT_EQ(out.u, u);
        EXPECT_FALSE(out.diagnostics.filter_on);
        EXPECT_EQ(out.diagnostics.status, QpStatus::Solved);
    }
    const FilterOutput none = filter_step(di, keepout(), config(FilterMode::PredictionBased, 2.0),
                                          x, u);
    EXPECT_FALSE(none.diagnostics.active.has_value());
}

TEST(FilterStep, NoneModeOnlyClamps) {
    const AffineSystem di = double_integrator_polar(1.0);
    const FilterOutput out = filter_step(di, keepout(), config(FilterMode::None, 2.0),
                                         vec({1.01, 0, -3, 0}), vec({3.0, 4.0}));
    EXPECT_NEAR(out.u.norm(), 1.0, 1e-15);
    EXPECT_EQ(out.diagnostics.status, QpStatus::Bypassed);
    EXPECT_TRUE(out.diagnostics.rows.empty());
}

TEST(FilterStep, BaseRowOnTheLine) {
    // Row: du >= -u - gamma x.  x = 0.1, gamma = 2, u = -0.5 -> du >= 0.3.
    const AffineSystem s = line_system();
    const std::vector<GuardedBarrier> b = {{positive_x(), {BangBang{}}}};
    const FilterOutput out = filter_step(s, b, config(FilterMode::Base, 2.0), vec({0.1}), vec({-0.5}));
    EXPECT_NEAR(out.u[0], -0.2, 1e-12);
    EXPECT_TRUE(out.diagnostics.filter_on);
}

TEST(FilterStep, PredictionRowOnTheLine) {
    // Under u0 = +1 the barrier is not approaching, so no barrier is active and
    // the plain row applies.
    const AffineSystem s = line_system();
    const std::vector<GuardedBarrier> b = {{positive_x(), {BangBang{}}}};
    const FilterOutput out =
        filter_step(s, b, config(FilterMode::PredictionBased, 2.0), vec({0.1}), vec({-0.5}));
    EXPECT_FALSE(out.diagnostics.active.has_value());
    EXPECT_NEAR(out.u[0], -0.2, 1e-12);
}

TEST(FilterStep, PredictionRowIdentityAgainstBaseRow) {
    // base.b - pb.b = -h_dot(x, u0) + gamma delta_h, for any state and inputs.
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const AffineSystem di = double_integrator_polar(1.0);
    const Barrier b = radial_keepout_barrier(1.0, 1.5);
    const ClassKappa k = ClassKappa::linear(3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const StateVector x = vec({2.0 + U(rng), U(rng), U(rng), U(rng)});
        const InputVector u = 0.7 * vec({U(rng), U(rng)});
        const InputVector u0 = 0.7 * vec({U(rng), U(rng)});
        const double dh = -std::abs(U(rng));
        const Dynamics d = di.eval(x);
        const StateVector c = b.gradient(x);
        const LinearRow pb = prediction_row(c, d, u, u0, b.value(x), dh, k);
        const LinearRow base = base_row(c, d, u, b.value(x), k);
        EXPECT_LT((pb.a - base.a).norm(), 1e-15);
        EXPECT_NEAR(base.b - pb.b, -h_dot(b, di, x, u0) + k(dh), 1e-12);
        // With u0 = u and delta_h = 0 the rows differ exactly by h_dot(x, u).
        const LinearRow same = prediction_row(c, d, u, u, b.value(x), 0.0, k);
        EXPECT_NEAR(base.b - same.b, -h_dot(b, di, x, u), 1e-12);
    }
}

TEST(FilterStep, StoppingInputIsAlwaysFeasibleForThePredictionRow) {
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const AffineSystem di = double_integrator_polar(1.0);
    const auto barriers = keepout();
    const FilterConfig cfg = config(FilterMode::PredictionBased, 10.0);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const StateVector x = vec({2.5 + U(rng), U(rng), 1.5 * U(rng), 0.3 * U(rng)});
        const Barrier& b = barriers[0].barrier;
        const InputVector u = InputVector(0.7 * vec({U(rng), U(rng)}));
        std::vector<double> rates;
        if (!select_active(barriers, di, x, u, &rates)) continue;
        const PredictionResult pred = compute_delta_h(di, b, barriers[0].policy, x);
        if (!(b.value(x) + pred.delta_h > 0.0)) continue;
        const InputVector u0 = evaluate_policy(barriers[0].policy, di, b, x, u);
        const LinearRow row = prediction_row(b.gradient(x), di.eval(x), u, u0, b.value(x),
                                             pred.delta_h, cfg.kappa);
        EXPECT_TRUE(detail::row_holds(row, u0 - u));
        const FilterOutput out = filter_step(di, barriers, cfg, x, u);
        EXPECT_EQ(out.diagnostics.status, QpStatus::Solved);
        EXPECT_FALSE(out.diagnostics.row_violated);
        EXPECT_TRUE(di.bounds.contains(out.u));
        ++checked;
    }
    EXPECT_GT(checked, 20);
}

TEST(FilterStep, BallProjectionIsTheClosestAdmissiblePoint) {
    std::mt19937 rng(47);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        InputVector v = vec({U(rng), U(rng)});
        if (v.norm() > 0.95) v *= 0.95 / v.norm();  // the filter only projects clamped inputs
        const Eigen::VectorXd a = vec({U(rng), U(rng)});
        const double beta = 0.5 * U(rng);
        const auto best = detail::closest_in_ball_halfspace(v, 1.0, a, beta);
        double sampled = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 400; ++i) {
            for (int j = 0; j <= 400; ++j) {
                const InputVector w = vec({-1.0 + i / 200.0, -1.0 + j / 200.0});
                if (w.norm() <= 1.0 && a.dot(w) >= beta) sampled = std::min(sampled, (w - v).norm());
            }
        }
        if (!best) {
            EXPECT_TRUE(std::isinf(sampled));
            continue;
        }
        EXPECT_LE(best->norm(), 1.0 + 1e-12);
        EXPECT_GE(a.dot(*best), beta - 1e-12);
        EXPECT_LE((*best - v).norm(), sampled + 1e-9);
    }
}

TEST(FilterStep, BallMissingTheHalfspace) {
    EXPECT_FALSE(detail::closest_in_ball_halfspace(vec({0.0, 0.0}), 1.0, vec({1.0, 0.0}), 1.5));
    const auto touching = detail::closest_in_ball_halfspace(vec({0.0, 0.5}), 1.0, vec({1.0, 0.0}), 1.0);
    ASSERT_TRUE(touching);
    EXPECT_NEAR((*touching - vec({1.0, 0.0})).norm(), 0.0, 1e-12);
}

TEST(FilterStep, BaseModeRecordsInfeasibilityAndSaturates) {
    // Fast inbound radial motion right at the boundary: no admissible input
    // satisfies the plain row.
    const AffineSystem di = double_integrator_polar(1.0);
    const StateVector x = vec({1.0 + 4.0 / 3.0 + 1e-3, 0.0, -2.0, 0.0});
    const FilterOutput out = filter_step(di, keepout(), config(FilterMode::Base, 10.0), x,
                                         vec({-1.0, 0.0}));
    EXPECT_EQ(out.diagnostics.status, QpStatus::Infeasible);
    EXPECT_TRUE(out.diagnostics.row_violated);
    EXPECT_NEAR(out.u[0], 1.0, 1e-12);
    EXPECT_NEAR(out.u[1], 0.0, 1e-12);
}

TEST(FilterStep, PredictionModeThrowsWhenOutsideTheReducedSet) {
    const AffineSystem di = double_integrator_polar(1.0);
    // h > 0 but h + delta_h < 0: the stopping margin exceeds the slack.
    const StateVector x = vec({1.0 + 4.0 / 3.0 + 1e-3, 0.0, -2.0, 0.0});
    EXPECT_THROW(filter_step(di, keepout(), config(FilterMode::PredictionBased, 10.0), x,
                             vec({-1.0, 0.0})),
                 Infeasible);
}

TEST(FilterStep, BoxSystemWithWeightUsesTheQp) {
    // Two inputs, x' = u1 + u2 on the line; H penalizes u2 four times as much.
    AffineSystem s;
    s.name = "two_inputs";
    s.n = 1;
    s.m = 2;
    s.bounds = InputBounds::box(vec({-1.0, -1.0}), vec({1.0, 1.0}));
    s.evaluate = [](const StateVector&) {
        Dynamics d{StateVector::Zero(1), Eigen::MatrixXd::Ones(1, 2)};
        return d;
    };
    FilterConfig cfg = config(FilterMode::Base, 1.0);
    cfg.H = Eigen::Matrix2d(Eigen::Vector2d(1.0, 4.0).asDiagonal());
    const std::vector<GuardedBarrier> b = {{positive_x(), {BangBang{}}}};
    // Row: du1 + du2 >= -(u1 + u2) - x = 0.5 at u = (-0.3, -0.2), x = 0.
    const FilterOutput out = filter_step(s, b, cfg, vec({0.0}), vec({-0.3, -0.2}));
    EXPECT_NEAR(out.u[0] + 0.3, 0.4, 1e-12);
    EXPECT_NEAR(out.u[1] + 0.2, 0.1, 1e-12);
}

TEST(FilterStep, OutputAlwaysAdmissible) {
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const AffineSystem di = double_integrator_polar(1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const StateVector x = vec({1.2 + std::abs(U(rng)), U(rng), 2 * U(rng), U(rng)});
        const InputVector u = 3.0 * vec({U(rng), U(rng)});
        const FilterOutput out = filter_step(di, keepout(), config(FilterMode::Base, 5.0), x, u);
        EXPECT_LE(out.u.norm(), 1.0 + 1e-12);
        if (out.diagnostics.status == QpStatus::Solved) {
            EXPECT_FALSE(out.diagnostics.row_violated);
        }
    }
}

TEST(FilterStep, RejectsNonFiniteNominal) {
    const AffineSystem di = double_integrator_polar(1.0);
    EXPECT_THROW(filter_step(di, keepout(), config(FilterMode::Base, 1.0), vec({2, 0, 0, 0}),
                             vec({NAN, 0.0})),
                 NumericalError);
}
