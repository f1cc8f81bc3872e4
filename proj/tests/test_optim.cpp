#include <gtest/gtest.h>

#include <cmath>

#include "wirepinn/error.hpp"
#include "wirepinn/optim.hpp"

using namespace wirepinn;

TEST(Adam, ConvergesOnScalarQuadratic) {
    AdamState s;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(1);
    AdamOptions o;
    o.lr = 1e-2;
    for (int i = 0; i < 2000; ++i) adam_update(s, w, 2.0 * (w.array() - 3.0).matrix(), o);
    EXPECT_LE(std::abs(w[0] - 3.0), 1e-3);
}

TEST(Adam, ZeroGradientFirstStepLeavesParameters) {
    AdamState s;
    Eigen::VectorXd w(3);
    w << 1.0, -2.0, 0.5;
    const Eigen::VectorXd before = w;
    adam_update(s, w, Eigen::VectorXd::Zero(3), {});
    EXPECT_EQ(w, before);
    EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // Bias correction makes the first step lr * g / (|g| + eps).
    AdamState s;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd g(2);
    g << 5.0, -0.01;
    adam_update(s, w, g, {});
    EXPECT_NEAR(w[0], -1e-3 * 5.0 / (5.0 + 1e-8), 1e-18);
    EXPECT_NEAR(w[1], 1e-3 * 0.01 / (0.01 + 1e-8), 1e-18);
}

TEST(Adam, ReflectionSymmetry) {
    // f(w) = (w - 1)^2 + (w + 1)^2 symmetric under w -> -w.
    auto grad = [](const Eigen::VectorXd& w) { return Eigen::VectorXd(4.0 * w); };
    AdamState a, b;
    Eigen::VectorXd wa = Eigen::VectorXd::Constant(1, 0.7), wb = Eigen::VectorXd::Constant(1, -0.7);
    for (int i = 0; i < 50; ++i) {
        adam_update(a, wa, grad(wa), {});
        adam_update(b, wb, grad(wb), {});
        EXPECT_EQ(wa[0], -wb[0]);
    }
}

TEST(Adam, ShapeMismatchThrows) {
    AdamState s;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
    EXPECT_THROW(adam_update(s, w, Eigen::VectorXd::Zero(3), {}), ShapeError);
}

TEST(Adam, ClassMatchesLowLevelUpdateAndClearsGradients) {
    std::vector<Parameter> params{Parameter("a", 2, 1), Parameter("b", 1, 1)};
    params[0].value << 0.3, -0.2;
    params[1].value << 1.0;
    Adam adam(params);
    AdamState s0, s1;
    Eigen::VectorXd w0 = params[0].value, w1 = params[1].value;
    for (int i = 0; i < 5; ++i) {
        params[0].grad << 0.1 * i, -0.3;
        params[1].grad << 0.7;
        adam_update(s0, w0, params[0].grad, {});
        adam_update(s1, w1, params[1].grad, {});
        adam.step(params);
        EXPECT_EQ(params[0].value, w0);
        EXPECT_EQ(params[1].value, w1);
        EXPECT_EQ(params[0].grad, Eigen::VectorXd::Zero(2));
    }
    EXPECT_EQ(adam.step_count(), 5);
}

TEST(Plateau, DecreasingLossKeepsRate) {
    PlateauScheduler s;
    double loss = 1.0;
    for (int i = 0; i < 10000; ++i) {
        loss *= 0.99;
        EXPECT_EQ(s.step(loss), 1e-3);
    }
}

TEST(Plateau, ConstantLossHalvesTwiceInThreePatience) {
    PlateauScheduler s;
    double lr = 0.0;
    for (int i = 0; i < 3 * 2000; ++i) lr = s.step(0.5);
    EXPECT_DOUBLE_EQ(lr, 2.5e-4);
}

TEST(Plateau, FloorIsReachedExactlyAndHeld) {
    PlateauScheduler s;
    double previous = s.lr();
    for (int i = 0; i < 40000; ++i) {
        const double lr = s.step(1.0);
        EXPECT_LE(lr, previous);
        EXPECT_GE(lr, 1e-5);
        previous = lr;
    }
    EXPECT_EQ(previous, 1e-5);
}

TEST(Plateau, SmallImprovementsCountAsPlateau) {
    PlateauOptions o;
    o.patience = 10;
    PlateauScheduler s(o);
    double loss = 1.0;
    s.step(loss);
    // Ten 0.001% steps stay under the 0.1% threshold relative to the best.
    for (int i = 0; i < 10; ++i) s.step(loss *= 0.99999);
    EXPECT_EQ(s.lr(), 5e-4);
}

TEST(Plateau, RejectsBadOptions) {
    PlateauOptions o;
    o.factor = 1.0;
    EXPECT_THROW(PlateauScheduler{o}, ContractError);
}
