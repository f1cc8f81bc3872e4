#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/QR>

#include "wirepinn/autodiff.hpp"
#include "wirepinn/error.hpp"

using namespace wirepinn;

namespace {

using Graph = std::function<NodeId(Tape&, NodeId)>;

Eigen::VectorXd random_vector(Eigen::Index n, double lo, double hi, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Makes `leaf` trainable by routing it through a dense layer with a 1x1 input.
NodeId leaf_node(Tape& tape, Parameter& leaf, Parameter& zero_bias) {
    return tape.dense(tape.constant(Eigen::VectorXd::Ones(1)), leaf, zero_bias);
}

// Scalar probe: mean((y - target)^2) with a fixed random target.
double probe(const Graph& graph, Parameter& leaf, Parameter& bias, const Eigen::VectorXd& target, bool backward) {
    Tape tape;
    const NodeId y = graph(tape, leaf_node(tape, leaf, bias));
    const NodeId target_node = tape.constant(target);
    const NodeId loss = tape.mse(y, target_node);
    if (backward) tape.backward(loss);
    return tape.value(loss)[0];
}

// Worst relative mismatch between the tape gradient and central differences (step 1e-6).
double gradient_mismatch(const Graph& graph, const Eigen::VectorXd& x0, Eigen::Index out_size) {
    Parameter leaf("x", x0.size(), 1), bias("b", x0.size(), 1);
    leaf.value = x0;
    const Eigen::VectorXd target = random_vector(out_size, -0.5, 0.5, 7);
    probe(graph, leaf, bias, target, true);
    const Eigen::VectorXd analytic = leaf.grad;
    Eigen::VectorXd numeric(x0.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        leaf.value[i] = x0[i] + h;
        const double up = probe(graph, leaf, bias, target, false);
        leaf.value[i] = x0[i] - h;
        const double down = probe(graph, leaf, bias, target, false);
        leaf.value[i] = x0[i];
        numeric[i] = (up - down) / (2 * h);
    }
    return (analytic - numeric).cwiseAbs().maxCoeff() / numeric.cwiseAbs().maxCoeff();
}

constexpr double kPrimitiveTol = 1e-5;

}  // namespace

TEST(Autodiff, DenseGradient) {
    Parameter w("w", 4, 6), b("b", 4, 1);
    w.value = random_vector(24, -1, 1, 1);
    b.value = random_vector(4, -1, 1, 2);
    EXPECT_LE(gradient_mismatch([&](Tape& t, NodeId x) { return t.dense(x, w, b); }, random_vector(6, -1, 1, 3), 4),
              kPrimitiveTol);
}

TEST(Autodiff, DenseWeightGradient) {
    // Gradient wrt the weights themselves: W is the leaf, input fixed.
    Parameter w("w", 3, 2), b("b", 3, 1);
    w.value = random_vector(6, -1, 1, 4);
    const Eigen::VectorXd x = random_vector(2, -1, 1, 5);
    const Eigen::VectorXd target = random_vector(3, -1, 1, 6);
    auto loss = [&](bool back) {
        Tape t;
        const NodeId l = t.mse(t.dense(t.constant(x), w, b), t.constant(target));
        if (back) t.backward(l);
        return t.value(l)[0];
    };
    loss(true);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 6; ++i) {
        const double keep = w.value[i];
        w.value[i] = keep + h;
        const double up = loss(false);
        w.value[i] = keep - h;
        const double down = loss(false);
        w.value[i] = keep;
        EXPECT_NEAR(w.grad[i], (up - down) / (2 * h), 1e-8);
    }
    Eigen::VectorXd expected_bias = 2.0 / 3.0 * ((w.matrix() * x + b.value) - target);
    EXPECT_LE((b.grad - expected_bias).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Autodiff, EluGradient) {
    // Stay clear of the kink at zero.
    Eigen::VectorXd x(6);
    x << -3.0, -1.2, -0.4, 0.3, 0.9, 2.5;
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.elu(a); }, x, 6), kPrimitiveTol);
}

TEST(Autodiff, EluValues) {
    Tape t;
    Eigen::VectorXd x(4);
    x << -800.0, -1.0, 0.0, 2.0;
    const auto& y = t.value(t.elu(t.constant(x)));
    EXPECT_EQ(y[0], -1.0);
    EXPECT_DOUBLE_EQ(y[1], std::expm1(-1.0));
    EXPECT_EQ(y[2], 0.0);
    EXPECT_EQ(y[3], 2.0);
}

TEST(Autodiff, AffineGradientIsAdjoint) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 7);
    const Eigen::VectorXd b = Eigen::VectorXd::Random(5);
    DenseAffine op(a, b);
    EXPECT_LE(gradient_mismatch([&](Tape& t, NodeId x) { return t.affine(x, op); }, random_vector(7, -1, 1, 8), 5),
              kPrimitiveTol);

    // Leaf gradient equals A^T times the upstream gradient of mse(y, target).
    Parameter leaf("x", 7, 1), zero("b", 7, 1);
    leaf.value = random_vector(7, -1, 1, 21);
    const Eigen::VectorXd target = random_vector(5, -1, 1, 22);
    Tape t;
    const NodeId y = t.affine(leaf_node(t, leaf, zero), op);
    t.backward(t.mse(y, t.constant(target)));
    const Eigen::VectorXd upstream = 2.0 / 5.0 * (t.value(y) - target);
    EXPECT_LE((leaf.grad - a.transpose() * upstream).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Autodiff, LowRankAffineGradient) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Random(8, 3);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(8, 3);
    LowRankAffine op(Eigen::MatrixXd::Random(6, 3), basis, Eigen::VectorXd::Random(6));
    EXPECT_LE(gradient_mismatch([&](Tape& t, NodeId x) { return t.affine(x, op); }, random_vector(8, -1, 1, 9), 6),
              kPrimitiveTol);
}

TEST(Autodiff, FermiClosureGradient) {
    const auto p = SemiconductorParams::silicon();
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 0, 1};
    FermiClosure closure(p, mask);
    // Potentials spanning nondegenerate to degenerate electrons.
    Eigen::VectorXd phi(7);
    phi << 0.2, 0.45, 0.5, 0.55, 0.6, 0.65, 0.75;
    auto graph = [&](Tape& t, NodeId x) { return t.divide(t.fermi(x, closure), 1e19); };
    EXPECT_LE(gradient_mismatch(graph, phi, 7), kPrimitiveTol);

    Tape t;
    const auto& n = t.value(t.fermi(t.constant(phi), closure));
    EXPECT_EQ(n[2], 0.0);
    EXPECT_EQ(n[5], 0.0);
    EXPECT_EQ(n[4], electron_density(0.6, p, Region::Silicon));
}

TEST(Autodiff, ElementwiseGradients) {
    const Eigen::VectorXd x = random_vector(5, 0.2, 3.0, 10);
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.add_constant(a, 2.5); }, x, 5), kPrimitiveTol);
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.scale(a, -1.7); }, x, 5), kPrimitiveTol);
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.divide(a, 3.0); }, x, 5), kPrimitiveTol);
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.log10(a); }, x, 5), kPrimitiveTol);
}

TEST(Autodiff, GatherGradient) {
    const std::vector<std::size_t> idx{4, 0, 4, 2};
    EXPECT_LE(gradient_mismatch([&](Tape& t, NodeId a) { return t.gather(a, idx); }, random_vector(6, -1, 1, 11), 4),
              kPrimitiveTol);
}

TEST(Autodiff, ReductionGradients) {
    const Eigen::VectorXd x = random_vector(6, -1, 1, 12);
    const Eigen::VectorXd other = random_vector(6, -1, 1, 13);
    auto mse_graph = [&](Tape& t, NodeId a) { return t.mse(a, t.constant(other)); };
    EXPECT_LE(gradient_mismatch(mse_graph, x, 1), kPrimitiveTol);
    EXPECT_LE(gradient_mismatch([](Tape& t, NodeId a) { return t.mse_const(a, 0.25); }, x, 1), kPrimitiveTol);
    auto ws = [&](Tape& t, NodeId a) { return t.weighted_sum(a, 0.3, t.scale(a, 2.0), -1.1); };
    EXPECT_LE(gradient_mismatch(ws, x, 6), kPrimitiveTol);
}

TEST(Autodiff, ConvTransposeGradient) {
    const ConvShape shape{2, 3, 5, 4};
    Parameter k("k", 2 * 3 * 9, 1), b("b", 3, 1);
    k.value = random_vector(54, -0.5, 0.5, 14);
    b.value = random_vector(3, -0.5, 0.5, 15);
    auto graph = [&](Tape& t, NodeId x) { return t.conv_transpose(x, k, b, shape); };
    EXPECT_LE(gradient_mismatch(graph, random_vector(40, -1, 1, 16), 60), kPrimitiveTol);
}

TEST(Autodiff, ConvTransposeKernelGradient) {
    const ConvShape shape{2, 2, 4, 3};
    Parameter k("k", 36, 1), b("b", 2, 1);
    k.value = random_vector(36, -0.5, 0.5, 17);
    const Eigen::VectorXd x = random_vector(24, -1, 1, 18);
    const Eigen::VectorXd target = random_vector(24, -1, 1, 19);
    auto loss = [&](bool back) {
        Tape t;
        const NodeId l = t.mse(t.conv_transpose(t.constant(x), k, b, shape), t.constant(target));
        if (back) t.backward(l);
        return t.value(l)[0];
    };
    loss(true);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 36; ++i) {
        const double keep = k.value[i];
        k.value[i] = keep + h;
        const double up = loss(false);
        k.value[i] = keep - h;
        const double down = loss(false);
        k.value[i] = keep;
        EXPECT_NEAR(k.grad[i], (up - down) / (2 * h), 1e-8) << i;
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double keep = b.value[c];
        b.value[c] = keep + h;
        const double up = loss(false);
        b.value[c] = keep - h;
        const double down = loss(false);
        b.value[c] = keep;
        EXPECT_NEAR(b.grad[c], (up - down) / (2 * h), 1e-8);
    }
}

TEST(Autodiff, ConvTransposeCenterTapIsIdentity) {
    // Kernel with only the centre tap set copies the input channel.
    const ConvShape shape{1, 1, 3, 4};
    Eigen::VectorXd kernel = Eigen::VectorXd::Zero(9);
    kernel[4] = 1.0;
    const Eigen::VectorXd x = random_vector(12, -1, 1, 20);
    EXPECT_EQ(conv_transpose_forward(x, kernel, Eigen::VectorXd::Zero(1), shape), x);
    // A corner tap shifts by one row and one column with zero fill.
    kernel.setZero();
    kernel[0] = 1.0;  // ky = 0, kx = 0 -> output (h - 1, w - 1)
    const auto y = conv_transpose_forward(x, kernel, Eigen::VectorXd::Zero(1), shape);
    EXPECT_EQ(y[0 * 4 + 0], x[1 * 4 + 1]);
    EXPECT_EQ(y[1 * 4 + 2], x[2 * 4 + 3]);
    EXPECT_EQ(y[2 * 4 + 3], 0.0);
}

TEST(Autodiff, MseGradientVanishesAtTarget) {
    Parameter leaf("x", 4, 1), zero("b", 4, 1);
    leaf.value << 1.0, -2.0, 3.0, 0.5;
    Tape t;
    const NodeId l = t.mse(leaf_node(t, leaf, zero), t.constant(leaf.value));
    t.backward(l);
    EXPECT_EQ(t.value(l)[0], 0.0);
    EXPECT_EQ(leaf.grad, Eigen::VectorXd::Zero(4));
}

TEST(Autodiff, BackwardRequiresScalar) {
    Parameter leaf("x", 3, 1), zero("b", 3, 1);
    Tape t;
    const NodeId y = leaf_node(t, leaf, zero);
    EXPECT_THROW(t.backward(y), ContractError);
    EXPECT_THROW(t.value(99), ContractError);
}

TEST(Autodiff, ShapeMismatchesThrow) {
    Parameter w("w", 2, 3), b("b", 2, 1);
    Tape t;
    const NodeId x = t.constant(Eigen::VectorXd::Ones(4));
    EXPECT_THROW(t.dense(x, w, b), ShapeError);
    EXPECT_THROW(t.mse(x, t.constant(Eigen::VectorXd::Ones(2))), ShapeError);
    const std::vector<std::size_t> bad{7};
    EXPECT_THROW(t.gather(x, bad), ShapeError);
}

TEST(Autodiff, GradientsAccumulateAcrossBackwardCalls) {
    Parameter leaf("x", 2, 1), zero("b", 2, 1);
    leaf.value << 1.0, 2.0;
    for (int pass = 0; pass < 2; ++pass) {
        Tape t;
        t.backward(t.mse_const(leaf_node(t, leaf, zero), 0.0));
    }
    EXPECT_DOUBLE_EQ(leaf.grad[0], 2.0);  // 2 * (2 x / n) with x = 1, n = 2
    EXPECT_DOUBLE_EQ(leaf.grad[1], 4.0);
}
