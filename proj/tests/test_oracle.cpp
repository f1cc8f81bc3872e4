#include <gtest/gtest.h>

#include <cmath>

#include "wirepinn/error.hpp"
#include "wirepinn/oracle.hpp"

using namespace wirepinn;

namespace {

struct DefaultSweep {
    TensorMesh mesh = build_device_mesh();
    FvCoefficients fv = assemble_fv_coefficients(mesh);
    SemiconductorParams params = SemiconductorParams::silicon();
    SweepDataset data = ramp_sweep(mesh, params, 0.0, 0.75, 0.0075);
};

const DefaultSweep& sweep() {
    static const DefaultSweep s;
    return s;
}

}  // namespace

TEST(Oracle, LaplaceWithHomogeneousContactsIsZero) {
    DeviceConfig c;
    c.nd_cm3 = 0.0;
    c.na_cm3 = 0.0;
    const auto mesh = build_device_mesh(c);
    const auto fv = assemble_fv_coefficients(mesh);
    NewtonOptions opts;
    opts.electrons = false;
    const auto s = solve_equilibrium(mesh, fv, SemiconductorParams::silicon(), 0.0, opts);
    EXPECT_TRUE(s.converged);
    EXPECT_EQ(s.phi.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(residual_check(mesh, s), 0.0);
}

TEST(Oracle, SourceContactIsChargeNeutral) {
    const auto& s = sweep();
    const auto& snap = s.data.snapshots.front();
    for (auto k : s.mesh.nodes_with(Contact::Source))
        EXPECT_NEAR(snap.n[static_cast<Eigen::Index>(k)], 1e20, 1e18);
}

TEST(Oracle, SweepHas101Snapshots) {
    EXPECT_EQ(sweep().data.snapshots.size(), 101u);
    EXPECT_EQ(ramp_count(0.0, 0.75, 0.0075), 101u);
    EXPECT_DOUBLE_EQ(sweep().data.snapshots.back().v_gate, 0.75);
}

TEST(Oracle, DegenerateRangeGivesOneSnapshot) {
    const auto& s = sweep();
    const auto d = ramp_sweep(s.mesh, s.params, 0.3, 0.3, 0.01);
    ASSERT_EQ(d.snapshots.size(), 1u);
    EXPECT_EQ(d.snapshots[0].v_gate, 0.3);
}

TEST(Oracle, RampRejectsBadRange) {
    EXPECT_THROW(ramp_count(0.0, 1.0, 0.0), ContractError);
    EXPECT_THROW(ramp_count(1.0, 0.0, 0.1), ContractError);
}

TEST(Oracle, EverySnapshotPassesIndependentResidualCheck) {
    const auto& s = sweep();
    const double tol = default_tolerance(s.fv);
    for (const auto& snap : s.data.snapshots) {
        EXPECT_TRUE(snap.converged);
        EXPECT_LE(snap.residual_norm, tol);
        EXPECT_LE(residual_check(s.mesh, snap), tol) << "V_G=" << snap.v_gate;
    }
}

TEST(Oracle, ConvergesWithinThirtyIterations) {
    for (const auto& snap : sweep().data.snapshots) EXPECT_LE(snap.iterations, 30) << snap.v_gate;
}

TEST(Oracle, SnapshotInvariants) {
    const auto& s = sweep();
    for (const auto& snap : s.data.snapshots) {
        ASSERT_EQ(snap.phi.size(), 2193);
        ASSERT_EQ(snap.n.size(), 2193);
        for (std::size_t k = 0; k < s.mesh.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            EXPECT_GE(snap.n[kk], 0.0);
            if (s.mesh.region(k) == Region::Oxide) EXPECT_EQ(snap.n[kk], 0.0);
            if (s.mesh.contact(k) == Contact::Gate) EXPECT_EQ(snap.phi[kk], snap.v_gate);
            // shared closure: n is exactly electron_density(phi)
            EXPECT_EQ(snap.n[kk], electron_density(snap.phi[kk], s.params, s.mesh.region(k)));
        }
    }
}

TEST(Oracle, MirrorSymmetry) {
    const auto& s = sweep();
    for (std::size_t b : {0u, 40u, 100u}) {
        const auto& snap = s.data.snapshots[b];
        for (std::size_t i = 0; i < s.mesh.nx(); ++i) {
            for (std::size_t j = 0; j < s.mesh.ny(); ++j) {
                const auto a = static_cast<Eigen::Index>(s.mesh.node(i, j));
                const auto m = static_cast<Eigen::Index>(s.mesh.node(s.mesh.nx() - 1 - i, j));
                EXPECT_NEAR(snap.phi[a], snap.phi[m], 1e-10);
                EXPECT_NEAR(snap.n[a], snap.n[m], 1e-8 * std::max(snap.n[a], 1.0));
            }
        }
    }
}

TEST(Oracle, ProbeRisesMonotonically) {
    const auto& s = sweep();
    const auto probe = extract_probe(s.data, s.mesh, 0.0405, 0.002);
    ASSERT_EQ(probe.size(), s.data.snapshots.size());
    for (std::size_t b = 1; b < probe.size(); ++b) EXPECT_GE(probe[b].phi, probe[b - 1].phi);
    EXPECT_GT(probe.back().phi, probe.front().phi + 0.3);
}

TEST(Oracle, ProbeAtGateNodeTracksBias) {
    const auto& s = sweep();
    const auto gate = s.mesh.nodes_with(Contact::Gate).front();
    const auto probe = extract_probe(s.data, s.mesh, s.mesh.x_um(gate), s.mesh.y_um(gate));
    for (std::size_t b = 0; b < probe.size(); ++b) EXPECT_EQ(probe[b].phi, s.data.snapshots[b].v_gate);
}

TEST(Oracle, ResidualDetectsPerturbation) {
    const auto& s = sweep();
    Snapshot snap = s.data.snapshots[50];
    const double base = residual_check(s.mesh, snap);
    snap.phi[static_cast<Eigen::Index>(s.mesh.node(64, 6))] += 1e-3;
    EXPECT_GT(residual_check(s.mesh, snap), base);
}

TEST(Oracle, NonConvergenceCarriesResidual) {
    const auto& s = sweep();
    NewtonOptions opts;
    opts.max_iterations = 1;
    try {
        solve_equilibrium(s.mesh, s.fv, s.params, 0.5, opts);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 0.0);
        EXPECT_EQ(e.iterations(), 1);
    }
}

TEST(Oracle, InitialGuessShapeChecked) {
    const auto& s = sweep();
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(5);
    EXPECT_THROW(solve_equilibrium(s.mesh, s.fv, s.params, 0.0, {}, &bad), ShapeError);
}

TEST(Oracle, InversionChargeAppearsAboveTrainingRange) {
    // subthreshold at 0.3 V, inversion by 0.75 V at the probe node
    const auto& s = sweep();
    const auto probe = extract_probe(s.data, s.mesh, 0.0405, 0.002);
    EXPECT_LT(probe[40].n, 1e16);
    EXPECT_GT(probe[100].n, 1e18);
}
