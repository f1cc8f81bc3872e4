#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "wirepinn/fermi.hpp"
#include "wirepinn/mesh.hpp"

namespace wirepinn {

/// One gate bias: potential, electron density and net charge at every node.
struct Snapshot {
    double v_gate = 0.0;
    Eigen::VectorXd phi;         ///< [V]
    Eigen::VectorXd n;           ///< [cm^-3]
    Eigen::VectorXd net_charge;  ///< q (N_D - N_A - n) [C/cm^3]
    bool converged = false;
    double residual_norm = 0.0;
    int iterations = 0;
};

struct SweepDataset {
    std::vector<Snapshot> snapshots;
    std::uint64_t mesh_fingerprint = 0;
    SemiconductorParams params;
    double contact_potential = 0.0;  ///< source/drain Dirichlet value
};

struct NewtonOptions {
    int max_iterations = 100;
    double clamp_vt = 10.0;   ///< per-node update limit in units of V_T
    double tolerance = 0.0;   ///< absolute residual bound; 0 selects default_tolerance()
    bool electrons = true;    ///< false drops n from the charge (linear Laplace/Poisson)
};

/// 1e-10 of the largest charge term q * 1e20 * max control volume.
double default_tolerance(const FvCoefficients& fv);

/// Source/drain Dirichlet potential: charge neutrality n = N_D at the contact.
double contact_potential(const TensorMesh& mesh, const SemiconductorParams& p, bool electrons = true);

/// Damped Newton solve of the equilibrium nonlinear Poisson equation with
/// gate nodes at v_gate and source/drain nodes at the charge-neutral
/// potential. Without `initial_guess` the potential starts from a
/// piecewise-linear profile between the contact values.
/// Throws ConvergenceError or NumericError.
Snapshot solve_equilibrium(const TensorMesh& mesh, const FvCoefficients& fv, const SemiconductorParams& p,
                           double v_gate, const NewtonOptions& opts = {},
                           const Eigen::VectorXd* initial_guess = nullptr);

/// Gate ramp v_start, v_start + step, ... up to v_end with continuation.
SweepDataset ramp_sweep(const TensorMesh& mesh, const SemiconductorParams& p, double v_start, double v_end,
                        double step, const NewtonOptions& opts = {});

/// Number of biases ramp_sweep produces for the range.
std::size_t ramp_count(double v_start, double v_end, double step);

/// Infinity norm of the discrete Poisson residual over non-Dirichlet nodes,
/// recomputed from the raw mesh geometry and the snapshot's stored phi and n.
double residual_check(const TensorMesh& mesh, const Snapshot& snapshot);

struct ProbeSample {
    double v_gate;
    double phi;
    double n;
};

std::vector<ProbeSample> extract_probe(const SweepDataset& data, const TensorMesh& mesh, double x_um, double y_um);

}  // namespace wirepinn
