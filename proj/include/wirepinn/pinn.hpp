#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wirepinn/autodiff.hpp"
#include "wirepinn/error.hpp"
#include "wirepinn/mesh.hpp"
#include "wirepinn/network.hpp"
#include "wirepinn/optim.hpp"
#include "wirepinn/oracle.hpp"
#include "wirepinn/surrogate.hpp"

namespace wirepinn {

/// Surrogates fitted above this bias are refused unless the problem says otherwise.
inline constexpr double kDefaultTrainingBiasLimit = 0.3;

struct LossWeights {
    double boundary = 1.0;
    double fd = 1.0;
};

struct PinnOptions {
    long epochs = 200000;
    std::uint64_t seed = kDefaultSeed;
    LossWeights weights;
    NetworkSpec network;
    AdamOptions adam;
    PlateauOptions plateau;
    std::vector<long> checkpoints;  ///< epoch counts at which a prediction is also captured
};

struct LossRecord {
    long step = 0;
    double lr = 0.0;
    double boundary = 0.0;
    double fd = 0.0;
    double total = 0.0;
};

struct LossTerms {
    double boundary = 0.0;
    double fd = 0.0;
    double total = 0.0;
};

/// Generator output after `epochs` updates, mapped to physical fields.
struct PinnPrediction {
    double v_gate = 0.0;
    long epochs = 0;
    Eigen::VectorXd normalized_density;  ///< n-tilde
    Eigen::VectorXd phi;                 ///< surrogate(n-tilde) [V]
    Eigen::VectorXd n;                   ///< n-tilde * 1e19 - 1e10 [cm^-3]
    LossTerms losses;
    double v_gate_extracted = 0.0;  ///< mean phi over gate nodes
};

struct SolveResult {
    PinnPrediction prediction;
    std::vector<PinnPrediction> checkpoints;  ///< in the order requested
    std::vector<LossRecord> history;          ///< one record per update
    std::uint64_t seed = kDefaultSeed;
    std::string architecture;
    std::optional<GeneratorNet> network;      ///< trained weights
};

/// NaN or infinite loss during training; keeps the history up to the failure.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, long step, std::vector<LossRecord> history)
        : NumericError(what), step_(step), history_(std::move(history)) {}

    long step() const noexcept { return step_; }
    const std::vector<LossRecord>& history() const noexcept { return history_; }

private:
    long step_;
    std::vector<LossRecord> history_;
};

/// Everything fixed during a solve. Holds references; mesh and surrogate must outlive it.
class PinnProblem {
public:
    /// Throws ShapeError on a mesh/surrogate mismatch and ContractError if the
    /// surrogate saw any snapshot above `training_bias_limit` or there is no gate.
    PinnProblem(const TensorMesh& mesh, const LinearSurrogate& surrogate, const SemiconductorParams& params,
                double training_bias_limit = kDefaultTrainingBiasLimit);

    const TensorMesh& mesh() const noexcept { return mesh_; }
    const LinearSurrogate& surrogate() const noexcept { return surrogate_; }
    const SemiconductorParams& params() const noexcept { return closure_.params; }
    const FermiClosure& closure() const noexcept { return closure_; }
    std::span<const std::size_t> gate_nodes() const noexcept { return gate_; }
    std::span<const std::size_t> oxide_nodes() const noexcept { return oxide_; }

private:
    const TensorMesh& mesh_;
    const LinearSurrogate& surrogate_;
    FermiClosure closure_;
    std::vector<std::size_t> gate_, oxide_;
};

/// raw + 1 + 1e-9 (raw = -1 maps to exactly 1e-9).
Eigen::VectorXd postprocess(const Eigen::VectorXd& raw);

/// Mean potential over the gate nodes. Throws ContractError on an empty set.
double gate_voltage(const Eigen::VectorXd& phi, std::span<const std::size_t> gate);

/// Mean over gate nodes of (phi - v_gate)^2.
double loss_boundary(const Eigen::VectorXd& phi, std::span<const std::size_t> gate, double v_gate);

/// Mean over all nodes of (log10 n_fd - log10 n_tilde)^2 with n_fd = (n(phi) + 1e10) / 1e19.
double loss_fd(const Eigen::VectorXd& normalized_density, const Eigen::VectorXd& phi, const FermiClosure& closure);

/// Both losses for a given n-tilde, with phi taken from the surrogate.
LossTerms evaluate_losses(const PinnProblem& problem, const Eigen::VectorXd& normalized_density, double v_gate,
                          const LossWeights& weights = {});

/// Training objective of `net` at one bias. With `backward`, adds its
/// gradient to the parameter gradients (skipped when the loss is not finite).
/// Throws NumericError if the generator output drops below the ELU floor.
LossTerms generator_loss(const PinnProblem& problem, GeneratorNet& net, double v_gate, const LossWeights& weights,
                         bool backward = false);

/// Trains a fresh generator for one bias. Throws ContractError for v_gate
/// outside [0, 1] V or epochs < 1, DivergenceError on a non-finite loss.
SolveResult solve_bias(const PinnProblem& problem, double v_gate, const PinnOptions& opts = {});

/// One generator trained on all biases at once (sum of per-bias losses).
/// Returns one prediction per bias; the history holds the summed losses.
struct AmortizedResult {
    std::vector<PinnPrediction> predictions;
    std::vector<LossRecord> history;
    std::optional<GeneratorNet> network;
};
AmortizedResult solve_amortized(const PinnProblem& problem, std::span<const double> biases,
                                const PinnOptions& opts = {});

struct ErrorReport {
    double v_gate = 0.0;
    long epochs = 0;
    double max_phi_err_pct = 0.0;
    double max_logn_err_pct = 0.0;
    double max_abs_phi_err = 0.0;  ///< [V]
    Eigen::VectorXd phi_err;       ///< predicted - oracle [V]
    Eigen::VectorXd logn_err;      ///< log10 n-tilde predicted - oracle
    LossTerms losses;
    double v_gate_extracted = 0.0;
};

/// Percent errors relative to the oracle profile maxima. Throws ShapeError.
ErrorReport evaluate_against(const PinnPrediction& prediction, const Snapshot& oracle);

struct SweepEntry {
    double v_gate = 0.0;
    std::optional<SolveResult> result;
    std::optional<ErrorReport> report;  ///< set when an oracle snapshot matched the bias
    std::string error;                   ///< non-empty if this bias failed
};

/// Independent solve_bias per bias on up to `jobs` threads. Failures are
/// recorded per entry. If `oracle` is given, each bias is scored against the
/// snapshot with the same V_G (within 1e-9 V).
std::vector<SweepEntry> sweep_solve(const PinnProblem& problem, std::span<const double> biases,
                                    const PinnOptions& opts, const SweepDataset* oracle = nullptr,
                                    unsigned jobs = 1);

/// Oracle snapshot with this bias, or nullptr.
const Snapshot* find_snapshot(const SweepDataset& data, double v_gate, double tol = 1e-9);

}  // namespace wirepinn
