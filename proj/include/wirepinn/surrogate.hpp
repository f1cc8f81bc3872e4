#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "wirepinn/linear_map.hpp"
#include "wirepinn/oracle.hpp"

namespace wirepinn {

inline constexpr double kDensityOffset = 1e10;  ///< [cm^-3] added before normalization
inline constexpr double kDensityScale = 1e19;   ///< [cm^-3] normalization divisor

/// (n + 1e10) / 1e19, elementwise.
Eigen::VectorXd normalize_density(const Eigen::VectorXd& n);
/// Inverse of normalize_density.
Eigen::VectorXd denormalize_density(const Eigen::VectorXd& normalized);

struct FitOptions {
    double cutoff = 1e-12;  ///< singular values below cutoff * s_max are discarded
    double ridge = 0.0;
};

struct SurrogateMetadata {
    std::vector<double> training_biases;  ///< V_G of every training snapshot, in order
    double density_offset = kDensityOffset;
    double density_scale = kDensityScale;
    double cutoff = 1e-12;
    double ridge = 0.0;
    std::size_t rank = 0;  ///< singular directions retained by the fit
    std::uint64_t mesh_fingerprint = 0;

    std::size_t snapshot_count() const { return training_biases.size(); }
    double max_bias() const;
    double min_bias() const;
};

/// Affine map from the normalized density profile to the potential profile:
/// phi = W * n_tilde + b.
class LinearSurrogate {
public:
    LinearSurrogate(Eigen::MatrixXd weights, Eigen::VectorXd intercept, SurrogateMetadata meta);

    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    const Eigen::VectorXd& intercept() const noexcept { return intercept_; }
    const SurrogateMetadata& metadata() const noexcept { return meta_; }
    Eigen::Index size() const noexcept { return intercept_.size(); }

    /// Dense evaluation W * n_tilde + b. Throws ShapeError.
    Eigen::VectorXd predict_phi(const Eigen::VectorXd& normalized_density) const;

    /// The same map as an operator on the full weight matrix.
    DenseAffine dense_operator() const { return DenseAffine(weights_, intercept_); }

    /// Factored form of the same map (W has rank below the training count),
    /// derived deterministically from W alone so that fitted and reloaded
    /// surrogates evaluate identically.
    const LowRankAffine& factored() const noexcept { return factored_; }

private:
    Eigen::MatrixXd weights_;
    Eigen::VectorXd intercept_;
    SurrogateMetadata meta_;
    LowRankAffine factored_;
};

/// Minimum-norm least squares with intercept (centered data, SVD pseudoinverse).
/// Throws ShapeError if the snapshots differ in length, ContractError if empty.
LinearSurrogate fit_surrogate(std::span<const Snapshot> snapshots, std::uint64_t mesh_fingerprint,
                              const FitOptions& opts = {});

/// Fits on the first `count` snapshots of a sweep.
LinearSurrogate fit_surrogate(const SweepDataset& data, std::size_t count, const FitOptions& opts = {});

/// Accuracy of a surrogate over a whole sweep.
struct SurrogateScore {
    double r_squared = 0.0;             ///< over every node of every snapshot
    double in_sample_max_error = 0.0;   ///< [V] over training snapshots
    double out_of_range_max_error = 0.0;  ///< [V] over the rest (0 if none)
    std::vector<double> max_error;      ///< [V] per snapshot
    std::vector<bool> in_training;      ///< per snapshot, matched by bias
};

SurrogateScore score_surrogate(const LinearSurrogate& s, const SweepDataset& data);

}  // namespace wirepinn
