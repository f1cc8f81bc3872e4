#include "wirepinn/surrogate.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <random>

#include "wirepinn/error.hpp"

namespace wirepinn {

Eigen::VectorXd normalize_density(const Eigen::VectorXd& n) {
    return (n.array() + kDensityOffset) / kDensityScale;
}

Eigen::VectorXd denormalize_density(const Eigen::VectorXd& normalized) {
    return normalized.array() * kDensityScale - kDensityOffset;
}

double SurrogateMetadata::max_bias() const {
    return training_biases.empty() ? 0.0 : *std::max_element(training_biases.begin(), training_biases.end());
}

double SurrogateMetadata::min_bias() const {
    return training_biases.empty() ? 0.0 : *std::min_element(training_biases.begin(), training_biases.end());
}

namespace {

// Range of W^T from a fixed random sketch: W = (W Q) Q^T whenever rank(W) < columns of Q.
LowRankAffine factorize(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, std::size_t training_count) {
    const Eigen::Index p = w.cols();
    const Eigen::Index k = std::min<Eigen::Index>(p, static_cast<Eigen::Index>(training_count) + 8);
    std::mt19937_64 rng(0x5eedULL);
    Eigen::MatrixXd omega(w.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            omega(i, j) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    const Eigen::MatrixXd sketch = w.transpose() * omega;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sketch);
    Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(p, k);
    Eigen::MatrixXd left = w * basis;
    return LowRankAffine(std::move(left), std::move(basis), b);
}

}  // namespace

LinearSurrogate::LinearSurrogate(Eigen::MatrixXd weights, Eigen::VectorXd intercept, SurrogateMetadata meta)
    : weights_(std::move(weights)), intercept_(std::move(intercept)), meta_(std::move(meta)) {
    if (weights_.rows() != intercept_.size() || weights_.cols() != intercept_.size())
        throw ShapeError("surrogate weights must be square and match the intercept");
    if (!weights_.allFinite() || !intercept_.allFinite()) throw NumericError("surrogate has non-finite entries");
    factored_ = factorize(weights_, intercept_, std::max<std::size_t>(meta_.snapshot_count(), 1));
}

Eigen::VectorXd LinearSurrogate::predict_phi(const Eigen::VectorXd& normalized_density) const {
    if (normalized_density.size() != size()) throw ShapeError("density profile length does not match surrogate");
    return weights_ * normalized_density + intercept_;
}

LinearSurrogate fit_surrogate(std::span<const Snapshot> snapshots, std::uint64_t mesh_fingerprint,
                              const FitOptions& opts) {
    if (snapshots.empty()) throw ContractError("fit_surrogate needs at least one snapshot");
    const Eigen::Index p = snapshots.front().phi.size();
    const auto m = static_cast<Eigen::Index>(snapshots.size());
    Eigen::MatrixXd x(m, p), y(m, p);
    SurrogateMetadata meta;
    meta.cutoff = opts.cutoff;
    meta.ridge = opts.ridge;
    meta.mesh_fingerprint = mesh_fingerprint;
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto& s = snapshots[static_cast<std::size_t>(r)];
        if (s.phi.size() != p || s.n.size() != p) throw ShapeError("snapshots are on different meshes");
        x.row(r) = normalize_density(s.n).transpose();
        y.row(r) = s.phi.transpose();
        meta.training_biases.push_back(s.v_gate);
    }

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    x.rowwise() -= x_mean;
    y.rowwise() -= y_mean;

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
    if (m > 1) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& s = svd.singularValues();
        Eigen::Index rank = 0;
        while (rank < s.size() && s[rank] > 0.0 && s[rank] > opts.cutoff * s[0]) ++rank;
        meta.rank = static_cast<std::size_t>(rank);
        if (rank > 0) {
            const Eigen::ArrayXd sr = s.head(rank).array();
            const Eigen::VectorXd gain = (sr / (sr.square() + opts.ridge)).matrix();
            // W = Y^T U diag(gain) V^T
            const Eigen::MatrixXd left = (y.transpose() * svd.matrixU().leftCols(rank)) * gain.asDiagonal();
            w.noalias() = left * svd.matrixV().leftCols(rank).transpose();
        }
    }
    Eigen::VectorXd b = y_mean.transpose() - w * x_mean.transpose();
    return LinearSurrogate(std::move(w), std::move(b), std::move(meta));
}

LinearSurrogate fit_surrogate(const SweepDataset& data, std::size_t count, const FitOptions& opts) {
    if (count == 0 || count > data.snapshots.size())
        throw ContractError("training count must be between 1 and the number of snapshots");
    return fit_surrogate(std::span<const Snapshot>(data.snapshots.data(), count), data.mesh_fingerprint, opts);
}

SurrogateScore score_surrogate(const LinearSurrogate& s, const SweepDataset& data) {
    SurrogateScore out;
    const auto& trained = s.metadata().training_biases;
    double mean = 0.0;
    std::size_t count = 0;
    for (const auto& snap : data.snapshots) {
        mean += snap.phi.sum();
        count += static_cast<std::size_t>(snap.phi.size());
    }
    if (count == 0) return out;
    mean /= static_cast<double>(count);
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& snap : data.snapshots) {
        const Eigen::VectorXd err = s.predict_phi(normalize_density(snap.n)) - snap.phi;
        ss_res += err.squaredNorm();
        ss_tot += (snap.phi.array() - mean).square().sum();
        const double e = err.cwiseAbs().maxCoeff();
        const bool in = std::find(trained.begin(), trained.end(), snap.v_gate) != trained.end();
        out.max_error.push_back(e);
        out.in_training.push_back(in);
        double& slot = in ? out.in_sample_max_error : out.out_of_range_max_error;
        slot = std::max(slot, e);
    }
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace wirepinn
