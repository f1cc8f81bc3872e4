#pragma once

#include <Eigen/Core>

namespace wirepinn {

/// Fixed affine map y = A x + b with access to the adjoint A^T.
class AffineOperator {
public:
    virtual ~AffineOperator() = default;
    virtual Eigen::Index rows() const = 0;
    virtual Eigen::Index cols() const = 0;
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
    /// A^T u (the offset does not enter the adjoint).
    virtual Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& u) const = 0;
};

class DenseAffine final : public AffineOperator {
public:
    DenseAffine(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) : a_(a), b_(b) {}

    Eigen::Index rows() const override { return a_.rows(); }
    Eigen::Index cols() const override { return a_.cols(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override { return a_ * x + b_; }
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& u) const override { return a_.transpose() * u; }

private:
    const Eigen::MatrixXd& a_;
    const Eigen::VectorXd& b_;
};

/// A = left * basis^T with basis orthonormal columns.
class LowRankAffine final : public AffineOperator {
public:
    LowRankAffine() = default;
    LowRankAffine(Eigen::MatrixXd left, Eigen::MatrixXd basis, Eigen::VectorXd offset)
        : left_(std::move(left)), basis_(std::move(basis)), offset_(std::move(offset)) {}

    Eigen::Index rows() const override { return left_.rows(); }
    Eigen::Index cols() const override { return basis_.rows(); }
    Eigen::Index rank() const { return basis_.cols(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
        return left_ * (basis_.transpose() * x) + offset_;
    }
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& u) const override {
        return basis_ * (left_.transpose() * u);
    }

private:
    Eigen::MatrixXd left_, basis_;
    Eigen::VectorXd offset_;
};

}  // namespace wirepinn
