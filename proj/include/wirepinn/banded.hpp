#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wirepinn {

/// Symmetric positive-definite band matrix with `bandwidth` sub-diagonals,
/// factorized in place by Cholesky (A = L L^T).
class BandedSpdMatrix {
public:
    BandedSpdMatrix(std::size_t n, std::size_t bandwidth);

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return bw_; }

    void set_zero();
    /// Entry (i, j) with i >= j and i - j <= bandwidth.
    double& lower(std::size_t i, std::size_t j) noexcept { return data_[i * (bw_ + 1) + (bw_ - (i - j))]; }
    double lower(std::size_t i, std::size_t j) const noexcept {
        return data_[i * (bw_ + 1) + (bw_ - (i - j))];
    }

    /// Throws NumericError on a non-positive pivot.
    void factorize();
    /// Solves in place; requires factorize().
    void solve(std::span<double> rhs) const;

private:
    std::size_t n_, bw_;
    std::vector<double> data_;
    bool factored_ = false;
};

}  // namespace wirepinn
