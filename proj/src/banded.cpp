#include "wirepinn/banded.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wirepinn/error.hpp"

namespace wirepinn {

BandedSpdMatrix::BandedSpdMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

void BandedSpdMatrix::set_zero() {
    std::fill(data_.begin(), data_.end(), 0.0);
    factored_ = false;
}

void BandedSpdMatrix::factorize() {
    for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t k0 = j > bw_ ? j - bw_ : 0;
        double d = lower(j, j);
        for (std::size_t k = k0; k < j; ++k) d -= lower(j, k) * lower(j, k);
        if (!(d > 0.0))
            throw NumericError("banded Cholesky: non-positive pivot at row " + std::to_string(j));
        const double ljj = std::sqrt(d);
        lower(j, j) = ljj;
        const std::size_t i_end = std::min(n_, j + bw_ + 1);
        for (std::size_t i = j + 1; i < i_end; ++i) {
            const std::size_t ki = i > bw_ ? i - bw_ : 0;
            double s = lower(i, j);
            for (std::size_t k = std::max(ki, k0); k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    factored_ = true;
}

void BandedSpdMatrix::solve(std::span<double> b) const {
    if (!factored_) throw ContractError("BandedSpdMatrix::solve before factorize");
    if (b.size() != n_) throw ShapeError("BandedSpdMatrix::solve size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t k0 = i > bw_ ? i - bw_ : 0;
        double s = b[i];
        for (std::size_t k = k0; k < i; ++k) s -= lower(i, k) * b[k];
        b[i] = s / lower(i, i);
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        const std::size_t k_end = std::min(n_, ii + bw_ + 1);
        double s = b[ii];
        for (std::size_t k = ii + 1; k < k_end; ++k) s -= lower(k, ii) * b[k];
        b[ii] = s / lower(ii, ii);
    }
}

}  // namespace wirepinn
