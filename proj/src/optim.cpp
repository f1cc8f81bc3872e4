#include "wirepinn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wirepinn/error.hpp"

namespace wirepinn {

namespace {

// Single pass over the parameters; optionally clears the gradient it consumed.
void fused_update(AdamState& s, Eigen::VectorXd& params, Eigen::VectorXd& grads, const AdamOptions& o,
                  bool clear_grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: gradient and parameter sizes differ");
    if (s.m.size() == 0) {
        s.m = Eigen::VectorXd::Zero(params.size());
        s.v = Eigen::VectorXd::Zero(params.size());
    }
    if (s.m.size() != params.size()) throw ShapeError("adam: state and parameter sizes differ");
    ++s.step;
    const double b1 = o.beta1, b2 = o.beta2, eps = o.eps;
    const double step_size = o.lr / (1.0 - std::pow(b1, static_cast<double>(s.step)));
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(1.0 - std::pow(b2, static_cast<double>(s.step)));
    double* p = params.data();
    double* g = grads.data();
    double* m = s.m.data();
    double* v = s.v.data();
    const Eigen::Index n = params.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = mi;
        v[i] = vi;
        p[i] -= step_size * mi / (std::sqrt(vi) * inv_sqrt_bc2 + eps);
        if (clear_grads) g[i] = 0.0;
    }
}

}  // namespace

void adam_update(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grads, const AdamOptions& o) {
    Eigen::VectorXd g = grads;
    fused_update(s, params, g, o, false);
}

Adam::Adam(std::span<Parameter> params, const AdamOptions& opts) : opts_(opts), states_(params.size()) {}

void Adam::step(std::span<Parameter> params) {
    if (params.size() != states_.size()) throw ShapeError("adam: parameter list changed");
    for (std::size_t i = 0; i < params.size(); ++i)
        fused_update(states_[i], params[i].value, params[i].grad, opts_, true);
}

PlateauScheduler::PlateauScheduler(const PlateauOptions& opts)
    : opts_(opts), lr_(opts.initial_lr), best_(std::numeric_limits<double>::infinity()) {
    if (!(opts.factor > 0.0 && opts.factor < 1.0) || opts.patience < 1 || !(opts.min_lr > 0.0))
        throw ContractError("invalid plateau scheduler options");
}

double PlateauScheduler::step(double loss) {
    if (loss < best_ * (1.0 - opts_.threshold)) {
        best_ = loss;
        bad_steps_ = 0;
    } else if (++bad_steps_ >= opts_.patience) {
        lr_ = std::max(lr_ * opts_.factor, opts_.min_lr);
        bad_steps_ = 0;
    }
    return lr_;
}

}  // namespace wirepinn
