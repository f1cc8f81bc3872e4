#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "wirepinn/autodiff.hpp"

namespace wirepinn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments for one parameter vector.
struct AdamState {
    long step = 0;
    Eigen::VectorXd m, v;
};

/// One bias-corrected Adam update in place. Throws ShapeError.
void adam_update(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, const AdamOptions& opts);

/// Adam over a fixed parameter list.
class Adam {
public:
    Adam(std::span<Parameter> params, const AdamOptions& opts = {});

    /// Updates every parameter and resets its gradient to zero.
    void step(std::span<Parameter> params);
    double lr() const noexcept { return opts_.lr; }
    void set_lr(double lr) noexcept { opts_.lr = lr; }
    long step_count() const noexcept { return states_.empty() ? 0 : states_.front().step; }

private:
    AdamOptions opts_;
    std::vector<AdamState> states_;
};

struct PlateauOptions {
    double initial_lr = 1e-3;
    double factor = 0.5;
    long patience = 2000;
    double threshold = 1e-3;  ///< relative improvement that resets the counter
    double min_lr = 1e-5;
};

/// Reduce-on-plateau: after `patience` consecutive steps without a relative
/// improvement of `threshold` over the best loss, lr *= factor (floored).
class PlateauScheduler {
public:
    explicit PlateauScheduler(const PlateauOptions& opts = {});

    /// Feeds one loss value and returns the learning rate to use next.
    double step(double loss);
    double lr() const noexcept { return lr_; }
    double best() const noexcept { return best_; }

private:
    PlateauOptions opts_;
    double lr_;
    double best_;
    long bad_steps_ = 0;
};

}  // namespace wirepinn
