#include "wirepinn/network.hpp"

#include <cmath>
#include <random>

#include <fmt/core.h>

#include "wirepinn/error.hpp"

namespace wirepinn {

std::string to_string(Architecture a) { return a == Architecture::Dense ? "dense" : "conv"; }

Architecture parse_architecture(const std::string& name) {
    if (name == "dense") return Architecture::Dense;
    if (name == "conv") return Architecture::ConvTranspose;
    throw ConfigError("unknown architecture '" + name + "' (expected dense or conv)");
}

GeneratorNet::GeneratorNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec), seed_(seed) {
    if (spec.output_size < 1 || spec.hidden1 < 1) throw ConfigError("network sizes must be positive");
    if (!(spec.input_scale > 0.0)) throw ConfigError("input scale must be positive");
    auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
        params_.emplace_back(std::move(name), rows, cols);
        fan_in_.push_back(fan_in);
    };
    const Eigen::Index h1 = spec.hidden1;
    add("l1.weight", h1, 1, 1);
    add("l1.bias", h1, 1, 1);
    if (spec.architecture == Architecture::Dense) {
        const Eigen::Index h2 = spec.hidden2;
        if (h2 < 1) throw ConfigError("network sizes must be positive");
        add("l2.weight", h2, h1, h1);
        add("l2.bias", h2, 1, h1);
        add("l3.weight", spec.output_size, h2, h2);
        add("l3.bias", spec.output_size, 1, h2);
    } else {
        const Eigen::Index c = spec.channels;
        if (c < 1 || spec.grid_height * spec.grid_width != spec.output_size)
            throw ConfigError("conv grid must match the output size");
        add("l2.weight", c * spec.output_size, h1, h1);
        add("l2.bias", c * spec.output_size, 1, h1);
        add("c1.kernel", c * c * 9, 1, c * 9);
        add("c1.bias", c, 1, c * 9);
        add("c2.kernel", c * 9, 1, c * 9);
        add("c2.bias", 1, 1, c * 9);
    }
    init_params(seed);
}

void GeneratorNet::init_params(std::uint64_t seed) {
    seed_ = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t p = 0; p < params_.size(); ++p) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_[p]));
        for (Eigen::Index i = 0; i < params_[p].value.size(); ++i) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
            params_[p].value[i] = bound * (2.0 * u - 1.0);
        }
        params_[p].zero_grad();
    }
}

void GeneratorNet::zero_output_layer() {
    params_[params_.size() - 2].value.setZero();
    params_[params_.size() - 1].value.setZero();
}

void GeneratorNet::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

std::size_t GeneratorNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

std::string GeneratorNet::architecture_string() const {
    if (spec_.architecture == Architecture::Dense)
        return fmt::format("dense:1-{}-{}-{}:elu", spec_.hidden1, spec_.hidden2, spec_.output_size);
    return fmt::format("conv:1-{}-{}x{}x{}-{}-1:elu", spec_.hidden1, spec_.channels, spec_.grid_height,
                       spec_.grid_width, spec_.channels);
}

NodeId GeneratorNet::forward(Tape& tape, double v_gate) {
    auto& p = params_;
    NodeId x = tape.constant(Eigen::VectorXd::Constant(1, v_gate / spec_.input_scale));
    x = tape.elu(tape.dense(x, p[0], p[1]));
    x = tape.elu(tape.dense(x, p[2], p[3]));
    if (spec_.architecture == Architecture::Dense) return tape.elu(tape.dense(x, p[4], p[5]));
    const Eigen::Index c = spec_.channels;
    x = tape.elu(tape.conv_transpose(x, p[4], p[5], {c, c, spec_.grid_height, spec_.grid_width}));
    return tape.elu(tape.conv_transpose(x, p[6], p[7], {c, 1, spec_.grid_height, spec_.grid_width}));
}

Eigen::VectorXd GeneratorNet::forward(double v_gate) {
    Tape tape;
    return tape.value(forward(tape, v_gate));
}

}  // namespace wirepinn
