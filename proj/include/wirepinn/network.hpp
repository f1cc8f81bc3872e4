#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "wirepinn/autodiff.hpp"

namespace wirepinn {

enum class Architecture { Dense, ConvTranspose };

std::string to_string(Architecture a);
/// Accepts "dense" or "conv". Throws ConfigError.
Architecture parse_architecture(const std::string& name);

inline constexpr std::uint64_t kDefaultSeed = 42;

struct NetworkSpec {
    Architecture architecture = Architecture::Dense;
    Eigen::Index output_size = 2193;
    Eigen::Index hidden1 = 64;
    Eigen::Index hidden2 = 256;  ///< dense variant only
    Eigen::Index channels = 4;   ///< conv variant only
    Eigen::Index grid_height = 129;
    Eigen::Index grid_width = 17;
    double input_scale = 0.75;  ///< the network sees v_gate / input_scale
};

/// Maps a scalar gate bias to a raw field with an ELU output activation.
///
/// Dense: 1 -> hidden1 (ELU) -> hidden2 (ELU) -> output (ELU).
/// Conv:  1 -> hidden1 (ELU) -> channels*output (ELU), viewed as
///        channels x height x width, then two 3x3 transposed convolutions
///        (channels -> channels, ELU; channels -> 1, ELU).
class GeneratorNet {
public:
    explicit GeneratorNet(const NetworkSpec& spec = {}, std::uint64_t seed = kDefaultSeed);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
    void init_params(std::uint64_t seed);
    /// Zeroes the last layer so the output is exactly ELU(0) = 0.
    void zero_output_layer();

    NodeId forward(Tape& tape, double v_gate);
    Eigen::VectorXd forward(double v_gate);

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    void zero_grad();
    std::size_t parameter_count() const;

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }
    /// e.g. "dense:1-64-256-2193:elu" or "conv:1-64-4x129x17-4-1:elu".
    std::string architecture_string() const;

private:
    NetworkSpec spec_;
    std::uint64_t seed_;
    std::vector<Parameter> params_;
    std::vector<Eigen::Index> fan_in_;
};

}  // namespace wirepinn
