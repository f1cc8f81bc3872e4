#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "wirepinn/network.hpp"

namespace wirepinn::cli {

/// Options shared by the subcommands. Precedence, lowest first: built-in
/// defaults, --config file, WIREPINN_SEED (seed only), explicit flags.
struct RunConfig {
    std::string device_path;  ///< empty: built-in nanowire
    double sweep_start = 0.0;
    double sweep_end = 0.75;
    double sweep_step = 0.0075;
    std::size_t lr_cutoff = 40;
    double svd_cutoff = 1e-12;
    double ridge = 0.0;
    long epochs = 200000;
    std::uint64_t seed = kDefaultSeed;
    double w_boundary = 1.0;
    double w_fd = 1.0;
    Architecture architecture = Architecture::Dense;
    double max_train_bias = 0.3;
    std::string output_dir = ".";
};

/// Reads `key = value` lines; unknown keys and bad values throw ConfigError.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Applies WIREPINN_SEED if set. Throws ConfigError on a malformed value.
void apply_seed_env(RunConfig& cfg);

/// Throws ConfigError when the combination is unusable.
void validate(const RunConfig& cfg);

}  // namespace wirepinn::cli
