#include "run_config.hpp"

#include <charconv>
#include <cstdlib>

#include <fmt/core.h>

#include "wirepinn/error.hpp"
#include "wirepinn/io.hpp"

namespace wirepinn::cli {

namespace {

template <class T>
T parse(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(fmt::format("bad value '{}' for '{}'", text, key));
    return v;
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    for (const auto& [key, value] : read_key_values(path)) {
        if (key == "device") {
            const std::filesystem::path p(value);
            cfg.device_path = p.is_relative() ? (path.parent_path() / p).string() : value;
        } else if (key == "sweep_start") cfg.sweep_start = parse<double>(key, value);
        else if (key == "sweep_end") cfg.sweep_end = parse<double>(key, value);
        else if (key == "sweep_step") cfg.sweep_step = parse<double>(key, value);
        else if (key == "lr_cutoff") cfg.lr_cutoff = parse<std::size_t>(key, value);
        else if (key == "svd_cutoff") cfg.svd_cutoff = parse<double>(key, value);
        else if (key == "ridge") cfg.ridge = parse<double>(key, value);
        else if (key == "epochs") cfg.epochs = parse<long>(key, value);
        else if (key == "seed") cfg.seed = parse<std::uint64_t>(key, value);
        else if (key == "w_boundary") cfg.w_boundary = parse<double>(key, value);
        else if (key == "w_fd") cfg.w_fd = parse<double>(key, value);
        else if (key == "architecture") cfg.architecture = parse_architecture(value);
        else if (key == "max_train_bias") cfg.max_train_bias = parse<double>(key, value);
        else if (key == "output_dir") cfg.output_dir = value;
        else throw ConfigError(fmt::format("unknown key '{}' in {}", key, path.string()));
    }
}

void apply_seed_env(RunConfig& cfg) {
    if (const char* s = std::getenv("WIREPINN_SEED"); s && *s) cfg.seed = parse<std::uint64_t>("WIREPINN_SEED", s);
}

void validate(const RunConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (cfg.lr_cutoff < 1) throw ConfigError("lr_cutoff must be at least 1");
    if (!(cfg.sweep_step > 0.0) || cfg.sweep_end < cfg.sweep_start)
        throw ConfigError("sweep range needs step > 0 and end >= start");
    if (!(cfg.svd_cutoff >= 0.0) || !(cfg.ridge >= 0.0)) throw ConfigError("svd_cutoff and ridge must be >= 0");
    if (!(cfg.w_boundary >= 0.0) || !(cfg.w_fd >= 0.0)) throw ConfigError("loss weights must be >= 0");
}

}  // namespace wirepinn::cli
