#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wirepinn/network.hpp"
#include "wirepinn/oracle.hpp"
#include "wirepinn/pinn.hpp"
#include "wirepinn/surrogate.hpp"

namespace wirepinn {

namespace fs = std::filesystem;

inline constexpr int kSweepFormatVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Writes through a temporary sibling file and renames it into place.
void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& writer);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

// ---- sweeps ---------------------------------------------------------------

/// One text record per node per snapshot:
/// snapshot_index v_gate node_index x_um y_um region phi_V n_cm3
void write_sweep(const SweepDataset& data, const TensorMesh& mesh, const fs::path& path);

/// Throws LoadError (with line number) on version or fingerprint mismatch and
/// on any malformed or missing record.
SweepDataset read_sweep(const fs::path& path, const TensorMesh& mesh);

// ---- binary models ------------------------------------------------------------

enum class ModelKind : std::uint32_t { Surrogate = 1, Network = 2 };

/// Raw container: magic "WPNN", u32 version, u32 kind, u32 ndims, u64 dims[],
/// u64 metadata length, metadata text, u64 payload count, f64 payload (little endian).
struct ModelFile {
    ModelKind kind = ModelKind::Surrogate;
    std::vector<std::uint64_t> dims;
    std::map<std::string, std::string> metadata;
    std::vector<double> payload;
};

void write_model(const ModelFile& model, const fs::path& path);
/// Throws LoadError on bad magic, version, kind or size.
ModelFile read_model(const fs::path& path);

void write_surrogate(const LinearSurrogate& s, const fs::path& path);
/// Throws LoadError, including when the fingerprint differs from `expected_fingerprint` (if nonzero).
LinearSurrogate read_surrogate(const fs::path& path, std::uint64_t expected_fingerprint = 0);

struct NetworkRecord {
    long epochs = 0;
    double v_gate = 0.0;
};

void write_network(const GeneratorNet& net, const NetworkRecord& record, const fs::path& path);
std::pair<GeneratorNet, NetworkRecord> read_network(const fs::path& path);

// ---- reports ----------------------------------------------------------------

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Key/value header, then per-node columns: node x_um y_um region phi_err_V log10n_err.
void write_report(const ErrorReport& report, const TensorMesh& mesh, const fs::path& path,
                  const KeyValues& extra = {});
/// Header keys of a report (per-node rows skipped).
std::map<std::string, std::string> read_report_header(const fs::path& path);

/// step,lr,loss_boundary,loss_fd,loss_total
void write_loss_history(const std::vector<LossRecord>& history, const fs::path& path);

/// Key/value config file for run options (same syntax as device configs).
std::map<std::string, std::string> read_key_values(const fs::path& path);

}  // namespace wirepinn
