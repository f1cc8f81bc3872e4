#include "wirepinn/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <fmt/core.h>

#include "wirepinn/constants.hpp"
#include "wirepinn/error.hpp"

namespace wirepinn {

namespace {

constexpr std::array<char, 4> kMagic{'W', 'P', 'N', 'N'};

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line, const char* what) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw LoadError(fmt::format("cannot parse {} from '{}'", what, s), line);
    return v;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> parse_doubles(std::string_view s, std::size_t line, const char* what) {
    std::vector<double> out;
    for (auto tok : split(s)) out.push_back(parse_number<double>(tok, line, what));
    return out;
}

// Little-endian primitive encoding, independent of the host byte order.
void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& is, int bytes, const char* what) {
    std::array<unsigned char, 8> buf{};
    if (!is.read(reinterpret_cast<char*>(buf.data()), bytes)) throw LoadError(fmt::format("truncated {}", what));
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[static_cast<std::size_t>(i)];
    return v;
}

const std::string& require_key(const std::map<std::string, std::string>& m, const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end()) throw LoadError("model metadata lacks '" + key + "'");
    return it->second;
}

double meta_double(const std::map<std::string, std::string>& m, const std::string& key) {
    return parse_number<double>(require_key(m, key), 0, key.c_str());
}

template <class T>
T meta_int(const std::map<std::string, std::string>& m, const std::string& key) {
    return parse_number<T>(require_key(m, key), 0, key.c_str());
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + fmt::format(".tmp{}", ::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        writer(os);
        os.flush();
        if (!os) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("write failed for " + path.string());
        }
    }
    fs::rename(tmp, path);
}

// ---- sweeps ---------------------------------------------------------------

void write_sweep(const SweepDataset& data, const TensorMesh& mesh, const fs::path& path) {
    if (data.mesh_fingerprint != mesh.fingerprint()) throw ShapeError("sweep belongs to a different mesh");
    for (const auto& s : data.snapshots)
        if (static_cast<std::size_t>(s.phi.size()) != mesh.size() || static_cast<std::size_t>(s.n.size()) != mesh.size())
            throw ShapeError("snapshot length does not match mesh");
    atomic_write(path, [&](std::ostream& os) {
        std::vector<double> biases;
        for (const auto& s : data.snapshots) biases.push_back(s.v_gate);
        os << "# wirepinn sweep\n";
        os << "format_version " << kSweepFormatVersion << '\n';
        os << "mesh_fingerprint " << data.mesh_fingerprint << '\n';
        os << "nodes " << mesh.size() << '\n';
        os << "n_c " << format_double(data.params.n_c) << '\n';
        os << "v_t " << format_double(data.params.v_t) << '\n';
        os << "phi_ref " << format_double(data.params.phi_ref) << '\n';
        os << "contact_potential " << format_double(data.contact_potential) << '\n';
        os << "snapshots " << data.snapshots.size() << '\n';
        os << "biases " << join_doubles(biases) << '\n';
        for (std::size_t b = 0; b < data.snapshots.size(); ++b) {
            const auto& s = data.snapshots[b];
            os << "solver " << b << ' ' << (s.converged ? 1 : 0) << ' ' << s.iterations << ' '
               << format_double(s.residual_norm) << '\n';
        }
        os << "columns snapshot_index v_gate node_index x_um y_um region phi_V n_cm3\n";
        std::string line;
        for (std::size_t b = 0; b < data.snapshots.size(); ++b) {
            const auto& s = data.snapshots[b];
            const std::string vg = format_double(s.v_gate);
            for (std::size_t k = 0; k < mesh.size(); ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                line = fmt::format("{} {} {} {} {} {} {} {}\n", b, vg, k, format_double(mesh.x_um(k)),
                                   format_double(mesh.y_um(k)), to_string(mesh.region(k)), format_double(s.phi[kk]),
                                   format_double(s.n[kk]));
                os << line;
            }
        }
    });
}

SweepDataset read_sweep(const fs::path& path, const TensorMesh& mesh) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open sweep file " + path.string());
    SweepDataset data;
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const char* expect) -> std::vector<std::string_view> {
        for (;;) {
            if (!std::getline(is, line)) throw LoadError(fmt::format("unexpected end of file, expected {}", expect), lineno + 1);
            ++lineno;
            if (!line.empty() && line[0] == '#') continue;
            auto tok = split(line);
            if (tok.empty()) continue;
            return tok;
        }
    };
    auto header = [&](const char* key) {
        auto tok = next(key);
        if (tok[0] != key || tok.size() < 2) throw LoadError(fmt::format("expected '{}'", key), lineno);
        return tok;
    };

    const int version = parse_number<int>(header("format_version")[1], lineno, "format_version");
    if (version != kSweepFormatVersion)
        throw LoadError(fmt::format("unsupported sweep format version {}", version), lineno);
    data.mesh_fingerprint = parse_number<std::uint64_t>(header("mesh_fingerprint")[1], lineno, "fingerprint");
    if (data.mesh_fingerprint != mesh.fingerprint())
        throw LoadError("sweep was generated on a different mesh (fingerprint mismatch)", lineno);
    const auto nodes = parse_number<std::size_t>(header("nodes")[1], lineno, "nodes");
    if (nodes != mesh.size()) throw LoadError("node count does not match mesh", lineno);
    data.params.n_c = parse_number<double>(header("n_c")[1], lineno, "n_c");
    data.params.v_t = parse_number<double>(header("v_t")[1], lineno, "v_t");
    data.params.phi_ref = parse_number<double>(header("phi_ref")[1], lineno, "phi_ref");
    data.contact_potential = parse_number<double>(header("contact_potential")[1], lineno, "contact_potential");
    const auto count = parse_number<std::size_t>(header("snapshots")[1], lineno, "snapshots");
    auto bias_tok = header("biases");
    if (bias_tok.size() != count + 1) throw LoadError("bias list length does not match snapshot count", lineno);
    data.snapshots.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        auto& s = data.snapshots[b];
        s.v_gate = parse_number<double>(bias_tok[b + 1], lineno, "bias");
        s.phi.resize(static_cast<Eigen::Index>(nodes));
        s.n.resize(static_cast<Eigen::Index>(nodes));
        s.net_charge.resize(static_cast<Eigen::Index>(nodes));
    }
    for (std::size_t b = 0; b < count; ++b) {
        auto tok = header("solver");
        if (tok.size() != 5 || parse_number<std::size_t>(tok[1], lineno, "snapshot index") != b)
            throw LoadError("malformed solver line", lineno);
        auto& s = data.snapshots[b];
        s.converged = parse_number<int>(tok[2], lineno, "converged flag") != 0;
        s.iterations = parse_number<int>(tok[3], lineno, "iterations");
        s.residual_norm = parse_number<double>(tok[4], lineno, "residual");
    }
    header("columns");

    for (std::size_t b = 0; b < count; ++b) {
        auto& s = data.snapshots[b];
        for (std::size_t k = 0; k < nodes; ++k) {
            auto tok = next("a node record");
            if (tok.size() != 8) throw LoadError(fmt::format("expected 8 fields, found {}", tok.size()), lineno);
            if (parse_number<std::size_t>(tok[0], lineno, "snapshot index") != b ||
                parse_number<std::size_t>(tok[2], lineno, "node index") != k)
                throw LoadError(fmt::format("expected record for snapshot {} node {}", b, k), lineno);
            if (parse_number<double>(tok[1], lineno, "v_gate") != s.v_gate)
                throw LoadError("record bias differs from header", lineno);
            if (parse_number<double>(tok[3], lineno, "x_um") != mesh.x_um(k) ||
                parse_number<double>(tok[4], lineno, "y_um") != mesh.y_um(k) || tok[5] != to_string(mesh.region(k)))
                throw LoadError("node geometry differs from mesh", lineno);
            const auto kk = static_cast<Eigen::Index>(k);
            s.phi[kk] = parse_number<double>(tok[6], lineno, "phi");
            s.n[kk] = parse_number<double>(tok[7], lineno, "n");
            s.net_charge[kk] = constants::q * (mesh.net_doping(k) - s.n[kk]);
        }
    }
    while (std::getline(is, line)) {
        ++lineno;
        if (!split(line).empty()) throw LoadError("trailing data after last record", lineno);
    }
    return data;
}

// ---- binary models ------------------------------------------------------------

void write_model(const ModelFile& model, const fs::path& path) {
    std::string meta;
    for (const auto& [k, v] : model.metadata) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
            throw ContractError("metadata keys must be single words and values single lines");
        meta += k + ' ' + v + '\n';
    }
    atomic_write(path, [&](std::ostream& os) {
        os.write(kMagic.data(), kMagic.size());
        put_u32(os, kModelFormatVersion);
        put_u32(os, static_cast<std::uint32_t>(model.kind));
        put_u32(os, static_cast<std::uint32_t>(model.dims.size()));
        for (auto d : model.dims) put_u64(os, d);
        put_u64(os, meta.size());
        os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
        put_u64(os, model.payload.size());
        for (double v : model.payload) put_u64(os, std::bit_cast<std::uint64_t>(v));
    });
}

ModelFile read_model(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open model file " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != kMagic) throw LoadError("not a WPNN model file (bad magic)");
    const auto version = static_cast<std::uint32_t>(get_le(is, 4, "version"));
    if (version != kModelFormatVersion) throw LoadError(fmt::format("unsupported model format version {}", version));
    ModelFile m;
    const auto kind = static_cast<std::uint32_t>(get_le(is, 4, "kind"));
    if (kind != 1 && kind != 2) throw LoadError(fmt::format("unknown model kind {}", kind));
    m.kind = static_cast<ModelKind>(kind);
    const auto ndims = get_le(is, 4, "dimension count");
    if (ndims > 64) throw LoadError("implausible dimension count");
    for (std::uint64_t i = 0; i < ndims; ++i) m.dims.push_back(get_le(is, 8, "dimensions"));
    const auto meta_len = get_le(is, 8, "metadata length");
    if (meta_len > (1u << 26)) throw LoadError("implausible metadata length");
    std::string meta(meta_len, '\0');
    if (!is.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw LoadError("truncated metadata");
    std::istringstream ms(meta);
    std::string line;
    while (std::getline(ms, line)) {
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw LoadError("malformed metadata entry");
        m.metadata[line.substr(0, sp)] = line.substr(sp + 1);
    }
    const auto count = get_le(is, 8, "payload length");
    if (count > (1ull << 32)) throw LoadError("implausible payload length");
    m.payload.resize(count);
    for (auto& v : m.payload) v = std::bit_cast<double>(get_le(is, 8, "payload"));
    if (is.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after payload");
    return m;
}

void write_surrogate(const LinearSurrogate& s, const fs::path& path) {
    const auto p = static_cast<std::uint64_t>(s.size());
    ModelFile m;
    m.kind = ModelKind::Surrogate;
    m.dims = {p, p};
    const auto& meta = s.metadata();
    m.metadata["training_biases"] = join_doubles(meta.training_biases);
    m.metadata["density_offset"] = format_double(meta.density_offset);
    m.metadata["density_scale"] = format_double(meta.density_scale);
    m.metadata["cutoff"] = format_double(meta.cutoff);
    m.metadata["ridge"] = format_double(meta.ridge);
    m.metadata["rank"] = std::to_string(meta.rank);
    m.metadata["mesh_fingerprint"] = std::to_string(meta.mesh_fingerprint);
    m.payload.resize(p * p + p);
    std::memcpy(m.payload.data(), s.weights().data(), p * p * sizeof(double));  // column-major
    std::memcpy(m.payload.data() + p * p, s.intercept().data(), p * sizeof(double));
    write_model(m, path);
}

LinearSurrogate read_surrogate(const fs::path& path, std::uint64_t expected_fingerprint) {
    const ModelFile m = read_model(path);
    if (m.kind != ModelKind::Surrogate) throw LoadError("model file does not hold a surrogate");
    if (m.dims.size() != 2 || m.dims[0] != m.dims[1]) throw LoadError("surrogate dimensions must be square");
    const auto p = m.dims[0];
    if (m.payload.size() != p * p + p) throw LoadError("surrogate payload size does not match dimensions");
    SurrogateMetadata meta;
    meta.training_biases = parse_doubles(require_key(m.metadata, "training_biases"), 0, "training bias");
    meta.density_offset = meta_double(m.metadata, "density_offset");
    meta.density_scale = meta_double(m.metadata, "density_scale");
    if (meta.density_offset != kDensityOffset || meta.density_scale != kDensityScale)
        throw LoadError("surrogate uses a different density normalization");
    meta.cutoff = meta_double(m.metadata, "cutoff");
    meta.ridge = meta_double(m.metadata, "ridge");
    meta.rank = meta_int<std::size_t>(m.metadata, "rank");
    meta.mesh_fingerprint = meta_int<std::uint64_t>(m.metadata, "mesh_fingerprint");
    if (expected_fingerprint != 0 && meta.mesh_fingerprint != expected_fingerprint)
        throw LoadError("surrogate was fitted on a different mesh (fingerprint mismatch)");
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd w = Eigen::Map<const Eigen::MatrixXd>(m.payload.data(), n, n);
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(m.payload.data() + p * p, n);
    return LinearSurrogate(std::move(w), std::move(b), std::move(meta));
}

void write_network(const GeneratorNet& net, const NetworkRecord& record, const fs::path& path) {
    ModelFile m;
    m.kind = ModelKind::Network;
    const auto& spec = net.spec();
    m.metadata["architecture"] = net.architecture_string();
    m.metadata["family"] = to_string(spec.architecture);
    m.metadata["output_size"] = std::to_string(spec.output_size);
    m.metadata["hidden1"] = std::to_string(spec.hidden1);
    m.metadata["hidden2"] = std::to_string(spec.hidden2);
    m.metadata["channels"] = std::to_string(spec.channels);
    m.metadata["grid_height"] = std::to_string(spec.grid_height);
    m.metadata["grid_width"] = std::to_string(spec.grid_width);
    m.metadata["input_scale"] = format_double(spec.input_scale);
    m.metadata["seed"] = std::to_string(net.seed());
    m.metadata["epochs"] = std::to_string(record.epochs);
    m.metadata["v_gate"] = format_double(record.v_gate);
    for (const auto& p : net.parameters()) {
        m.dims.push_back(static_cast<std::uint64_t>(p.value.size()));
        m.payload.insert(m.payload.end(), p.value.data(), p.value.data() + p.value.size());
    }
    write_model(m, path);
}

std::pair<GeneratorNet, NetworkRecord> read_network(const fs::path& path) {
    const ModelFile m = read_model(path);
    if (m.kind != ModelKind::Network) throw LoadError("model file does not hold a network");
    NetworkSpec spec;
    try {
        spec.architecture = parse_architecture(require_key(m.metadata, "family"));
    } catch (const ConfigError& e) {
        throw LoadError(e.what());
    }
    spec.output_size = meta_int<Eigen::Index>(m.metadata, "output_size");
    spec.hidden1 = meta_int<Eigen::Index>(m.metadata, "hidden1");
    spec.hidden2 = meta_int<Eigen::Index>(m.metadata, "hidden2");
    spec.channels = meta_int<Eigen::Index>(m.metadata, "channels");
    spec.grid_height = meta_int<Eigen::Index>(m.metadata, "grid_height");
    spec.grid_width = meta_int<Eigen::Index>(m.metadata, "grid_width");
    spec.input_scale = meta_double(m.metadata, "input_scale");
    GeneratorNet net(spec, meta_int<std::uint64_t>(m.metadata, "seed"));
    auto& params = net.parameters();
    if (m.dims.size() != params.size()) throw LoadError("network layer count does not match architecture");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (m.dims[i] != static_cast<std::uint64_t>(params[i].value.size()))
            throw LoadError("network layer size does not match architecture");
        if (offset + m.dims[i] > m.payload.size()) throw LoadError("network payload too short");
        std::memcpy(params[i].value.data(), m.payload.data() + offset, m.dims[i] * sizeof(double));
        offset += m.dims[i];
    }
    if (offset != m.payload.size()) throw LoadError("network payload size does not match dimensions");
    if (require_key(m.metadata, "architecture") != net.architecture_string())
        throw LoadError("architecture string does not match layer metadata");
    NetworkRecord rec{meta_int<long>(m.metadata, "epochs"), meta_double(m.metadata, "v_gate")};
    return {std::move(net), rec};
}

// ---- reports ----------------------------------------------------------------

void write_report(const ErrorReport& r, const TensorMesh& mesh, const fs::path& path, const KeyValues& extra) {
    if (static_cast<std::size_t>(r.phi_err.size()) != mesh.size() ||
        static_cast<std::size_t>(r.logn_err.size()) != mesh.size())
        throw ShapeError("report fields do not match mesh");
    atomic_write(path, [&](std::ostream& os) {
        os << "# wirepinn error report\n";
        os << "v_gate " << format_double(r.v_gate) << '\n';
        os << "epochs " << r.epochs << '\n';
        os << "max_phi_err_pct " << format_double(r.max_phi_err_pct) << '\n';
        os << "max_logn_err_pct " << format_double(r.max_logn_err_pct) << '\n';
        os << "max_abs_phi_err_V " << format_double(r.max_abs_phi_err) << '\n';
        os << "loss_boundary " << format_double(r.losses.boundary) << '\n';
        os << "loss_fd " << format_double(r.losses.fd) << '\n';
        os << "loss_total " << format_double(r.losses.total) << '\n';
        os << "v_gate_extracted " << format_double(r.v_gate_extracted) << '\n';
        for (const auto& [k, v] : extra) os << k << ' ' << v << '\n';
        os << "columns node x_um y_um region phi_err_V log10n_err\n";
        for (std::size_t k = 0; k < mesh.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            os << fmt::format("{} {} {} {} {} {}\n", k, format_double(mesh.x_um(k)), format_double(mesh.y_um(k)),
                              to_string(mesh.region(k)), format_double(r.phi_err[kk]), format_double(r.logn_err[kk]));
        }
    });
}

std::map<std::string, std::string> read_report_header(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open report " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw LoadError("malformed report line", lineno);
        const std::string key = line.substr(0, sp);
        if (key == "columns") break;
        out[key] = line.substr(sp + 1);
    }
    return out;
}

void write_loss_history(const std::vector<LossRecord>& history, const fs::path& path) {
    atomic_write(path, [&](std::ostream& os) {
        os << "step,lr,loss_boundary,loss_fd,loss_total\n";
        for (const auto& r : history)
            os << r.step << ',' << format_double(r.lr) << ',' << format_double(r.boundary) << ','
               << format_double(r.fd) << ',' << format_double(r.total) << '\n';
    });
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto tok = split(line);
        if (tok.empty()) continue;
        const auto eq = line.find('=');
        std::string key, value;
        if (eq != std::string::npos) {
            const auto k = split(std::string_view(line).substr(0, eq));
            if (k.size() != 1) throw ConfigError(fmt::format("malformed line {} in {}", lineno, path.string()));
            key = std::string(k[0]);
            const auto v = split(std::string_view(line).substr(eq + 1));
            for (std::size_t i = 0; i < v.size(); ++i) value += (i ? " " : "") + std::string(v[i]);
        } else {
            throw ConfigError(fmt::format("line {} of {} is not 'key = value'", lineno, path.string()));
        }
        if (!out.emplace(key, value).second)
            throw ConfigError(fmt::format("duplicate key '{}' on line {} of {}", key, lineno, path.string()));
    }
    return out;
}

}  // namespace wirepinn
