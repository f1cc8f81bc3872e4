#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "wirepinn/error.hpp"
#include "wirepinn/io.hpp"

using namespace wirepinn;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("wirepinn_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

const TensorMesh& mesh() {
    static const TensorMesh m = build_device_mesh();
    return m;
}

const SweepDataset& small_sweep() {
    static const SweepDataset d = ramp_sweep(mesh(), SemiconductorParams::silicon(), 0.0, 0.15, 0.075);
    return d;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream os(p);
    for (const auto& l : lines) os << l << '\n';
}

std::size_t load_error_line(const fs::path& p) {
    try {
        read_sweep(p, mesh());
    } catch (const LoadError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
    for (double v : {0.0, 1e-9, 0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-308, 0.0075 * 37}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.0), "0");
}

TEST(Sweep, RoundTripIsBitwise) {
    TempDir dir;
    write_sweep(small_sweep(), mesh(), dir / "s.txt");
    const auto back = read_sweep(dir / "s.txt", mesh());
    ASSERT_EQ(back.snapshots.size(), 3u);
    EXPECT_EQ(back.mesh_fingerprint, small_sweep().mesh_fingerprint);
    EXPECT_EQ(back.params.phi_ref, small_sweep().params.phi_ref);
    EXPECT_EQ(back.contact_potential, small_sweep().contact_potential);
    for (std::size_t b = 0; b < 3; ++b) {
        const auto& x = small_sweep().snapshots[b];
        const auto& y = back.snapshots[b];
        EXPECT_EQ(x.v_gate, y.v_gate);
        EXPECT_EQ(x.phi, y.phi);
        EXPECT_EQ(x.n, y.n);
        EXPECT_EQ(x.net_charge, y.net_charge);
        EXPECT_EQ(x.iterations, y.iterations);
        EXPECT_EQ(x.residual_norm, y.residual_norm);
        EXPECT_EQ(x.converged, y.converged);
    }
}

TEST(Sweep, FullSweepRecordCount) {
    TempDir dir;
    const auto full = ramp_sweep(mesh(), SemiconductorParams::silicon(), 0.0, 0.75, 0.0075);
    write_sweep(full, mesh(), dir / "full.txt");
    const auto lines = read_lines(dir / "full.txt");
    std::size_t records = 0;
    bool in_records = false;
    for (const auto& l : lines) {
        if (in_records) ++records;
        if (l.rfind("columns", 0) == 0) in_records = true;
    }
    EXPECT_EQ(records, 221493u);
}

TEST(Sweep, TruncatedFileNamesLine) {
    TempDir dir;
    write_sweep(small_sweep(), mesh(), dir / "s.txt");
    auto lines = read_lines(dir / "s.txt");
    lines.resize(lines.size() - 100);
    write_lines(dir / "t.txt", lines);
    EXPECT_EQ(load_error_line(dir / "t.txt"), lines.size() + 1);
}

TEST(Sweep, MalformedRecordNamesLine) {
    TempDir dir;
    write_sweep(small_sweep(), mesh(), dir / "s.txt");
    auto lines = read_lines(dir / "s.txt");
    lines[500] = "0 0 bogus";
    write_lines(dir / "m.txt", lines);
    EXPECT_EQ(load_error_line(dir / "m.txt"), 501u);
    lines = read_lines(dir / "s.txt");
    const auto pos = lines[700].rfind(' ');
    lines[700] = lines[700].substr(0, pos) + " 1e2x";
    write_lines(dir / "m2.txt", lines);
    EXPECT_EQ(load_error_line(dir / "m2.txt"), 701u);
}

TEST(Sweep, VersionAndFingerprintChecked) {
    TempDir dir;
    write_sweep(small_sweep(), mesh(), dir / "s.txt");
    auto lines = read_lines(dir / "s.txt");
    auto v = lines;
    v[1] = "format_version 2";
    write_lines(dir / "v.txt", v);
    EXPECT_EQ(load_error_line(dir / "v.txt"), 2u);
    DeviceConfig cfg;
    cfg.length_nm = 90.0;
    const auto other = build_device_mesh(cfg);
    EXPECT_THROW(read_sweep(dir / "s.txt", other), LoadError);
    EXPECT_THROW(read_sweep(dir / "missing.txt", mesh()), LoadError);
}

TEST(Model, SurrogateRoundTripIsExact) {
    TempDir dir;
    const auto s = fit_surrogate(small_sweep(), 3);
    write_surrogate(s, dir / "lr.wpnn");
    const auto raw = read_model(dir / "lr.wpnn");
    EXPECT_EQ(raw.payload.size(), 2193u * 2193u + 2193u);
    const auto back = read_surrogate(dir / "lr.wpnn", mesh().fingerprint());
    EXPECT_EQ(back.weights(), s.weights());
    EXPECT_EQ(back.intercept(), s.intercept());
    EXPECT_EQ(back.metadata().training_biases, s.metadata().training_biases);
    EXPECT_EQ(back.metadata().rank, s.metadata().rank);
    const auto nt = normalize_density(small_sweep().snapshots[2].n);
    EXPECT_EQ(back.factored().apply(nt), s.factored().apply(nt));
    EXPECT_THROW(read_surrogate(dir / "lr.wpnn", 12345), LoadError);
}

TEST(Model, BadMagicAndVersionRejected) {
    TempDir dir;
    ModelFile m;
    m.dims = {1, 1};
    m.payload = {1.0, 2.0};
    m.metadata["k"] = "v";
    write_model(m, dir / "m.wpnn");
    std::string bytes;
    {
        std::ifstream is(dir / "m.wpnn", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(is), {});
    }
    EXPECT_EQ(bytes.substr(0, 4), "WPNN");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);  // little-endian version
    auto corrupt = [&](std::size_t at, char c, const std::string& name) {
        std::string b = bytes;
        b[at] = c;
        std::ofstream(dir / name, std::ios::binary) << b;
        return dir / name;
    };
    EXPECT_THROW(read_model(corrupt(0, 'X', "magic.wpnn")), LoadError);
    EXPECT_THROW(read_model(corrupt(4, 9, "version.wpnn")), LoadError);
    std::ofstream(dir / "short.wpnn", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    EXPECT_THROW(read_model(dir / "short.wpnn"), LoadError);
    const auto back = read_model(dir / "m.wpnn");
    EXPECT_EQ(back.payload, m.payload);
    EXPECT_EQ(back.metadata, m.metadata);
    EXPECT_EQ(back.dims, m.dims);
    EXPECT_THROW(read_surrogate(dir / "m.wpnn"), LoadError);
}

TEST(Model, NetworkRoundTrip) {
    TempDir dir;
    for (auto arch : {Architecture::Dense, Architecture::ConvTranspose}) {
        GeneratorNet net(NetworkSpec{.architecture = arch}, 99);
        write_network(net, {1234, 0.75}, dir / "net.wpnn");
        auto [back, rec] = read_network(dir / "net.wpnn");
        EXPECT_EQ(rec.epochs, 1234);
        EXPECT_EQ(rec.v_gate, 0.75);
        EXPECT_EQ(back.seed(), 99u);
        EXPECT_EQ(back.architecture_string(), net.architecture_string());
        EXPECT_EQ(back.forward(0.75), net.forward(0.75));
    }
}

TEST(Report, KeysAndColumns) {
    TempDir dir;
    ErrorReport r;
    r.v_gate = 0.75;
    r.epochs = 200000;
    r.phi_err = Eigen::VectorXd::Zero(2193);
    r.logn_err = Eigen::VectorXd::Zero(2193);
    write_report(r, mesh(), dir / "r.txt", {{"seed", "42"}});
    const auto h = read_report_header(dir / "r.txt");
    EXPECT_EQ(h.at("max_phi_err_pct"), "0");
    EXPECT_EQ(h.at("max_logn_err_pct"), "0");
    EXPECT_EQ(h.at("epochs"), "200000");
    EXPECT_EQ(h.at("seed"), "42");
    EXPECT_EQ(read_lines(dir / "r.txt").size(), 1u + 9u + 1u + 1u + 2193u);
    r.phi_err.resize(3);
    EXPECT_THROW(write_report(r, mesh(), dir / "bad.txt"), ShapeError);
}

TEST(LossHistory, CsvRows) {
    TempDir dir;
    write_loss_history({{1, 1e-3, 0.5, 2.0, 2.5}, {2, 5e-4, 0.25, 1.0, 1.25}}, dir / "h.csv");
    const auto lines = read_lines(dir / "h.csv");
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "step,lr,loss_boundary,loss_fd,loss_total");
    EXPECT_EQ(lines[2], "2,0.00050000000000000001,0.25,1,1.25");
}

TEST(AtomicWrite, NoTemporaryLeftBehind) {
    TempDir dir;
    atomic_write(dir / "sub" / "a.txt", [](std::ostream& os) { os << "hello"; });
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "sub")) {
        ++files;
        EXPECT_EQ(e.path().filename(), "a.txt");
    }
    EXPECT_EQ(files, 1u);
}

TEST(KeyValues, ParsesAndRejects) {
    TempDir dir;
    std::ofstream(dir / "ok.cfg") << "# run\nepochs = 500\narchitecture = conv  # comment\nbiases = 0 0.3\n";
    const auto kv = read_key_values(dir / "ok.cfg");
    EXPECT_EQ(kv.at("epochs"), "500");
    EXPECT_EQ(kv.at("architecture"), "conv");
    EXPECT_EQ(kv.at("biases"), "0 0.3");
    std::ofstream(dir / "dup.cfg") << "a = 1\na = 2\n";
    EXPECT_THROW(read_key_values(dir / "dup.cfg"), ConfigError);
    std::ofstream(dir / "bad.cfg") << "just words\n";
    EXPECT_THROW(read_key_values(dir / "bad.cfg"), ConfigError);
}
