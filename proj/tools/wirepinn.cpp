// Command-line driver: oracle sweep, surrogate fit, PINN solves, reports, self-test.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "run_config.hpp"
#include "selftest.hpp"
#include "svg.hpp"
#include "wirepinn/constants.hpp"
#include "wirepinn/fermi.hpp"
#include "wirepinn/io.hpp"
#include "wirepinn/pinn.hpp"

namespace wirepinn::cli {
namespace {

enum ExitCode : int { kOk = 0, kConfig = 1, kOracle = 2, kDivergence = 3, kSelfTest = 4 };

// Probe location used for the potential-vs-bias traces [um].
constexpr double kProbeX = 0.0405;
constexpr double kProbeY = 0.002;

TensorMesh load_mesh(const RunConfig& cfg) {
    return cfg.device_path.empty() ? build_device_mesh() : build_device_mesh(load_device_config(cfg.device_path));
}

std::string bias_tag(double v) { return fmt::format("vg{:.4f}", v); }

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        if (b == std::string::npos) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item.substr(b), &used));
            if (item.find_first_not_of(' ', b + used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

PinnOptions pinn_options(const RunConfig& cfg) {
    PinnOptions o;
    o.epochs = cfg.epochs;
    o.seed = cfg.seed;
    o.weights = {cfg.w_boundary, cfg.w_fd};
    o.network.architecture = cfg.architecture;
    return o;
}

Snapshot as_snapshot(const PinnPrediction& p, const TensorMesh& mesh) {
    Snapshot s;
    s.v_gate = p.v_gate;
    s.phi = p.phi;
    s.n = p.n;
    s.net_charge.resize(p.n.size());
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        s.net_charge[kk] = constants::q * (mesh.net_doping(k) - s.n[kk]);
    }
    s.converged = true;
    s.iterations = 0;
    s.residual_norm = residual_check(mesh, s);
    return s;
}

void write_field_csv(const fs::path& path, const TensorMesh& mesh, const PinnPrediction& p, const Snapshot* oracle) {
    atomic_write(path, [&](std::ostream& os) {
        os << "node,x_um,y_um,region,phi_pinn_V,phi_oracle_V,log10n_pinn,log10n_oracle\n";
        const Eigen::VectorXd lp = p.normalized_density.array().log10();
        Eigen::VectorXd lo;
        if (oracle) lo = normalize_density(oracle->n).array().log10();
        for (std::size_t k = 0; k < mesh.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            os << k << ',' << format_double(mesh.x_um(k)) << ',' << format_double(mesh.y_um(k)) << ','
               << to_string(mesh.region(k)) << ',' << format_double(p.phi[kk]) << ','
               << (oracle ? format_double(oracle->phi[kk]) : "") << ',' << format_double(lp[kk]) << ','
               << (oracle ? format_double(lo[kk]) : "") << '\n';
        }
    });
}

KeyValues run_keys(const RunConfig& cfg, const SolveResult& r, const LinearSurrogate& s) {
    return {{"seed", std::to_string(r.seed)},
            {"architecture", r.architecture},
            {"loss_weights", format_double(cfg.w_boundary) + " " + format_double(cfg.w_fd)},
            {"surrogate_training_range_V",
             format_double(s.metadata().min_bias()) + " " + format_double(s.metadata().max_bias())},
            {"surrogate_snapshots", std::to_string(s.metadata().snapshot_count())}};
}

/// Files for one finished solve. Returns the final report when an oracle matched.
std::optional<ErrorReport> write_solve_outputs(const RunConfig& cfg, const TensorMesh& mesh, const SweepDataset* oracle,
                                               const LinearSurrogate& surrogate, const SolveResult& r, bool svg) {
    const fs::path dir = cfg.output_dir;
    const double vg = r.prediction.v_gate;
    const std::string tag = bias_tag(vg);
    const Snapshot* truth = oracle ? find_snapshot(*oracle, vg) : nullptr;

    write_loss_history(r.history, dir / ("history_" + tag + ".csv"));
    if (r.network) write_network(*r.network, {r.prediction.epochs, vg}, dir / ("network_" + tag + ".wpnn"));
    SweepDataset pred;
    pred.mesh_fingerprint = mesh.fingerprint();
    pred.params = oracle ? oracle->params : SemiconductorParams::silicon();
    pred.contact_potential = oracle ? oracle->contact_potential : contact_potential(mesh, pred.params);
    pred.snapshots.push_back(as_snapshot(r.prediction, mesh));
    write_sweep(pred, mesh, dir / ("prediction_" + tag + ".txt"));
    write_field_csv(dir / ("field_" + tag + ".csv"), mesh, r.prediction, truth);

    std::optional<ErrorReport> final_report;
    const KeyValues keys = run_keys(cfg, r, surrogate);
    if (truth) {
        final_report = evaluate_against(r.prediction, *truth);
        write_report(*final_report, mesh, dir / ("report_" + tag + ".txt"), keys);
        if (!r.checkpoints.empty()) {
            std::vector<std::pair<long, ErrorReport>> rows;
            for (const auto& c : r.checkpoints) rows.emplace_back(c.epochs, evaluate_against(c, *truth));
            rows.emplace_back(r.prediction.epochs, *final_report);
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [e, rep] : rows)
                write_report(rep, mesh, dir / fmt::format("report_{}_e{}.txt", tag, e), keys);
            atomic_write(dir / ("epoch_study_" + tag + ".csv"), [&](std::ostream& os) {
                os << "epochs,max_phi_err_pct,max_logn_err_pct,loss_total\n";
                for (const auto& [e, rep] : rows)
                    os << e << ',' << format_double(rep.max_phi_err_pct) << ',' << format_double(rep.max_logn_err_pct)
                       << ',' << format_double(rep.losses.total) << '\n';
            });
        }
    }
    if (svg) {
        Series loss{"total loss", {}, {}, false};
        const std::size_t stride = std::max<std::size_t>(1, r.history.size() / 2000);
        for (std::size_t i = 0; i < r.history.size(); i += stride) {
            loss.x.push_back(static_cast<double>(r.history[i].step));
            loss.y.push_back(r.history[i].total);
        }
        write_svg(dir / ("loss_" + tag + ".svg"), {"Training loss, V_G = " + format_double(vg) + " V", "epoch", "loss", true},
                  {loss});
        // Potential along the channel at the probe row.
        const std::size_t row = mesh.iy(nearest_node(mesh, kProbeX, kProbeY));
        Series pinn{"PINN", {}, {}, false}, ref{"oracle", {}, {}, true};
        for (std::size_t i = 0; i < mesh.nx(); ++i) {
            const auto k = static_cast<Eigen::Index>(mesh.node(i, row));
            pinn.x.push_back(mesh.x_nodes()[i] * 1e3);
            pinn.y.push_back(r.prediction.phi[k]);
            if (truth) {
                ref.x.push_back(mesh.x_nodes()[i] * 1e3);
                ref.y.push_back(truth->phi[k]);
            }
        }
        std::vector<Series> s{pinn};
        if (truth) s.push_back(ref);
        write_svg(dir / ("phi_cut_" + tag + ".svg"), {"Potential along the channel", "x [nm]", "phi [V]", false}, s);
    }
    return final_report;
}

// ---- subcommands ----------------------------------------------------------

int cmd_generate(const RunConfig& cfg, const std::string& out) {
    const auto mesh = load_mesh(cfg);
    const auto params = SemiconductorParams::silicon();
    const std::size_t count = ramp_count(cfg.sweep_start, cfg.sweep_end, cfg.sweep_step);
    fmt::print("oracle sweep: {} biases from {} V to {} V\n", count, cfg.sweep_start, cfg.sweep_end);
    const auto data = ramp_sweep(mesh, params, cfg.sweep_start, cfg.sweep_end, cfg.sweep_step);
    const double tol = default_tolerance(assemble_fv_coefficients(mesh));
    double worst = 0.0;
    int iters = 0;
    for (const auto& s : data.snapshots) {
        const double r = residual_check(mesh, s);
        worst = std::max(worst, r);
        iters = std::max(iters, s.iterations);
        if (!(r <= tol)) {
            fmt::print(stderr, "error: snapshot at V_G = {} V fails the residual check ({:.3e} > {:.3e})\n", s.v_gate,
                       r, tol);
            return kOracle;
        }
    }
    write_sweep(data, mesh, out);
    fmt::print("{} snapshots, max residual {:.3e} (tolerance {:.3e}), max Newton iterations {}\nwrote {}\n",
               data.snapshots.size(), worst, tol, iters, out);
    return kOk;
}

int cmd_fit_lr(const RunConfig& cfg, const std::string& sweep_path, const std::string& model_path, bool svg) {
    const auto mesh = load_mesh(cfg);
    const auto data = read_sweep(sweep_path, mesh);
    if (cfg.lr_cutoff < 1 || cfg.lr_cutoff > data.snapshots.size())
        throw ConfigError(fmt::format("cutoff {} outside 1..{}", cfg.lr_cutoff, data.snapshots.size()));
    const auto s = fit_surrogate(data, cfg.lr_cutoff, {cfg.svd_cutoff, cfg.ridge});
    write_surrogate(s, model_path);
    const auto score = score_surrogate(s, data);
    const fs::path dir = cfg.output_dir;
    const auto& meta = s.metadata();
    const bool low_rank = meta.rank == 0 || meta.snapshot_count() < 2;

    atomic_write(dir / "lr_scatter.csv", [&](std::ostream& os) {
        os << "snapshot,v_gate,node,in_training,phi_oracle_V,phi_predicted_V\n";
        for (std::size_t b = 0; b < data.snapshots.size(); ++b) {
            const auto& snap = data.snapshots[b];
            const Eigen::VectorXd pred = s.predict_phi(normalize_density(snap.n));
            const std::string prefix = fmt::format("{},{},", b, format_double(snap.v_gate));
            const char* in = score.in_training[b] ? "1" : "0";
            for (Eigen::Index k = 0; k < pred.size(); ++k)
                os << prefix << k << ',' << in << ',' << format_double(snap.phi[k]) << ',' << format_double(pred[k])
                   << '\n';
        }
    });
    atomic_write(dir / "lr_errors.csv", [&](std::ostream& os) {
        os << "snapshot,v_gate,in_training,max_abs_err_V\n";
        for (std::size_t b = 0; b < data.snapshots.size(); ++b)
            os << b << ',' << format_double(data.snapshots[b].v_gate) << ',' << (score.in_training[b] ? 1 : 0) << ','
               << format_double(score.max_error[b]) << '\n';
    });
    atomic_write(dir / "lr_summary.txt", [&](std::ostream& os) {
        os << "training_snapshots " << meta.snapshot_count() << '\n'
           << "training_range_V " << format_double(meta.min_bias()) << ' ' << format_double(meta.max_bias()) << '\n'
           << "rank " << meta.rank << '\n'
           << "svd_cutoff " << format_double(meta.cutoff) << '\n'
           << "ridge " << format_double(meta.ridge) << '\n'
           << "r_squared_all " << format_double(score.r_squared) << '\n'
           << "in_sample_max_err_V " << format_double(score.in_sample_max_error) << '\n'
           << "out_of_range_max_err_V " << format_double(score.out_of_range_max_error) << '\n'
           << "low_rank_warning " << (low_rank ? 1 : 0) << '\n';
    });
    if (svg) {
        Series in{"training snapshots", {}, {}, true}, out{"held-out snapshots", {}, {}, true};
        for (std::size_t b = 0; b < data.snapshots.size(); ++b) {
            const auto& snap = data.snapshots[b];
            const Eigen::VectorXd pred = s.predict_phi(normalize_density(snap.n));
            auto& dst = score.in_training[b] ? in : out;
            for (Eigen::Index k = 0; k < pred.size(); k += 17) {
                dst.x.push_back(snap.phi[k]);
                dst.y.push_back(pred[k]);
            }
        }
        write_svg(dir / "lr_scatter.svg", {"Linear surrogate: predicted vs oracle potential", "oracle phi [V]",
                                           "predicted phi [V]", false},
                  {out, in});
    }
    fmt::print("surrogate from {} snapshots ({} V to {} V), rank {}\n", meta.snapshot_count(), meta.min_bias(),
               meta.max_bias(), meta.rank);
    fmt::print("R^2 over all snapshots {:.7f}; max |error| in sample {:.3e} V, out of range {:.3e} V\n",
               score.r_squared, score.in_sample_max_error, score.out_of_range_max_error);
    if (low_rank)
        fmt::print(stderr, "warning: low-rank surrogate (rank {} from {} snapshot(s)); predictions are nearly constant\n",
                   meta.rank, meta.snapshot_count());
    fmt::print("wrote {}\n", model_path);
    return kOk;
}

struct SolveInputs {
    TensorMesh mesh;
    LinearSurrogate surrogate;
    std::optional<SweepDataset> oracle;
};

SolveInputs load_solve_inputs(const RunConfig& cfg, const std::string& model, const std::string& sweep) {
    auto mesh = load_mesh(cfg);
    auto s = read_surrogate(model, mesh.fingerprint());
    std::optional<SweepDataset> oracle;
    if (!sweep.empty()) oracle = read_sweep(sweep, mesh);
    return {std::move(mesh), std::move(s), std::move(oracle)};
}

int cmd_solve(RunConfig cfg, const std::string& model, const std::string& sweep, double vg,
              const std::string& epoch_study, bool svg) {
    PinnOptions opts = pinn_options(cfg);
    if (!epoch_study.empty()) {
        std::vector<long> marks;
        for (double e : parse_list(epoch_study)) {
            if (e < 1 || e != std::floor(e)) throw ConfigError("epoch-study entries must be positive integers");
            marks.push_back(static_cast<long>(e));
        }
        std::sort(marks.begin(), marks.end());
        marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
        opts.epochs = marks.back();
        cfg.epochs = opts.epochs;
        marks.pop_back();
        opts.checkpoints = marks;
    }
    const auto in = load_solve_inputs(cfg, model, sweep);
    const PinnProblem problem(in.mesh, in.surrogate, SemiconductorParams::silicon(), cfg.max_train_bias);
    const SweepDataset* oracle = in.oracle ? &*in.oracle : nullptr;
    if (oracle && !find_snapshot(*oracle, vg))
        fmt::print(stderr, "warning: no oracle snapshot at V_G = {} V; no error report written\n", vg);
    fmt::print("solving V_G = {} V: {} epochs, seed {}, {}\n", vg, opts.epochs, opts.seed,
               GeneratorNet(opts.network, opts.seed).architecture_string());
    SolveResult r;
    try {
        r = solve_bias(problem, vg, opts);
    } catch (const DivergenceError& e) {
        write_loss_history(e.history(), fs::path(cfg.output_dir) / ("history_" + bias_tag(vg) + ".csv"));
        throw;
    }
    const auto report = write_solve_outputs(cfg, in.mesh, oracle, in.surrogate, r, svg);
    const auto& last = r.history.back();
    fmt::print("final losses: boundary {:.3e}, fd {:.3e}, total {:.3e}; extracted V_G' = {:.6f} V\n", last.boundary,
               last.fd, last.total, r.prediction.v_gate_extracted);
    if (report)
        fmt::print("vs oracle: max phi error {:.4f}%, max log10 n error {:.4f}% (max |dphi| {:.3e} V)\n",
                   report->max_phi_err_pct, report->max_logn_err_pct, report->max_abs_phi_err);
    fmt::print("outputs in {}\n", cfg.output_dir);
    return kOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& model, const std::string& sweep, const std::string& biases_text,
              unsigned jobs, bool amortized, bool svg) {
    std::vector<double> biases;
    if (!biases_text.empty()) {
        biases = parse_list(biases_text);
    } else {
        const std::size_t n = ramp_count(cfg.sweep_start, cfg.sweep_end, cfg.sweep_step);
        for (std::size_t i = 0; i < n; ++i) biases.push_back(cfg.sweep_start + static_cast<double>(i) * cfg.sweep_step);
    }
    const auto in = load_solve_inputs(cfg, model, sweep);
    const PinnProblem problem(in.mesh, in.surrogate, SemiconductorParams::silicon(), cfg.max_train_bias);
    const SweepDataset* oracle = in.oracle ? &*in.oracle : nullptr;
    if (amortized)
        fmt::print("amortized PINN: {} biases, {} epochs\n", biases.size(), cfg.epochs);
    else
        fmt::print("PINN sweep: {} biases, {} epochs each, {} worker(s)\n", biases.size(), cfg.epochs, jobs);
    std::vector<SweepEntry> entries;
    if (amortized) {
        // one generator for the whole bias list; every entry shares its history and weights
        const PinnOptions opts = pinn_options(cfg);
        auto a = solve_amortized(problem, biases, opts);
        const std::string arch = "amortized " + GeneratorNet(opts.network, opts.seed).architecture_string();
        for (auto& p : a.predictions) {
            SweepEntry e;
            e.v_gate = p.v_gate;
            SolveResult r;
            r.prediction = std::move(p);
            r.history = a.history;
            r.seed = opts.seed;
            r.architecture = arch;
            r.network = a.network;
            e.result = std::move(r);
            const Snapshot* truth = oracle ? find_snapshot(*oracle, e.v_gate) : nullptr;
            if (truth) e.report = evaluate_against(e.result->prediction, *truth);
            entries.push_back(std::move(e));
        }
    } else {
        entries = sweep_solve(problem, biases, pinn_options(cfg), oracle, jobs);
    }

    const std::size_t probe = nearest_node(in.mesh, kProbeX, kProbeY);
    const auto pk = static_cast<Eigen::Index>(probe);
    const fs::path dir = cfg.output_dir;
    int failures = 0;
    std::ostringstream summary, probe_csv, scatter;
    summary << "v_gate,status,max_phi_err_pct,max_logn_err_pct,max_abs_phi_err_V,probe_abs_err_V,loss_total\n";
    probe_csv << "v_gate,phi_pinn_V,phi_oracle_V,abs_err_V,n_pinn_cm3,n_oracle_cm3\n";
    scatter << "v_gate,node,phi_oracle_V,phi_pinn_V,log10n_oracle,log10n_pinn\n";
    Series probe_pinn{"PINN", {}, {}, false}, probe_oracle{"oracle", {}, {}, true};
    for (const auto& e : entries) {
        if (!e.result) {
            ++failures;
            fmt::print(stderr, "V_G = {} V failed: {}\n", e.v_gate, e.error);
            summary << format_double(e.v_gate) << ",failed,,,,,\n";
            continue;
        }
        write_solve_outputs(cfg, in.mesh, oracle, in.surrogate, *e.result, false);
        const auto& p = e.result->prediction;
        const Snapshot* truth = oracle ? find_snapshot(*oracle, e.v_gate) : nullptr;
        probe_pinn.x.push_back(e.v_gate);
        probe_pinn.y.push_back(p.phi[pk]);
        probe_csv << format_double(e.v_gate) << ',' << format_double(p.phi[pk]) << ',';
        if (truth) {
            probe_oracle.x.push_back(e.v_gate);
            probe_oracle.y.push_back(truth->phi[pk]);
            probe_csv << format_double(truth->phi[pk]) << ',' << format_double(std::abs(p.phi[pk] - truth->phi[pk]));
        } else {
            probe_csv << ',';
        }
        probe_csv << ',' << format_double(p.n[pk]) << ',' << (truth ? format_double(truth->n[pk]) : "") << '\n';
        summary << format_double(e.v_gate) << ",ok,";
        if (e.report) {
            summary << format_double(e.report->max_phi_err_pct) << ',' << format_double(e.report->max_logn_err_pct)
                    << ',' << format_double(e.report->max_abs_phi_err) << ','
                    << format_double(std::abs(p.phi[pk] - truth->phi[pk]));
            const Eigen::VectorXd lo = normalize_density(truth->n).array().log10();
            const Eigen::VectorXd lp = p.normalized_density.array().log10();
            for (Eigen::Index k = 0; k < p.phi.size(); ++k)
                scatter << format_double(e.v_gate) << ',' << k << ',' << format_double(truth->phi[k]) << ','
                        << format_double(p.phi[k]) << ',' << format_double(lo[k]) << ',' << format_double(lp[k])
                        << '\n';
        } else {
            summary << ",,,";
        }
        summary << ',' << format_double(p.losses.total) << '\n';
    }
    atomic_write(dir / "sweep_summary.csv", [&](std::ostream& os) { os << summary.str(); });
    atomic_write(dir / "probe_series.csv", [&](std::ostream& os) { os << probe_csv.str(); });
    if (oracle) atomic_write(dir / "sweep_scatter.csv", [&](std::ostream& os) { os << scatter.str(); });
    if (svg) {
        std::vector<Series> s{probe_pinn};
        if (oracle) s.push_back(probe_oracle);
        write_svg(dir / "probe_series.svg",
                  {fmt::format("Potential at ({} nm, {} nm)", in.mesh.x_um(probe) * 1e3, in.mesh.y_um(probe) * 1e3),
                   "V_G [V]", "phi [V]", false},
                  s);
    }
    fmt::print("{} of {} biases solved; outputs in {}\n", entries.size() - static_cast<std::size_t>(failures),
               entries.size(), cfg.output_dir);
    return failures ? kDivergence : kOk;
}

int cmd_report(const RunConfig& cfg, const std::string& sweep, bool fermi, const std::string& runs, bool svg) {
    if (sweep.empty() && !fermi && runs.empty()) throw ConfigError("report needs --sweep, --fermi or --runs");
    const fs::path dir = cfg.output_dir;
    if (!sweep.empty()) {
        const auto mesh = load_mesh(cfg);
        const auto data = read_sweep(sweep, mesh);
        const auto probe = extract_probe(data, mesh, kProbeX, kProbeY);
        atomic_write(dir / "probe_oracle.csv", [&](std::ostream& os) {
            os << "v_gate,phi_V,n_cm3\n";
            for (const auto& p : probe)
                os << format_double(p.v_gate) << ',' << format_double(p.phi) << ',' << format_double(p.n) << '\n';
        });
        if (svg) {
            Series s{"oracle", {}, {}, false};
            for (const auto& p : probe) s.x.push_back(p.v_gate), s.y.push_back(p.phi);
            write_svg(dir / "probe_oracle.svg", {"Oracle potential at the probe", "V_G [V]", "phi [V]", false}, {s});
        }
        fmt::print("oracle probe series: {} biases -> {}\n", probe.size(), (dir / "probe_oracle.csv").string());
    }
    if (fermi) {
        double worst = 0.0, at = 0.0;
        atomic_write(dir / "fermi_check.csv", [&](std::ostream& os) {
            os << "eta,approx,quadrature,rel_err\n";
            for (int i = 0; i <= 8000; ++i) {
                const double eta = -30.0 + 0.01 * i;
                const double a = fermi_half_approx(eta), q = fermi_half_quadrature(eta);
                const double rel = std::abs(a - q) / q;
                if (rel > worst) worst = rel, at = eta;
                os << format_double(eta) << ',' << format_double(a) << ',' << format_double(q) << ','
                   << format_double(rel) << '\n';
            }
        });
        fmt::print("Fermi integral approximation: max relative error {:.4e} at eta = {:.2f}\n", worst, at);
    }
    if (!runs.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(runs)) {
            const auto name = e.path().filename().string();
            if (name.rfind("report_", 0) == 0 && e.path().extension() == ".txt") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        atomic_write(dir / "runs_summary.csv", [&](std::ostream& os) {
            os << "file,v_gate,epochs,seed,max_phi_err_pct,max_logn_err_pct,loss_total\n";
            for (const auto& f : files) {
                const auto h = read_report_header(f);
                auto get = [&](const char* k) { return h.count(k) ? h.at(k) : std::string(); };
                os << f.filename().string() << ',' << get("v_gate") << ',' << get("epochs") << ',' << get("seed")
                   << ',' << get("max_phi_err_pct") << ',' << get("max_logn_err_pct") << ',' << get("loss_total")
                   << '\n';
                fmt::print("{}: V_G {} V, {} epochs, phi {}%, log n {}%\n", f.filename().string(), get("v_gate"),
                           get("epochs"), get("max_phi_err_pct"), get("max_logn_err_pct"));
            }
        });
    }
    return kOk;
}

int cmd_check(const std::string& fault) {
    const auto results = run_self_tests(fault);
    int failed = 0;
    for (const auto& r : results) {
        fmt::print("{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
        failed += r.passed ? 0 : 1;
    }
    if (failed) {
        fmt::print(stderr, "{} self-test(s) failed:\n", failed);
        for (const auto& r : results)
            if (!r.passed) fmt::print(stderr, "  {}\n", r.name);
        return kSelfTest;
    }
    fmt::print("all {} self-tests passed\n", results.size());
    return kOk;
}

int run(int argc, char** argv) {
    CLI::App app{"Gated nanowire electrostatics: Poisson oracle, linear surrogate, physics-informed solver"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, device_path, output_dir;
    app.add_option("--config", config_path, "run configuration file (key = value)");
    app.add_option("--device", device_path, "device geometry file (key = value)");
    app.add_option("-o,--out-dir", output_dir, "directory for data products");

    RunConfig flags;
    std::string out_sweep = "sweep.txt", sweep_in, model = "surrogate.wpnn", epoch_study, biases, runs, fault;
    std::string arch_name;
    double vg = 0.75;
    unsigned jobs = 1;
    bool svg = false, fermi = false;

    auto* gen = app.add_subcommand("generate", "run the Newton oracle over the gate ramp and write a sweep file");
    auto* g_start = gen->add_option("--start", flags.sweep_start, "first gate bias [V]");
    auto* g_end = gen->add_option("--end", flags.sweep_end, "last gate bias [V]");
    auto* g_step = gen->add_option("--step", flags.sweep_step, "bias step [V]");
    gen->add_option("--output", out_sweep, "sweep file to write")->capture_default_str();

    auto* fit = app.add_subcommand("fit-lr", "fit the linear surrogate on the first snapshots of a sweep");
    fit->add_option("--sweep", sweep_in, "sweep file")->required();
    auto* f_cut = fit->add_option("--cutoff", flags.lr_cutoff, "number of leading snapshots used for training");
    auto* f_svd = fit->add_option("--svd-cutoff", flags.svd_cutoff, "relative singular value cutoff");
    auto* f_ridge = fit->add_option("--ridge", flags.ridge, "ridge regularization");
    fit->add_option("--output", model, "surrogate file to write")->capture_default_str();
    fit->add_flag("--svg", svg, "also render SVG plots");

    auto add_pinn = [&](CLI::App* sub) {
        sub->add_option("--surrogate", model, "surrogate file")->capture_default_str();
        sub->add_option("--sweep", sweep_in, "oracle sweep for scoring (optional)");
        return std::vector<CLI::Option*>{
            sub->add_option("--epochs", flags.epochs, "training epochs per bias"),
            sub->add_option("--seed", flags.seed, "initialization seed (overrides WIREPINN_SEED)"),
            sub->add_option("--w-boundary", flags.w_boundary, "boundary loss weight"),
            sub->add_option("--w-fd", flags.w_fd, "Fermi-Dirac loss weight"),
            sub->add_option("--arch", arch_name, "generator family: dense or conv"),
            sub->add_option("--max-train-bias", flags.max_train_bias, "refuse surrogates trained above this bias [V]"),
        };
    };
    auto* solve = app.add_subcommand("solve", "train the PINN for one gate bias");
    auto solve_opts = add_pinn(solve);
    solve->add_option("--vg", vg, "gate bias [V]")->capture_default_str();
    solve->add_option("--epoch-study", epoch_study, "comma-separated epoch counts evaluated in one run");
    solve->add_flag("--svg", svg, "also render SVG plots");

    auto* sweep = app.add_subcommand("sweep", "independent PINN solves over a list of gate biases");
    auto sweep_opts = add_pinn(sweep);
    sweep->add_option("--biases", biases, "comma-separated biases [V] (default: 0 to 0.75 step 0.075)");
    auto* s_start = sweep->add_option("--start", flags.sweep_start, "first bias [V]");
    auto* s_end = sweep->add_option("--end", flags.sweep_end, "last bias [V]");
    auto* s_step = sweep->add_option("--step", flags.sweep_step, "bias step [V]");
    sweep->add_option("-j,--jobs", jobs, "parallel workers")->capture_default_str();
    bool amortized = false;
    sweep->add_flag("--amortized", amortized, "train one generator over all biases instead of one per bias");
    sweep->add_flag("--svg", svg, "also render SVG plots");

    auto* report = app.add_subcommand("report", "oracle probe trace, Fermi accuracy scan, run summaries");
    report->add_option("--sweep", sweep_in, "oracle sweep: write the probe series");
    report->add_flag("--fermi", fermi, "write the Fermi integral accuracy scan");
    report->add_option("--runs", runs, "directory of solve outputs to summarize");
    report->add_flag("--svg", svg, "also render SVG plots");

    auto* check = app.add_subcommand("check", "self-test: Fermi accuracy, gradients, oracle residual and symmetry");
    check->add_option("--inject-fault", fault, "deliberately break one component (testing hook)")
        ->check(CLI::IsMember({std::string(kFaultFermiDerivative)}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    apply_seed_env(cfg);
    if (!device_path.empty()) cfg.device_path = device_path;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    auto take = [](auto& dst, const auto& src, CLI::Option* opt) {
        if (opt->count()) dst = src;
    };
    take(cfg.sweep_start, flags.sweep_start, g_start);
    take(cfg.sweep_end, flags.sweep_end, g_end);
    take(cfg.sweep_step, flags.sweep_step, g_step);
    take(cfg.sweep_start, flags.sweep_start, s_start);
    take(cfg.sweep_end, flags.sweep_end, s_end);
    take(cfg.sweep_step, flags.sweep_step, s_step);
    take(cfg.lr_cutoff, flags.lr_cutoff, f_cut);
    take(cfg.svd_cutoff, flags.svd_cutoff, f_svd);
    take(cfg.ridge, flags.ridge, f_ridge);
    for (const auto& opts : {solve_opts, sweep_opts}) {
        take(cfg.epochs, flags.epochs, opts[0]);
        take(cfg.seed, flags.seed, opts[1]);
        take(cfg.w_boundary, flags.w_boundary, opts[2]);
        take(cfg.w_fd, flags.w_fd, opts[3]);
        if (opts[4]->count()) cfg.architecture = parse_architecture(arch_name);
        take(cfg.max_train_bias, flags.max_train_bias, opts[5]);
    }
    validate(cfg);
    fs::create_directories(cfg.output_dir);

    if (*gen) return cmd_generate(cfg, out_sweep);
    if (*fit) return cmd_fit_lr(cfg, sweep_in, model, svg);
    if (*solve) return cmd_solve(cfg, model, sweep_in, vg, epoch_study, svg);
    if (*sweep) return cmd_sweep(cfg, model, sweep_in, biases, jobs, amortized, svg);
    if (*report) return cmd_report(cfg, sweep_in, fermi, runs, svg);
    return cmd_check(fault);
}

}  // namespace
}  // namespace wirepinn::cli

int main(int argc, char** argv) {
    using namespace wirepinn;
    using wirepinn::cli::ExitCode;
    try {
        return wirepinn::cli::run(argc, argv);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return ExitCode::kConfig;
    } catch (const LoadError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return ExitCode::kConfig;
    } catch (const ConvergenceError& e) {
        fmt::print(stderr, "oracle failure: {} (residual {:.3e} after {} iterations)\n", e.what(), e.residual(),
                   e.iterations());
        return ExitCode::kOracle;
    } catch (const DivergenceError& e) {
        fmt::print(stderr, "PINN diverged: {}\n", e.what());
        return ExitCode::kDivergence;
    } catch (const ContractError& e) {
        fmt::print(stderr, "invalid request: {}\n", e.what());
        return ExitCode::kConfig;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return ExitCode::kConfig;
    }
}
