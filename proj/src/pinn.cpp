#include "wirepinn/pinn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/core.h>

namespace wirepinn {

namespace {

constexpr double kFloorShift = 1e-9;

// Graph of the two losses for n-tilde node `nt`. Returns (phi, l1, l2, total).
struct LossGraph {
    NodeId phi, boundary, fd, total;
};

LossGraph build_losses(Tape& tape, const PinnProblem& problem, const AffineOperator& map, NodeId nt,
                       double v_gate, const LossWeights& w) {
    LossGraph g{};
    g.phi = tape.affine(nt, map);
    g.boundary = tape.mse_const(tape.gather(g.phi, problem.gate_nodes()), v_gate);
    NodeId n_fd = tape.divide(tape.add_constant(tape.fermi(g.phi, problem.closure()), kDensityOffset), kDensityScale);
    g.fd = tape.mse(tape.log10(n_fd), tape.log10(nt));
    g.total = tape.weighted_sum(g.boundary, w.boundary, g.fd, w.fd);
    return g;
}

NodeId postprocess_node(Tape& tape, NodeId raw) { return tape.add_constant(tape.add_constant(raw, 1.0), kFloorShift); }

void check_elu_floor(const Eigen::VectorXd& raw) {
    if (raw.size() > 0 && raw.minCoeff() < -1.0) throw NumericError("generator output fell below the ELU floor");
}

PinnPrediction make_prediction(const PinnProblem& problem, GeneratorNet& net, double v_gate, long epochs,
                               const LossWeights& w) {
    PinnPrediction p;
    p.v_gate = v_gate;
    p.epochs = epochs;
    p.normalized_density = postprocess(net.forward(v_gate));
    p.phi = problem.surrogate().predict_phi(p.normalized_density);
    p.n = denormalize_density(p.normalized_density);
    p.losses = evaluate_losses(problem, p.normalized_density, v_gate, w);
    p.v_gate_extracted = gate_voltage(p.phi, problem.gate_nodes());
    return p;
}

void validate(double v_gate, const PinnOptions& opts) {
    if (!(v_gate >= 0.0 && v_gate <= 1.0)) throw ContractError(fmt::format("gate bias {} V outside [0, 1] V", v_gate));
    if (opts.epochs < 1) throw ContractError("epochs must be at least 1");
    for (long c : opts.checkpoints)
        if (c < 1 || c > opts.epochs) throw ContractError("checkpoint outside the epoch budget");
}

}  // namespace

PinnProblem::PinnProblem(const TensorMesh& mesh, const LinearSurrogate& surrogate, const SemiconductorParams& params,
                         double training_bias_limit)
    : mesh_(mesh), surrogate_(surrogate), closure_(params, mesh) {
    if (static_cast<std::size_t>(surrogate.size()) != mesh.size()) throw ShapeError("surrogate size does not match mesh");
    if (surrogate.metadata().mesh_fingerprint != mesh.fingerprint())
        throw ShapeError("surrogate was fitted on a different mesh");
    for (double v : surrogate.metadata().training_biases)
        if (v > training_bias_limit + 1e-12)
            throw ContractError(fmt::format("surrogate was trained on V_G = {} V, above the {} V limit", v,
                                            training_bias_limit));
    gate_ = mesh.nodes_with(Contact::Gate);
    if (gate_.empty()) throw ContractError("mesh has no gate nodes");
    for (std::size_t k = 0; k < mesh.size(); ++k)
        if (mesh.region(k) == Region::Oxide) oxide_.push_back(k);
}

Eigen::VectorXd postprocess(const Eigen::VectorXd& raw) { return (raw.array() + 1.0) + kFloorShift; }

double gate_voltage(const Eigen::VectorXd& phi, std::span<const std::size_t> gate) {
    if (gate.empty()) throw ContractError("empty gate node set");
    double sum = 0.0;
    for (auto k : gate) sum += phi[static_cast<Eigen::Index>(k)];
    return sum / static_cast<double>(gate.size());
}

double loss_boundary(const Eigen::VectorXd& phi, std::span<const std::size_t> gate, double v_gate) {
    if (gate.empty()) throw ContractError("empty gate node set");
    double sum = 0.0;
    for (auto k : gate) {
        const double d = phi[static_cast<Eigen::Index>(k)] - v_gate;
        sum += d * d;
    }
    return sum / static_cast<double>(gate.size());
}

double loss_fd(const Eigen::VectorXd& normalized_density, const Eigen::VectorXd& phi, const FermiClosure& closure) {
    Tape tape;
    NodeId nt = tape.constant(normalized_density);
    NodeId n_fd = tape.divide(tape.add_constant(tape.fermi(tape.constant(phi), closure), kDensityOffset), kDensityScale);
    return tape.value(tape.mse(tape.log10(n_fd), tape.log10(nt)))[0];
}

LossTerms evaluate_losses(const PinnProblem& problem, const Eigen::VectorXd& normalized_density, double v_gate,
                          const LossWeights& weights) {
    Tape tape;
    const auto& map = problem.surrogate().factored();
    const LossGraph g = build_losses(tape, problem, map, tape.constant(normalized_density), v_gate, weights);
    return {tape.value(g.boundary)[0], tape.value(g.fd)[0], tape.value(g.total)[0]};
}

LossTerms generator_loss(const PinnProblem& problem, GeneratorNet& net, double v_gate, const LossWeights& weights,
                         bool backward) {
    thread_local Tape tape;
    tape.clear();
    const NodeId raw = net.forward(tape, v_gate);
    check_elu_floor(tape.value(raw));
    const LossGraph g =
        build_losses(tape, problem, problem.surrogate().factored(), postprocess_node(tape, raw), v_gate, weights);
    const LossTerms terms{tape.value(g.boundary)[0], tape.value(g.fd)[0], tape.value(g.total)[0]};
    if (backward && std::isfinite(terms.total)) tape.backward(g.total);
    return terms;
}

SolveResult solve_bias(const PinnProblem& problem, double v_gate, const PinnOptions& opts) {
    validate(v_gate, opts);
    GeneratorNet net(opts.network, opts.seed);
    if (net.spec().output_size != problem.surrogate().size()) throw ShapeError("generator output does not match mesh");
    AdamOptions adam_opts = opts.adam;
    adam_opts.lr = opts.plateau.initial_lr;
    Adam adam(net.parameters(), adam_opts);
    PlateauScheduler scheduler(opts.plateau);

    SolveResult result;
    result.seed = opts.seed;
    result.architecture = net.architecture_string();
    result.history.reserve(static_cast<std::size_t>(opts.epochs));
    for (long step = 1; step <= opts.epochs; ++step) {
        const LossTerms t = generator_loss(problem, net, v_gate, opts.weights, true);
        const LossRecord rec{step, adam.lr(), t.boundary, t.fd, t.total};
        result.history.push_back(rec);
        if (!std::isfinite(rec.total))
            throw DivergenceError(fmt::format("loss became non-finite at step {} (V_G = {} V)", step, v_gate), step,
                                  std::move(result.history));
        adam.step(net.parameters());
        adam.set_lr(scheduler.step(rec.total));
        if (std::find(opts.checkpoints.begin(), opts.checkpoints.end(), step) != opts.checkpoints.end())
            result.checkpoints.push_back(make_prediction(problem, net, v_gate, step, opts.weights));
    }
    result.prediction = make_prediction(problem, net, v_gate, opts.epochs, opts.weights);
    // Report checkpoints in the order they were requested.
    std::vector<PinnPrediction> ordered;
    for (long c : opts.checkpoints)
        for (const auto& p : result.checkpoints)
            if (p.epochs == c) ordered.push_back(p);
    result.checkpoints = std::move(ordered);
    result.network = std::move(net);
    return result;
}

AmortizedResult solve_amortized(const PinnProblem& problem, std::span<const double> biases, const PinnOptions& opts) {
    if (biases.empty()) throw ContractError("amortized training needs at least one bias");
    for (double v : biases) validate(v, opts);
    GeneratorNet net(opts.network, opts.seed);
    AdamOptions adam_opts = opts.adam;
    adam_opts.lr = opts.plateau.initial_lr;
    Adam adam(net.parameters(), adam_opts);
    PlateauScheduler scheduler(opts.plateau);
    const double inv = 1.0 / static_cast<double>(biases.size());

    AmortizedResult out;
    out.history.reserve(static_cast<std::size_t>(opts.epochs));
    const LossWeights w{opts.weights.boundary * inv, opts.weights.fd * inv};
    for (long step = 1; step <= opts.epochs; ++step) {
        LossRecord rec{step, adam.lr(), 0.0, 0.0, 0.0};
        for (double v : biases) {
            const LossTerms t = generator_loss(problem, net, v, w, true);
            rec.boundary += inv * t.boundary;
            rec.fd += inv * t.fd;
            rec.total += t.total;
        }
        out.history.push_back(rec);
        if (!std::isfinite(rec.total))
            throw DivergenceError(fmt::format("amortized loss became non-finite at step {}", step), step,
                                  std::move(out.history));
        adam.step(net.parameters());
        adam.set_lr(scheduler.step(rec.total));
    }
    for (double v : biases) out.predictions.push_back(make_prediction(problem, net, v, opts.epochs, opts.weights));
    out.network = std::move(net);
    return out;
}

ErrorReport evaluate_against(const PinnPrediction& prediction, const Snapshot& oracle) {
    if (prediction.phi.size() != oracle.phi.size() || prediction.normalized_density.size() != oracle.n.size())
        throw ShapeError("prediction and oracle are on different meshes");
    ErrorReport r;
    r.v_gate = prediction.v_gate;
    r.epochs = prediction.epochs;
    r.losses = prediction.losses;
    r.v_gate_extracted = prediction.v_gate_extracted;
    r.phi_err = prediction.phi - oracle.phi;
    const Eigen::VectorXd log_oracle = normalize_density(oracle.n).array().log10();
    r.logn_err = prediction.normalized_density.array().log10().matrix() - log_oracle;
    r.max_abs_phi_err = r.phi_err.cwiseAbs().maxCoeff();
    const double phi_scale = oracle.phi.cwiseAbs().maxCoeff();
    const double logn_scale = log_oracle.cwiseAbs().maxCoeff();
    r.max_phi_err_pct = phi_scale > 0.0 ? 100.0 * r.max_abs_phi_err / phi_scale : 0.0;
    r.max_logn_err_pct = logn_scale > 0.0 ? 100.0 * r.logn_err.cwiseAbs().maxCoeff() / logn_scale : 0.0;
    return r;
}

const Snapshot* find_snapshot(const SweepDataset& data, double v_gate, double tol) {
    for (const auto& s : data.snapshots)
        if (std::abs(s.v_gate - v_gate) <= tol) return &s;
    return nullptr;
}

std::vector<SweepEntry> sweep_solve(const PinnProblem& problem, std::span<const double> biases,
                                    const PinnOptions& opts, const SweepDataset* oracle, unsigned jobs) {
    std::vector<SweepEntry> entries(biases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < biases.size(); i = next++) {
            SweepEntry& e = entries[i];
            e.v_gate = biases[i];
            try {
                e.result = solve_bias(problem, biases[i], opts);
                if (oracle)
                    if (const Snapshot* s = find_snapshot(*oracle, biases[i]))
                        e.report = evaluate_against(e.result->prediction, *s);
            } catch (const Error& ex) {
                e.error = ex.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(biases.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return entries;
}

}  // namespace wirepinn
