#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <random>

#include <fmt/core.h>

#include "wirepinn/fermi.hpp"
#include "wirepinn/pinn.hpp"

namespace wirepinn::cli {

namespace {

CheckResult fermi_scan() {
    double worst = 0.0, at = 0.0;
    for (int i = 0; i <= 8000; ++i) {
        const double eta = -30.0 + 0.01 * i;
        const double exact = fermi_half_quadrature(eta);
        const double rel = std::abs(fermi_half_approx(eta) - exact) / exact;
        if (rel > worst) worst = rel, at = eta;
    }
    return {"fermi approximation vs quadrature, eta in [-30, 50]", worst <= 5e-3,
            fmt::format("max relative error {:.4e} at eta = {:.2f} (limit 5e-3)", worst, at)};
}

CheckResult fermi_derivative(bool broken) {
    double worst = 0.0;
    for (double eta = -20.0; eta <= 40.0; eta += 0.37) {
        const double h = 1e-5 * std::max(1.0, std::abs(eta));
        const double numeric = (fermi_half_approx(eta + h) - fermi_half_approx(eta - h)) / (2 * h);
        const double analytic = fermi_half_deriv(eta) * (broken ? 1.01 : 1.0);
        worst = std::max(worst, std::abs(analytic - numeric) / std::abs(numeric));
    }
    return {"fermi derivative vs central differences", worst <= 1e-5,
            fmt::format("max relative error {:.3e} (limit 1e-5)", worst)};
}

// Central differences on a tape built by `graph` from a trainable leaf.
double primitive_mismatch(const std::function<NodeId(Tape&, NodeId)>& graph, Eigen::VectorXd x0) {
    Parameter leaf("x", x0.size(), 1), zero("b", x0.size(), 1);
    leaf.value = x0;
    auto loss = [&](bool back) {
        Tape t;
        const NodeId y = graph(t, t.dense(t.constant(Eigen::VectorXd::Ones(1)), leaf, zero));
        const NodeId l = t.mse_const(y, 0.3);
        if (back) t.backward(l);
        return t.value(l)[0];
    };
    loss(true);
    double worst = 0.0, scale = 0.0;
    Eigen::VectorXd numeric(x0.size());
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        const double keep = leaf.value[i];
        leaf.value[i] = keep + 1e-6;
        const double up = loss(false);
        leaf.value[i] = keep - 1e-6;
        const double down = loss(false);
        leaf.value[i] = keep;
        numeric[i] = (up - down) / 2e-6;
        scale = std::max(scale, std::abs(numeric[i]));
    }
    for (Eigen::Index i = 0; i < x0.size(); ++i) worst = std::max(worst, std::abs(leaf.grad[i] - numeric[i]));
    return worst / scale;
}

CheckResult primitive_gradients() {
    std::mt19937_64 rng(11);
    auto random = [&](Eigen::Index n, double lo, double hi) {
        Eigen::VectorXd v(n);
        for (auto& e : v) e = lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return v;
    };
    Parameter w("w", 5, 6), b("b", 5, 1), k("k", 2 * 2 * 9, 1), kb("kb", 2, 1);
    w.value = random(30, -1, 1);
    b.value = random(5, -1, 1);
    k.value = random(36, -0.5, 0.5);
    const auto params = SemiconductorParams::silicon();
    const FermiClosure closure(params, std::vector<std::uint8_t>{1, 1, 0, 1});
    double worst = 0.0;
    worst = std::max(worst, primitive_mismatch([&](Tape& t, NodeId x) { return t.dense(x, w, b); }, random(6, -1, 1)));
    worst = std::max(worst, primitive_mismatch([](Tape& t, NodeId x) { return t.elu(x); }, random(6, -2, -0.1)));
    worst = std::max(worst, primitive_mismatch([](Tape& t, NodeId x) { return t.log10(x); }, random(6, 0.5, 3)));
    worst = std::max(worst, primitive_mismatch([&](Tape& t, NodeId x) { return t.divide(t.fermi(x, closure), 1e19); },
                                               random(4, 0.45, 0.7)));
    worst = std::max(worst, primitive_mismatch([&](Tape& t, NodeId x) { return t.conv_transpose(x, k, kb, {2, 2, 3, 4}); },
                                               random(24, -1, 1)));
    return {"autodiff primitives vs central differences", worst <= 1e-5,
            fmt::format("max relative error {:.3e} (limit 1e-5)", worst)};
}

}  // namespace

std::vector<CheckResult> run_self_tests(const std::string& fault) {
    std::vector<CheckResult> out;
    out.push_back(fermi_scan());
    out.push_back(fermi_derivative(fault == kFaultFermiDerivative));
    out.push_back(primitive_gradients());

    const auto mesh = build_device_mesh();
    const auto params = SemiconductorParams::silicon();
    const auto fv = assemble_fv_coefficients(mesh);
    const double tol = default_tolerance(fv);
    SweepDataset sweep;
    try {
        sweep = ramp_sweep(mesh, params, 0.0, 0.75, 0.0075);
    } catch (const Error& e) {
        out.push_back({"oracle sweep", false, e.what()});
        return out;
    }
    double worst_res = 0.0;
    for (const auto& s : sweep.snapshots) worst_res = std::max(worst_res, residual_check(mesh, s));
    out.push_back({"oracle residual on 101 snapshots", sweep.snapshots.size() == 101 && worst_res <= tol,
                   fmt::format("{} snapshots, max residual {:.3e} (tolerance {:.3e})", sweep.snapshots.size(),
                               worst_res, tol)});

    double asym = 0.0;
    for (const auto& s : sweep.snapshots)
        for (std::size_t i = 0; i < mesh.nx(); ++i)
            for (std::size_t j = 0; j < mesh.ny(); ++j)
                asym = std::max(asym, std::abs(s.phi[static_cast<Eigen::Index>(mesh.node(i, j))] -
                                               s.phi[static_cast<Eigen::Index>(mesh.node(mesh.nx() - 1 - i, j))]));
    out.push_back({"oracle source/drain mirror symmetry", asym <= 1e-9, fmt::format("max |phi - mirror| {:.3e} V", asym)});

    const auto surrogate = fit_surrogate(sweep, 40);
    const PinnProblem problem(mesh, surrogate, params);
    double fd_worst = 0.0;
    for (const auto& s : sweep.snapshots) fd_worst = std::max(fd_worst, loss_fd(normalize_density(s.n), s.phi, problem.closure()));
    out.push_back({"loss fixed point at oracle density", fd_worst == 0.0, fmt::format("max loss_fd {:.3e}", fd_worst)});

    GeneratorNet net;
    generator_loss(problem, net, 0.75, {}, true);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto& p = net.parameters()[rng() % net.parameters().size()];
        const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p.value.size()));
        const double keep = p.value[i];
        p.value[i] = keep + 1e-6;
        const double up = generator_loss(problem, net, 0.75, {}).total;
        p.value[i] = keep - 1e-6;
        const double down = generator_loss(problem, net, 0.75, {}).total;
        p.value[i] = keep;
        const double numeric = (up - down) / 2e-6;
        worst = std::max(worst, std::abs(p.grad[i] - numeric) / std::abs(numeric));
    }
    out.push_back({"composed PINN loss gradient (20 coordinates)", worst <= 1e-4,
                   fmt::format("max relative error {:.3e} (limit 1e-4)", worst)});
    return out;
}

}  // namespace wirepinn::cli
