#include "wirepinn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/core.h>

#include "wirepinn/banded.hpp"
#include "wirepinn/constants.hpp"
#include "wirepinn/error.hpp"

namespace wirepinn {

double default_tolerance(const FvCoefficients& fv) {
    const double vmax = *std::max_element(fv.volume.begin(), fv.volume.end());
    return 1e-10 * constants::q * 1e20 * vmax;
}

double contact_potential(const TensorMesh& mesh, const SemiconductorParams& p, bool electrons) {
    const auto source = mesh.nodes_with(Contact::Source);
    if (source.empty() || !electrons) return 0.0;
    const double nd = mesh.net_doping(source.front());
    return nd > 0.0 ? equilibrium_potential(nd, p) : 0.0;
}

namespace {

Eigen::VectorXd linear_guess(const TensorMesh& mesh, double v_gate, double v_contact) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(mesh.size()));
    const double x_first = mesh.x_nodes()[mesh.gate_first()];
    const double x_last = mesh.x_nodes()[mesh.gate_last()];
    const double length = mesh.length_um();
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const double x = mesh.x_um(k);
        double v = v_gate;
        if (x < x_first) v = v_contact + (v_gate - v_contact) * x / x_first;
        else if (x > x_last) v = v_contact + (v_gate - v_contact) * (length - x) / (length - x_last);
        phi[static_cast<Eigen::Index>(k)] = v;
    }
    return phi;
}

void apply_dirichlet(const TensorMesh& mesh, Eigen::VectorXd& phi, double v_gate, double v_contact) {
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const auto c = mesh.contact(k);
        if (c == Contact::Gate) phi[static_cast<Eigen::Index>(k)] = v_gate;
        else if (c != Contact::None) phi[static_cast<Eigen::Index>(k)] = v_contact;
    }
}

}  // namespace

Snapshot solve_equilibrium(const TensorMesh& mesh, const FvCoefficients& fv, const SemiconductorParams& p,
                           double v_gate, const NewtonOptions& opts, const Eigen::VectorXd* initial_guess) {
    using constants::q;
    const std::size_t n = mesh.size();
    const auto N = static_cast<Eigen::Index>(n);
    const double v_contact = contact_potential(mesh, p, opts.electrons);
    const double tol = opts.tolerance > 0.0 ? opts.tolerance : default_tolerance(fv);
    const double clamp = opts.clamp_vt * p.v_t;

    Eigen::VectorXd phi;
    if (initial_guess) {
        if (initial_guess->size() != N) throw ShapeError("initial guess has wrong length");
        phi = *initial_guess;
    } else {
        phi = linear_guess(mesh, v_gate, v_contact);
    }
    apply_dirichlet(mesh, phi, v_gate, v_contact);

    auto density = [&](std::size_t k) {
        return opts.electrons ? electron_density(phi[static_cast<Eigen::Index>(k)], p, mesh.region(k)) : 0.0;
    };

    BandedSpdMatrix jac(n, mesh.ny());
    std::vector<double> res(n);
    double norm = 0.0;
    for (int it = 0;; ++it) {
        // residual F_k = sum_edges c (phi_nb - phi_k) + q (N_D - N_A - n_k) V_k
        for (std::size_t k = 0; k < n; ++k) res[k] = q * (mesh.net_doping(k) - density(k)) * fv.silicon_volume[k];
        for (const auto& e : fv.edges) {
            const double flux = e.conductance * (phi[static_cast<Eigen::Index>(e.b)] - phi[static_cast<Eigen::Index>(e.a)]);
            res[e.a] += flux;
            res[e.b] -= flux;
        }
        norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (mesh.is_dirichlet(k)) res[k] = 0.0;
            norm = std::max(norm, std::abs(res[k]));
        }
        if (!std::isfinite(norm)) throw NumericError("non-finite residual in Newton iteration");
        if (norm <= tol) {
            Snapshot s;
            s.v_gate = v_gate;
            s.n.resize(N);
            s.net_charge.resize(N);
            for (std::size_t k = 0; k < n; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                s.n[kk] = density(k);
                s.net_charge[kk] = q * (mesh.net_doping(k) - s.n[kk]);
            }
            s.phi = std::move(phi);
            s.converged = true;
            s.residual_norm = norm;
            s.iterations = it;
            return s;
        }
        if (it == opts.max_iterations)
            throw ConvergenceError(fmt::format("Newton did not converge at V_G = {} V", v_gate), norm, it);

        // -J is symmetric positive definite; Dirichlet rows are identity
        jac.set_zero();
        for (std::size_t k = 0; k < n; ++k) {
            if (mesh.is_dirichlet(k)) {
                jac.lower(k, k) = 1.0;
            } else if (opts.electrons) {
                jac.lower(k, k) = q * fv.silicon_volume[k] *
                                  electron_density_deriv(phi[static_cast<Eigen::Index>(k)], p, mesh.region(k));
            }
        }
        for (const auto& e : fv.edges) {
            const bool da = mesh.is_dirichlet(e.a), db = mesh.is_dirichlet(e.b);
            if (!da) jac.lower(e.a, e.a) += e.conductance;
            if (!db) jac.lower(e.b, e.b) += e.conductance;
            if (!da && !db) jac.lower(std::max(e.a, e.b), std::min(e.a, e.b)) -= e.conductance;
        }
        jac.factorize();
        jac.solve(res);
        for (std::size_t k = 0; k < n; ++k)
            phi[static_cast<Eigen::Index>(k)] += std::clamp(res[k], -clamp, clamp);
    }
}

std::size_t ramp_count(double v_start, double v_end, double step) {
    if (!(step > 0.0) || !(v_end >= v_start)) throw ContractError("ramp requires step > 0 and v_end >= v_start");
    return static_cast<std::size_t>(std::floor((v_end - v_start) / step + 1e-9)) + 1;
}

SweepDataset ramp_sweep(const TensorMesh& mesh, const SemiconductorParams& p, double v_start, double v_end,
                        double step, const NewtonOptions& opts) {
    const std::size_t count = ramp_count(v_start, v_end, step);
    const FvCoefficients fv = assemble_fv_coefficients(mesh);
    SweepDataset data;
    data.mesh_fingerprint = mesh.fingerprint();
    data.params = p;
    data.contact_potential = contact_potential(mesh, p, opts.electrons);
    data.snapshots.reserve(count);
    for (std::size_t b = 0; b < count; ++b) {
        const double v = v_start + static_cast<double>(b) * step;
        const Eigen::VectorXd* guess = b == 0 ? nullptr : &data.snapshots.back().phi;
        try {
            data.snapshots.push_back(solve_equilibrium(mesh, fv, p, v, opts, guess));
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("bias index " + std::to_string(b) + ": " + e.what(), e.residual(),
                                   e.iterations());
        }
    }
    return data;
}

double residual_check(const TensorMesh& mesh, const Snapshot& s) {
    using constants::cm_per_um;
    const auto& x = mesh.x_nodes();
    const auto& y = mesh.y_nodes();
    const long nx = static_cast<long>(mesh.nx()), ny = static_cast<long>(mesh.ny());
    if (s.phi.size() != static_cast<Eigen::Index>(mesh.size()) || s.n.size() != s.phi.size())
        throw ShapeError("snapshot does not match mesh");

    // half-cell extents toward the lower/upper neighbour, zero on the boundary
    auto half = [](const std::vector<double>& c, long i, int dir) {
        const long m = i + dir;
        if (m < 0 || m >= static_cast<long>(c.size())) return 0.0;
        return 0.5 * std::abs(c[static_cast<std::size_t>(m)] - c[static_cast<std::size_t>(i)]);
    };
    auto eps_at = [&](long i, long j) { return mesh.permittivity(mesh.node(static_cast<std::size_t>(i), static_cast<std::size_t>(j))); };
    auto phi_at = [&](long i, long j) {
        return s.phi[static_cast<Eigen::Index>(mesh.node(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))];
    };

    double worst = 0.0;
    for (long i = 0; i < nx; ++i) {
        for (long j = 0; j < ny; ++j) {
            const std::size_t k = mesh.node(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (mesh.is_dirichlet(k)) continue;
            const double wx = (half(x, i, -1) + half(x, i, +1)) * cm_per_um;
            const double wy = (half(y, j, -1) + half(y, j, +1)) * cm_per_um;
            double flux = 0.0;
            const long di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const long a = i + di[d], b = j + dj[d];
                if (a < 0 || a >= nx || b < 0 || b >= ny) continue;
                const double e1 = eps_at(i, j), e2 = eps_at(a, b);
                const double eps = constants::eps0 * 2.0 * e1 * e2 / (e1 + e2);
                const double dist = di[d] != 0 ? std::abs(x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(i)])
                                               : std::abs(y[static_cast<std::size_t>(b)] - y[static_cast<std::size_t>(j)]);
                const double face = di[d] != 0 ? wy : wx;
                flux += eps * face / (dist * cm_per_um) * (phi_at(a, b) - phi_at(i, j));
            }
            // silicon part of the box: y extent clipped to the core radius
            const double y_lo = y[static_cast<std::size_t>(j)] - half(y, j, -1);
            const double y_hi = y[static_cast<std::size_t>(j)] + half(y, j, +1);
            const double si_height = std::max(0.0, std::min(y_hi, mesh.radius_um()) - y_lo) * cm_per_um;
            const double charge = constants::q * (mesh.net_doping(k) - s.n[static_cast<Eigen::Index>(k)]);
            worst = std::max(worst, std::abs(flux + charge * wx * si_height));
        }
    }
    return worst;
}

std::vector<ProbeSample> extract_probe(const SweepDataset& data, const TensorMesh& mesh, double x_um, double y_um) {
    const auto k = static_cast<Eigen::Index>(nearest_node(mesh, x_um, y_um));
    std::vector<ProbeSample> out;
    out.reserve(data.snapshots.size());
    for (const auto& s : data.snapshots) out.push_back({s.v_gate, s.phi[k], s.n[k]});
    return out;
}

}  // namespace wirepinn
