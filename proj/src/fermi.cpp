#include "wirepinn/fermi.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "wirepinn/error.hpp"

namespace wirepinn {

namespace {

constexpr double kPrefactor = 0.75 * 1.7724538509055160273;  // 3 sqrt(pi) / 4

struct NuTerm {
    double value;  // kPrefactor * nu^(-3/8)
    double deriv;  // d/deta of value
};

NuTerm nu_term(double eta) noexcept {
    const double g = std::exp(-0.17 * (eta + 1.0) * (eta + 1.0));
    const double eta2 = eta * eta;
    const double nu = eta2 * eta2 + 50.0 + 33.6 * eta * (1.0 - 0.68 * g);
    const double dnu = 4.0 * eta2 * eta + 33.6 * (1.0 - 0.68 * g) + 33.6 * eta * 0.68 * 0.34 * (eta + 1.0) * g;
    const double a = kPrefactor * std::pow(nu, -0.375);
    return {a, -0.375 * a * dnu / nu};
}

}  // namespace

double fermi_half_approx(double eta) noexcept {
    const NuTerm t = nu_term(eta);
    if (eta > 0.0) return 1.0 / (std::exp(-eta) + t.value);
    const double e = std::exp(eta);
    return e / (1.0 + t.value * e);
}

double fermi_half_deriv(double eta) noexcept {
    const NuTerm t = nu_term(eta);
    if (eta > 0.0) {
        const double em = std::exp(-eta);
        const double d = em + t.value;
        return (em - t.deriv) / (d * d);
    }
    const double e = std::exp(eta);
    const double d = 1.0 + t.value * e;
    return e * (1.0 - t.deriv * e) / (d * d);
}

double fermi_half_quadrature(double eta) {
    // occupancy 1/(1+exp(x-eta)) evaluated without overflow
    auto integrand = [eta](double x) {
        const double s = x - eta;
        const double occ = s > 0.0 ? std::exp(-s) / (1.0 + std::exp(-s)) : 1.0 / (1.0 + std::exp(s));
        return std::sqrt(x) * occ;
    };
    constexpr double tol = 1e-12;
    const double split = std::max(eta, 0.0);
    double head = 0.0, head_err = 0.0, tail_err = 0.0, l1 = 0.0;
    if (split > 0.0) {
        boost::math::quadrature::tanh_sinh<double> ts;
        head = ts.integrate(integrand, 0.0, split, tol, &head_err, &l1);
    }
    boost::math::quadrature::exp_sinh<double> es;
    auto shifted = [&](double t) { return integrand(split + t); };
    const double tail = es.integrate(shifted, tol, &tail_err, &l1);
    const double total = head + tail;
    if (!(total > 0.0) || head_err + tail_err > 1e-9)
        throw NumericError("Fermi integral quadrature failed at eta=" + std::to_string(eta));
    return total * 2.0 / std::sqrt(std::numbers::pi);
}

double inverse_fermi_half(double u) {
    if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("inverse_fermi_half requires u > 0");
    const double target = std::log(u);
    // F >= exp(eta) / (1 + c exp(eta)) brackets: Boltzmann guess below, degenerate guess above
    double lo = std::min(target, -1.0) - 2.0;
    double hi = std::max(target + 2.0, std::pow(u / kPrefactor, 2.0 / 3.0) + 2.0);
    auto g = [&](double eta) { return std::log(fermi_half_approx(eta)) - target; };
    while (g(lo) > 0.0) lo -= 10.0;
    while (g(hi) < 0.0) hi += 10.0;

    double eta = std::clamp(target, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double f = fermi_half_approx(eta);
        const double r = std::log(f) - target;
        if (std::abs(r) <= 1e-14) return eta;
        if (r > 0.0) hi = eta;
        else lo = eta;
        double next = eta - r * f / fermi_half_deriv(eta);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == eta) return eta;
        eta = next;
    }
    throw NumericError("inverse_fermi_half did not converge for u=" + std::to_string(u));
}

SemiconductorParams SemiconductorParams::silicon() {
    SemiconductorParams p;
    p.phi_ref = -p.v_t * inverse_fermi_half(1e10 / p.n_c);
    return p;
}

double electron_density(double phi, const SemiconductorParams& p, Region region) noexcept {
    if (region == Region::Oxide) return 0.0;
    return p.n_c * fermi_half_approx(p.eta(phi));
}

double electron_density_deriv(double phi, const SemiconductorParams& p, Region region) noexcept {
    if (region == Region::Oxide) return 0.0;
    return p.n_c * fermi_half_deriv(p.eta(phi)) / p.v_t;
}

double equilibrium_potential(double density, const SemiconductorParams& p) {
    return p.phi_ref + p.v_t * inverse_fermi_half(density / p.n_c);
}

}  // namespace wirepinn
