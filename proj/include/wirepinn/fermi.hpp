#pragma once

#include "wirepinn/mesh.hpp"

namespace wirepinn {

/// Normalized Fermi-Dirac integral of order 1/2 in the closed form of
/// Bednarczyk & Bednarczyk (1978):
///
///   F(eta) = 1 / (exp(-eta) + (3 sqrt(pi) / 4) * nu^(-3/8))
///   nu     = eta^4 + 50 + 33.6 eta (1 - 0.68 exp(-0.17 (eta + 1)^2))
///
/// normalized so that F -> exp(eta) as eta -> -inf.
double fermi_half_approx(double eta) noexcept;

/// Exact derivative of fermi_half_approx (not of the true integral).
double fermi_half_deriv(double eta) noexcept;

/// (2/sqrt(pi)) * int_0^inf sqrt(x) / (1 + exp(x - eta)) dx by adaptive
/// double-exponential quadrature, relative accuracy better than 1e-8.
/// Throws NumericError if the error estimate exceeds that.
double fermi_half_quadrature(double eta);

/// eta with fermi_half_approx(eta) == u, |du/u| <= 1e-12. Throws DomainError for u <= 0.
double inverse_fermi_half(double u);

struct SemiconductorParams {
    double n_c = 2.86e19;    ///< conduction-band effective density of states [cm^-3]
    double v_t = 0.025852;   ///< thermal voltage kT/q [V]
    double phi_ref = 0.0;    ///< potential where the reduced Fermi level is zero [V]

    double eta(double phi) const noexcept { return (phi - phi_ref) / v_t; }

    /// Silicon at 300 K with phi_ref fixed so that phi = 0 gives n = 1e10 cm^-3.
    static SemiconductorParams silicon();
};

/// n(phi): N_C F((phi - phi_ref)/V_T) in silicon, 0 in oxide [cm^-3].
double electron_density(double phi, const SemiconductorParams& p, Region region) noexcept;

/// dn/dphi [cm^-3 / V].
double electron_density_deriv(double phi, const SemiconductorParams& p, Region region) noexcept;

/// Potential at which n equals `density` (charge-neutral ohmic contact for density = N_D).
double equilibrium_potential(double density, const SemiconductorParams& p);

}  // namespace wirepinn
