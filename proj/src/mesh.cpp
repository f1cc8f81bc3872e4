#include "wirepinn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "wirepinn/constants.hpp"
#include "wirepinn/error.hpp"

namespace wirepinn {

std::string_view to_string(Region r) {
    return r == Region::Silicon ? "Si" : "Ox";
}

std::string_view to_string(Contact c) {
    switch (c) {
        case Contact::Gate: return "gate";
        case Contact::Source: return "source";
        case Contact::Drain: return "drain";
        case Contact::None: break;
    }
    return "none";
}

namespace {

class Fnv1a {
public:
    template <class T>
    void add(const T& v) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (unsigned char b : bytes) {
            h_ ^= b;
            h_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

TensorMesh::TensorMesh(std::vector<double> x_um, std::vector<double> y_um, double radius_um,
                       std::size_t gate_first, std::size_t gate_last, double nd_cm3,
                       double na_cm3, double eps_si, double eps_ox)
    : x_(std::move(x_um)),
      y_(std::move(y_um)),
      radius_(radius_um),
      gate_first_(gate_first),
      gate_last_(gate_last),
      eps_si_(eps_si),
      eps_ox_(eps_ox) {
    for (auto* axis : {&x_, &y_}) {
        if (axis->size() < 2) throw ConfigError("mesh axis needs at least two nodes");
        for (std::size_t i = 1; i < axis->size(); ++i)
            if (!((*axis)[i] > (*axis)[i - 1]))
                throw ConfigError("mesh coordinates must be strictly increasing");
    }
    if (!(eps_si > 0.0) || !(eps_ox > 0.0)) throw ConfigError("permittivity must be positive");
    if (gate_first > gate_last || gate_last >= x_.size())
        throw ConfigError("gate span outside the mesh");

    const std::size_t n = size();
    region_.resize(n);
    contact_.resize(n, Contact::None);
    doping_.resize(n, 0.0);
    const double y_tol = 1e-9 * y_.back();
    for (std::size_t i = 0; i < nx(); ++i) {
        const bool channel = i >= gate_first_ && i <= gate_last_;
        for (std::size_t j = 0; j < ny(); ++j) {
            const std::size_t k = node(i, j);
            const bool oxide = y_[j] > radius_ + y_tol;
            region_[k] = oxide ? Region::Oxide : Region::Silicon;
            if (!oxide) doping_[k] = channel ? -na_cm3 : nd_cm3;
            if (j + 1 == ny() && channel) contact_[k] = Contact::Gate;
            if (!oxide && i == 0) contact_[k] = Contact::Source;
            if (!oxide && i + 1 == nx()) contact_[k] = Contact::Drain;
        }
    }

    Fnv1a h;
    h.add(nx());
    h.add(ny());
    for (double v : x_) h.add(v);
    for (double v : y_) h.add(v);
    for (std::size_t k = 0; k < n; ++k) {
        h.add(static_cast<std::uint8_t>(region_[k]));
        h.add(static_cast<std::uint8_t>(contact_[k]));
        h.add(doping_[k]);
    }
    h.add(eps_si_);
    h.add(eps_ox_);
    fingerprint_ = h.value();
}

double TensorMesh::permittivity(std::size_t k) const noexcept {
    return region_[k] == Region::Silicon ? eps_si_ : eps_ox_;
}

std::vector<std::size_t> TensorMesh::nodes_with(Contact c) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < size(); ++k)
        if (contact_[k] == c) out.push_back(k);
    return out;
}

TensorMesh build_device_mesh(const DeviceConfig& c) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(c.radius_nm) || !positive(c.tox_nm) || !positive(c.length_nm))
        throw ConfigError("radius, oxide thickness and length must be positive");
    if (!(c.gate_begin_nm >= 0.0 && c.gate_begin_nm < c.gate_end_nm && c.gate_end_nm <= c.length_nm))
        throw ConfigError("gate span must satisfy 0 <= begin < end <= length");
    if (c.nx < 3) throw ConfigError("nx must be at least 3");
    if (c.ny_oxide < 1 || c.ny - c.ny_oxide < 2)
        throw ConfigError("ny must leave at least two silicon rows and one oxide row");
    if (!(c.nd_cm3 >= 0.0) || !(c.na_cm3 >= 0.0)) throw ConfigError("doping must be non-negative");

    const auto nx = static_cast<std::size_t>(c.nx);
    const auto n_si = static_cast<std::size_t>(c.ny - c.ny_oxide);
    const auto n_ox = static_cast<std::size_t>(c.ny_oxide);

    std::vector<double> x(nx), y(n_si + n_ox);
    for (std::size_t i = 0; i < nx; ++i)
        x[i] = c.length_nm * static_cast<double>(i) / static_cast<double>(nx - 1) / 1000.0;
    for (std::size_t j = 0; j < n_si; ++j)
        y[j] = c.radius_nm * static_cast<double>(j) / static_cast<double>(n_si - 1) / 1000.0;
    for (std::size_t j = 0; j < n_ox; ++j)
        y[n_si + j] =
            (c.radius_nm + c.tox_nm * static_cast<double>(j + 1) / static_cast<double>(n_ox)) / 1000.0;

    const double dx_nm = c.length_nm / static_cast<double>(nx - 1);
    const auto gate_first = static_cast<std::size_t>(std::lround(c.gate_begin_nm / dx_nm));
    const auto gate_last = static_cast<std::size_t>(std::lround(c.gate_end_nm / dx_nm));
    if (gate_first < 1 || gate_last + 1 >= nx || gate_first > gate_last)
        throw ConfigError("gate span must leave source and drain columns");

    return TensorMesh(std::move(x), std::move(y), c.radius_nm / 1000.0, gate_first, gate_last,
                      c.nd_cm3, c.na_cm3, c.eps_si, c.eps_ox);
}

std::size_t nearest_node(const TensorMesh& mesh, double x_um, double y_um) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const double dx = mesh.x_um(k) - x_um;
        const double dy = mesh.y_um(k) - y_um;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

FvCoefficients assemble_fv_coefficients(const TensorMesh& mesh) {
    using constants::cm_per_um;
    using constants::eps0;
    const auto& x = mesh.x_nodes();
    const auto& y = mesh.y_nodes();
    const std::size_t nx = mesh.nx(), ny = mesh.ny();

    // dual-cell half widths on each side of every node, in cm
    std::vector<double> wx(nx, 0.0), wy(ny, 0.0), y_lo(ny), y_hi(ny);
    for (std::size_t i = 0; i + 1 < nx; ++i) {
        const double h = 0.5 * (x[i + 1] - x[i]) * cm_per_um;
        wx[i] += h;
        wx[i + 1] += h;
    }
    for (std::size_t j = 0; j < ny; ++j) {
        y_lo[j] = j == 0 ? y[0] : 0.5 * (y[j - 1] + y[j]);
        y_hi[j] = j + 1 == ny ? y[j] : 0.5 * (y[j] + y[j + 1]);
        wy[j] = (y_hi[j] - y_lo[j]) * cm_per_um;
    }

    FvCoefficients fv;
    fv.volume.resize(mesh.size());
    fv.silicon_volume.resize(mesh.size());
    fv.edges.reserve(2 * mesh.size());
    const double r = mesh.radius_um();
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t k = mesh.node(i, j);
            fv.volume[k] = wx[i] * wy[j];
            const double si_extent = std::max(0.0, std::min(y_hi[j], r) - y_lo[j]) * cm_per_um;
            fv.silicon_volume[k] = wx[i] * si_extent;
            if (i + 1 < nx) {
                const std::size_t m = mesh.node(i + 1, j);
                const double eps = harmonic(mesh.permittivity(k), mesh.permittivity(m));
                fv.edges.push_back({k, m, eps0 * eps * wy[j] / ((x[i + 1] - x[i]) * cm_per_um)});
            }
            if (j + 1 < ny) {
                const std::size_t m = mesh.node(i, j + 1);
                const double eps = harmonic(mesh.permittivity(k), mesh.permittivity(m));
                fv.edges.push_back({k, m, eps0 * eps * wx[i] / ((y[j + 1] - y[j]) * cm_per_um)});
            }
        }
    }
    return fv;
}

}  // namespace wirepinn
