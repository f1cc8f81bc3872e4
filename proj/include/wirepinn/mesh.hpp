#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wirepinn {

enum class Region : std::uint8_t { Silicon, Oxide };
enum class Contact : std::uint8_t { None, Gate, Source, Drain };

std::string_view to_string(Region r);
std::string_view to_string(Contact c);

/// Geometry and doping of the half nanowire cross-section.
///
/// The silicon core [0, radius] carries `nx_si = ny - ny_oxide` uniformly spaced
/// radial nodes; the oxide shell (radius, radius + tox] carries `ny_oxide`
/// uniformly spaced nodes, so the Si/SiO2 interface is always a node row.
/// The gate span is snapped to the nearest x nodes.
struct DeviceConfig {
    double radius_nm = 4.0;
    double tox_nm = 1.0;
    double length_nm = 81.0;
    double gate_begin_nm = 31.5;
    double gate_end_nm = 49.5;
    double nd_cm3 = 1e20;  ///< donor level in source/drain extensions
    double na_cm3 = 1e10;  ///< acceptor level in the gated body
    int nx = 129;
    int ny = 17;
    int ny_oxide = 4;
    double eps_si = 11.7;
    double eps_ox = 3.9;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
/// Throws ConfigError naming the offending line.
DeviceConfig parse_device_config(std::string_view text);
DeviceConfig load_device_config(const std::string& path);

/// Tensor-product mesh; node index is `i * ny + j` (y fastest), with `i`
/// the axial and `j` the radial index.
class TensorMesh {
public:
    TensorMesh(std::vector<double> x_um, std::vector<double> y_um, double radius_um,
               std::size_t gate_first, std::size_t gate_last, double nd_cm3, double na_cm3,
               double eps_si, double eps_ox);

    std::size_t nx() const noexcept { return x_.size(); }
    std::size_t ny() const noexcept { return y_.size(); }
    std::size_t size() const noexcept { return x_.size() * y_.size(); }
    std::size_t node(std::size_t i, std::size_t j) const noexcept { return i * y_.size() + j; }
    std::size_t ix(std::size_t k) const noexcept { return k / y_.size(); }
    std::size_t iy(std::size_t k) const noexcept { return k % y_.size(); }

    const std::vector<double>& x_nodes() const noexcept { return x_; }
    const std::vector<double>& y_nodes() const noexcept { return y_; }
    double x_um(std::size_t k) const noexcept { return x_[ix(k)]; }
    double y_um(std::size_t k) const noexcept { return y_[iy(k)]; }
    double radius_um() const noexcept { return radius_; }
    double length_um() const noexcept { return x_.back(); }

    Region region(std::size_t k) const noexcept { return region_[k]; }
    Contact contact(std::size_t k) const noexcept { return contact_[k]; }
    double net_doping(std::size_t k) const noexcept { return doping_[k]; }
    /// Relative permittivity at node k.
    double permittivity(std::size_t k) const noexcept;
    double eps_silicon() const noexcept { return eps_si_; }
    double eps_oxide() const noexcept { return eps_ox_; }

    const std::vector<Region>& regions() const noexcept { return region_; }
    const std::vector<Contact>& contacts() const noexcept { return contact_; }
    const std::vector<double>& net_doping() const noexcept { return doping_; }

    bool is_dirichlet(std::size_t k) const noexcept { return contact_[k] != Contact::None; }
    std::vector<std::size_t> nodes_with(Contact c) const;
    std::size_t gate_first() const noexcept { return gate_first_; }
    std::size_t gate_last() const noexcept { return gate_last_; }

    /// FNV-1a hash of coordinates, tags, doping and permittivities.
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

private:
    std::vector<double> x_, y_;
    double radius_;
    std::size_t gate_first_, gate_last_;
    double eps_si_, eps_ox_;
    std::vector<Region> region_;
    std::vector<Contact> contact_;
    std::vector<double> doping_;
    std::uint64_t fingerprint_ = 0;
};

TensorMesh build_device_mesh(const DeviceConfig& config = {});

/// Node minimizing Euclidean distance to (x, y) [um]; ties go to the lowest index.
std::size_t nearest_node(const TensorMesh& mesh, double x_um, double y_um);

/// Two-point flux finite-volume coefficients for the box method, per unit depth.
struct FvEdge {
    std::size_t a;
    std::size_t b;
    double conductance;  ///< eps0 * eps_edge * face / length  [F]
};

struct FvCoefficients {
    std::vector<FvEdge> edges;
    std::vector<double> volume;          ///< control volume [cm^3] (1 cm depth)
    std::vector<double> silicon_volume;  ///< part of the control volume inside silicon
};

FvCoefficients assemble_fv_coefficients(const TensorMesh& mesh);

}  // namespace wirepinn
