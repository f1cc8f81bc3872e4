#pragma once

namespace wirepinn::constants {

inline constexpr double q = 1.602176634e-19;         ///< elementary charge [C]
inline constexpr double eps0 = 8.8541878128e-14;     ///< vacuum permittivity [F/cm]
inline constexpr double cm_per_um = 1e-4;
inline constexpr double cm_per_nm = 1e-7;

}  // namespace wirepinn::constants
