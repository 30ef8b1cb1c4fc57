#pragma once

// Conversions between interface units and the internal unit system
// (ns, m, rad/ns).  A linewidth quoted as "kappa/2pi = 200 MHz" becomes
// kappa = 2*pi*0.2 rad/ns.

#include "qlink/common.hpp"

namespace qlink {

/// kappa/(2*pi) in MHz -> kappa in rad/ns.
inline double kappa_from_mhz(double f_mhz) { return 2.0 * pi * f_mhz * 1e-3; }

/// kappa in rad/ns -> kappa/(2*pi) in MHz.
inline double kappa_to_mhz(double kappa) { return kappa / (2.0 * pi) * 1e3; }

/// Carrier frequency in GHz -> angular frequency in rad/ns.
inline double omega_from_ghz(double f_ghz) { return 2.0 * pi * f_ghz; }

/// Angular frequency in rad/ns -> frequency in GHz.
inline double omega_to_ghz(double omega) { return omega / (2.0 * pi); }

}  // namespace qlink
