#pragma once

#include "taperom/types.hpp"

namespace taperom {

// Power-law superconductor in sheet quantities: the tape is a 2D surface,
// so the constitutive law acts on the sheet current density K [A/m] with
// K_c = J_c * thickness and a sheet resistivity in ohms (per square).
struct MaterialParams {
  double E_c = 1e-4;        // V/m
  double K_c = 23600.0;     // A/m
  double n_exp = 25.0;      // power-law exponent
  double eta_floor = 1e-14; // Ohm, keeps the Jacobian nonsingular at zero current

  void validate() const;
};

// eta(k) = (E_c/K_c) (k/K_c)^(n-1) + eta_floor, strictly increasing for n > 1.
double sheet_resistivity(const MaterialParams& p, double k_norm);

// d eta / dk = (n-1) (E_c/K_c^2) (k/K_c)^(n-2).
double sheet_resistivity_derivative(const MaterialParams& p, double k_norm);

}  // namespace taperom
