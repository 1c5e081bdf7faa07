#include "taperom/material.hpp"

#include <cmath>

namespace taperom {

void MaterialParams::validate() const {
  if (!(E_c > 0.0)) throw ConfigError("material.E_c must be > 0");
  if (!(K_c > 0.0)) throw ConfigError("material.K_c must be > 0");
  if (!(n_exp >= 1.0)) throw ConfigError("material.n_exp must be >= 1");
  if (!(eta_floor >= 0.0)) throw ConfigError("material.eta_floor must be >= 0");
}

double sheet_resistivity(const MaterialParams& p, double k_norm) {
  if (k_norm < 0.0) throw DomainError("sheet_resistivity: negative current norm");
  if (p.n_exp == 1.0) return p.E_c / p.K_c + p.eta_floor;
  return (p.E_c / p.K_c) * std::pow(k_norm / p.K_c, p.n_exp - 1.0) + p.eta_floor;
}

double sheet_resistivity_derivative(const MaterialParams& p, double k_norm) {
  if (k_norm < 0.0) throw DomainError("sheet_resistivity_derivative: negative current norm");
  if (p.n_exp == 1.0) return 0.0;
  return (p.n_exp - 1.0) * (p.E_c / (p.K_c * p.K_c)) *
         std::pow(k_norm / p.K_c, p.n_exp - 2.0);
}

}  // namespace taperom
