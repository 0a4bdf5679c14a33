#pragma once

#include "dpa/grid.hpp"
#include "dpa/kernels.hpp"
#include "dpa/particles.hpp"

#include <iosfwd>
#include <vector>

namespace dpa {

GridField periodic_convolve(const GridField& f, const KernelTable& kernel);
GridField apply_multiplier(const GridField& f, const Vector& symbol);

// (f - f * omega_eps) / eps^2
GridField B_eps(const GridField& f, const KernelTable& omega, double epsilon);

// Double sum over the support of omega with weights h^{2d}.
double dissipation_D_eps(const GridField& f, const KernelTable& omega, double epsilon);

// (1/(m-1)) int f^m; rejects cells below -1e-12 and treats the rest as max(f, 0).
double energy_E_m(const GridField& f, double m);

// int rho (log rho - 1) with 0 log 0 = 0.
double entropy(const GridField& rho);

struct EnergyReport {
  double t = 0.0;
  double F_eps_alpha = 0.0;
  double D_smoothed = 0.0;    // D_eps[rho * w~]
  double E_m_smoothed = 0.0;  // E_m[rho * w~]
  double E2_half_viscous = 0.0;  // E_2[rho * R^{1/2}] (0 when the term is dropped)
  double viscosity_weight = 0.0; // eps*/2, or 0 when dropped
  double entropy = 0.0;
  Vector mean_position;  // circular mean per axis
  double step_dissipation = 0.0;  // int rho |v|^2

  double identity_residual() const;
};

// Requires kernel tables on the same grid as rho.
EnergyReport free_energy(const GridField& rho, const KernelSet& kernels, double t = 0.0);

// m = 2 quadratic form (1/2) <K * rho, rho> assembled in Fourier space.
double quadratic_energy(const GridField& rho, const KernelSet& kernels);

Vector circular_mean(const GridField& rho);

// (1/N) sum_i w~(x - X_i) at the nodes of an n^d grid, through the kernel table.
GridField kde_density(const ParticleState& state, const KernelTable& omega_tilde, int n);

// Potential phi with v = grad phi:
// -B_eps[rho * w~ * w~] + (m/(m-1)) w~ * (rho * w~)^{m-1} - eps* rho * R_alpha
GridField potential_nl(const GridField& rho, const KernelSet& kernels);
std::vector<GridField> velocity_field_nl(const GridField& rho, const KernelSet& kernels);

void write_energy_header(std::ostream& out, int dim);
void write_energy_row(std::ostream& out, const EnergyReport& r);

}  // namespace dpa
