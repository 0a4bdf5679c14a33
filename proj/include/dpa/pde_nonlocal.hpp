#pragma once

#include "dpa/fields.hpp"
#include "dpa/grid.hpp"
#include "dpa/kernels.hpp"

#include <vector>

namespace dpa {

struct NonlocalConfig {
  double T = 0.0;
  double dt = 0.0;             // > 0: fixed step (checked against the CFL bound); 0: adaptive
  double cfl_fraction = 0.5;   // adaptive dt = fraction * h / (2 d |v|_inf)
  double nu = 0.0;             // artificial viscosity -nu lap rho, implicit
  bool transport = true;       // false: drop the velocity field (pure heat flow)
  int cadence = 0;             // steps between snapshots (0: only start and end)
  bool energy_trace = true;
};

// Velocities at the faces x_j + h/2 e_axis, by spectral half-cell shift.
std::vector<GridField> face_velocities(const GridField& rho, const KernelSet& kernels);

// h / (2 |v|_inf) over all faces; infinity for v = 0.
double cfl_limit(const std::vector<GridField>& faces);

// Upwind finite-volume transport step followed by the implicit heat multiplier.
// Throws when dt exceeds h / (2 |v|_inf), naming the admissible dt.
GridField step_nonlocal(const GridField& rho, const KernelSet& kernels, double dt, double nu, bool transport = true);
GridField step_nonlocal(const GridField& rho, const std::vector<GridField>& faces, double dt, double nu);

struct NonlocalRun {
  double nu = 0.0;
  std::vector<GridField> snapshots;
  std::vector<double> times;
  std::vector<EnergyReport> energy;  // every step when energy_trace
  std::vector<double> step_sizes;
  long steps = 0;
  double min_value = 0.0;        // over the whole run
  double max_mass_drift = 0.0;
  double max_energy_increase = 0.0;  // largest F(t_{k+1}) - F(t_k)
  double max_entropy = 0.0;          // monitored, not asserted
  GridField final_state() const { return snapshots.back(); }
};

NonlocalRun run_nonlocal(const GridField& rho0, const KernelSet& kernels, const NonlocalConfig& cfg);

struct NuSequenceRun {
  std::vector<NonlocalRun> runs;
  std::vector<double> l2_differences;  // |rho_{nu_k}(T) - rho_{nu_{k+1}}(T)|_{L2}
};

NuSequenceRun run_nonlocal(const GridField& rho0, const KernelSet& kernels, const NonlocalConfig& cfg,
                           const std::vector<double>& nu_sequence);

double l2_distance(const GridField& a, const GridField& b);
double l1_distance(const GridField& a, const GridField& b);

}  // namespace dpa
