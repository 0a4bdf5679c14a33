#pragma once

#include "dpa/grid.hpp"

#include <string>
#include <vector>

namespace dpa {

// LaggedImplicit: (I + dt div(M grad lap)) solved exactly by preconditioned BiCGSTAB.
// Stabilized: single constant-coefficient solve (I + dt kappa lap^2) with the
// mobility remainder explicit.
enum class LocalScheme { LaggedImplicit, Stabilized };
LocalScheme parse_local_scheme(const std::string& s);
std::string to_string(LocalScheme s);

struct LocalSolverConfig {
  LocalScheme scheme = LocalScheme::LaggedImplicit;
  int n = 256;
  double dt = 1e-6;
  double m = 2.0;
  double kappa = 0.0;  // <= 0: auto, max of the current density each step
  double C0 = 0.0;     // <= 0: auto, 10 E_m[rho0] + 1
  double T = 0.0;
  int cadence = 0;     // steps between snapshots (0: only start and end)
  double solver_tolerance = 1e-13;
  int max_iterations = 1000;
};

struct LocalState {
  GridField rho;
  double r = 0.0;   // SAV scalar, r^2 tracks C0 - E_m
  double C0 = 0.0;
  double t = 0.0;
  long step = 0;
};

struct LocalStepInfo {
  int iterations = 0;       // preconditioned BiCGSTAB iterations (both solves)
  double residual = 0.0;
  long undershoot_cells = 0;   // cells below -1e-10 after the step
  double min_value = 0.0;
  double modified_energy_before = 0.0;
  double modified_energy_after = 0.0;
};

// Fourth-order local equation d_t rho = -div(rho grad lap rho) - lap rho^m:
// sign-free spectral evaluation of div(rho grad lap rho) + lap(rho^m).
GridField local_operator(const GridField& rho, double m);

double local_free_energy(const GridField& rho, double m);    // (1/2) int |grad rho|^2 - E_m
double sav_modified_energy(const LocalState& s);              // (1/2) int |grad rho|^2 + r^2 - C0

LocalState init_local(const GridField& rho0, const LocalSolverConfig& cfg);
// One SAV step with lagged mobility max(rho, 0); the linear systems
// (I + dt div(M grad lap)) x = f are solved by BiCGSTAB preconditioned with the
// constant-mobility solve (I + dt kappa lap^2)^{-1}.
LocalStepInfo step_local(LocalState& state, const LocalSolverConfig& cfg);

struct LocalEnergySample {
  double t = 0.0;
  double free_energy = 0.0;
  double modified_energy = 0.0;
  double mass = 0.0;
  double min_value = 0.0;
};

struct LocalRun {
  std::vector<GridField> snapshots;
  std::vector<double> times;
  std::vector<LocalEnergySample> energy;  // every step
  long steps = 0;
  long energy_increases = 0;  // steps where the modified energy rose by more than 1e-10
  double max_energy_increase = 0.0;
  long undershoot_steps = 0;
  double max_mass_drift = 0.0;
  GridField final_state() const { return snapshots.back(); }
};

LocalRun run_local(const GridField& rho0, const LocalSolverConfig& cfg);

}  // namespace dpa
