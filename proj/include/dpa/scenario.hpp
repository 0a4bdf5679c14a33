#pragma once

#include "dpa/grid.hpp"
#include "dpa/kernels.hpp"
#include "dpa/particles.hpp"
#include "dpa/pde_local.hpp"
#include "dpa/pde_nonlocal.hpp"
#include "dpa/schedule.hpp"

#include <string>
#include <vector>

namespace dpa {

// rho0 = 1 + sum_k (c_k cos(2 pi k.x) + s_k sin(2 pi k.x))  (uniform-plus-modes)
// rho0 = 1 + amplitude f / max|f|, f a seeded random trigonometric polynomial  (random-fourier)
// rho0 read from a GridField file, normalized to unit mass  (file)
struct DensitySpec {
  struct Mode {
    std::vector<int> k;
    double cos_coef = 0.0;
    double sin_coef = 0.0;
  };
  enum class Kind { UniformPlusModes, RandomFourier, File };
  Kind kind = Kind::UniformPlusModes;
  std::vector<Mode> modes;
  int max_mode = 4;         // random-fourier: |k|_inf <= max_mode
  double amplitude = 0.5;   // random-fourier: 0 <= amplitude < 1
  double decay = 2.0;       // random-fourier: coefficient std ~ (1 + |k|^2)^{-decay/2}
  std::string path;         // file
};

// Trigonometric polynomial behind a uniform-plus-modes or random-fourier spec
// (random coefficients drawn from the seed and pre-scaled).
std::vector<DensitySpec::Mode> density_modes(const DensitySpec& spec, int dim, unsigned long long seed);
GridField initial_density(const DensitySpec& spec, int dim, int n, unsigned long long seed);

struct ParticleConfig {
  Index N = 1000;
  Integrator integrator = Integrator::RK4;
  double dt = 0.0;            // > 0: fixed; 0: dt_fraction * stable_dt
  double dt_fraction = 0.5;
  int init_grid = 0;          // quantile initialization grid (0: 4096 in 1D, 512 in 2D, 64 in 3D)
  int cadence = 0;            // steps between snapshots (0: start and end)
};

struct Scenario {
  std::string name = "scenario";
  int dim = 1;
  double m = 2.0;
  unsigned long long seed = 1;
  double T = 0.01;
  DensitySpec initial;

  double epsilon = 0.1;
  ScheduleOverrides overrides;
  KernelOptions kernels;

  int grid_n = 256;            // nl-grid solver, kde sampling and grid metrics
  Index max_atoms = 2500;      // grid measures are block-coarsened to this many atoms for the LP (d >= 2)

  std::vector<std::string> engines;  // subset of particles, nl-grid, local-grid
  std::vector<std::string> metrics;  // subset of energy, w2
  ParticleConfig particles;
  NonlocalConfig nonlocal;
  LocalSolverConfig local;

  ParameterSchedule schedule() const;
  bool has_engine(const std::string& e) const;
  bool has_metric(const std::string& m) const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
// Canonical YAML of every resolved field; config_hash is its SHA-256.
std::string canonical_form(const Scenario& s);
std::string config_hash(const Scenario& s);
void validate_scenario(const Scenario& s);

}  // namespace dpa
