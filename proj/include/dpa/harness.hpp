#pragma once

#include "dpa/fields.hpp"
#include "dpa/kernels.hpp"
#include "dpa/particles.hpp"
#include "dpa/pde_local.hpp"
#include "dpa/pde_nonlocal.hpp"
#include "dpa/scenario.hpp"
#include "dpa/transport.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dpa {

struct InvariantCheck {
  std::string name;
  bool passed = true;
  double value = 0.0;
  double tolerance = 0.0;
};

struct ParticleEnergySample {
  double t = 0.0;
  double discrete_energy = 0.0;  // m = 2 only (NaN otherwise)
  double kde_free_energy = 0.0;  // F_{eps,alpha}[rho^N * w~] on the grid
  double momentum = 0.0;         // |sum_i dX_i/dt|_inf at the start of the step
  double dt = 0.0;
};

struct ParticleRun {
  std::vector<ParticleState> snapshots;
  std::vector<ParticleEnergySample> energy;
  double dt = 0.0;
  double stable_dt = 0.0;
  long steps = 0;
  long dt_exceeded_steps = 0;
  double max_momentum = 0.0;
  const ParticleState& final_state() const { return snapshots.back(); }
};

// Kernel sets one scenario needs: particle tables at the kernel resolution, grid
// kernels on the grid_n lattice (viscosity by closed-form multiplier only).
struct ScenarioKernels {
  std::shared_ptr<const KernelSet> particle;
  std::shared_ptr<const KernelSet> grid;
};
ScenarioKernels build_kernels(const Scenario& s, bool need_particle_tables = true);

ParticleState initial_particles(const Scenario& s);
ParticleRun run_particles(const Scenario& s, const ScenarioKernels& k);
ParticleRun run_particles(const Scenario& s, const ScenarioKernels& k, const ParticleState& start, double T);
NonlocalRun run_nl_grid(const Scenario& s, const ScenarioKernels& k);
LocalRun run_local_grid(const Scenario& s);

// W2 between densities or samples; dispatches to the exact circle solver in 1D and
// the LP in higher dimension (grid measures coarsened to max_atoms).
double w2_grids(const GridField& a, const GridField& b, Index max_atoms);
double w2_particles_grid(const ParticleState& p, const GridField& g, Index max_atoms);

struct MetricRow {
  std::string quantity, a, b;
  double t = 0.0;
  double value = 0.0;
};

struct RunArtifacts {
  std::filesystem::path dir;  // empty: nothing written
  std::optional<ParticleRun> particles;
  std::optional<GridField> particle_kde;  // kde of the final particle state on grid_n
  std::optional<NonlocalRun> nonlocal;
  std::optional<LocalRun> local;
  std::vector<MetricRow> metrics;
  std::vector<InvariantCheck> invariants;
  std::map<std::string, double> seconds;
  bool invariants_hold() const;
};

// Runs every configured engine; with a non-empty out directory writes CSV/binary
// outputs, timing.json and manifest.json.
RunArtifacts run_scenario(const Scenario& s, const std::filesystem::path& out = {});

struct SweepRow {
  ParameterSchedule schedule;
  Index N = 0;
  double w2_particle_kde_local = -1.0;
  double w2_nl_local = -1.0;
  double w2_particle_kde_nl = -1.0;
  double w2_particle_kde_nl_smoothed = -1.0;  // kde against nl * w~ (same smoothing on both sides)
  double w2_particle_empirical_nl = -1.0;
};

// The schedule of each row is derived from eps through the base scenario's rule
// (p, q, c); explicit eps~, eps*, alpha of the base are not carried over.
std::vector<SweepRow> convergence_sweep(const Scenario& base, const std::vector<double>& eps_list,
                                        const std::filesystem::path& out = {});
std::vector<SweepRow> particle_count_sweep(const Scenario& base, const std::vector<Index>& counts,
                                           const std::filesystem::path& out = {});

struct ContractionSample {
  double t = 0.0;
  double w2 = 0.0;
  double envelope = 0.0;  // e^{|lambda| t} W2(0)
  double ratio = 0.0;     // w2 / envelope (0/0 -> 0)
};

struct ContractionReport {
  double lambda = 0.0;
  double delta = 0.0;
  double w2_initial = 0.0;
  std::vector<ContractionSample> samples;
  double max_ratio = 0.0;
  double offending_time = -1.0;  // first sample with ratio > 1.01, or -1
  bool passed() const { return offending_time < 0.0; }
};

// Twin particle runs from the scenario's initial state and from each particle
// displaced by delta * u_i, u_i uniform in [-1,1]^d drawn from the seed.
ContractionReport contraction_test(const Scenario& s, double delta, double t_max = 0.1,
                                   const std::filesystem::path& out = {});

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace dpa
