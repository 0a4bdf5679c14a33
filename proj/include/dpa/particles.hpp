#pragma once

#include "dpa/grid.hpp"
#include "dpa/kernels.hpp"

#include <memory>
#include <string>

namespace dpa {

// N particles of weight 1/N; positions stored column-wise (d x N), each entry in [0,1).
struct ParticleState {
  Matrix positions;
  double time = 0.0;

  Index count() const { return positions.cols(); }
  int dim() const { return static_cast<int>(positions.rows()); }
  double weight() const { return 1.0 / static_cast<double>(count()); }
};

struct ForceField {
  Matrix interaction;  // -(1/N) sum grad W_eps
  Matrix aggregation;  // backward-diffusion term
  Matrix viscosity;    // -eps* (1/N) sum grad R_alpha (zero when dropped)
  Matrix total;
};

enum class Integrator { Euler, Heun, RK4 };
Integrator parse_integrator(const std::string& name);
std::string to_string(Integrator method);

struct StepResult {
  ParticleState state;
  bool dt_exceeded = false;  // |dt| above stable_dt; advisory only
};

class ParticleSystem {
 public:
  explicit ParticleSystem(std::shared_ptr<const KernelSet> kernels);

  const KernelSet& kernels() const { return *kernels_; }
  double m() const { return kernels_->schedule().m; }
  int dim() const { return kernels_->dim(); }

  ForceField compute_forces(const ParticleState& state) const;
  // Total velocity only (the integrators' right-hand side).
  Matrix velocity(const Matrix& positions) const;

  // Discrete m = 2 energy (1/(2N^2)) sum_ij K(X_i - X_j) = F[rho^N] with K the pair potential.
  double discrete_energy(const ParticleState& state) const;

  // Lipschitz bound of the velocity field built from kernel-table sup norms.
  double lipschitz_bound() const;
  double stable_dt(double c_stab = 0.5) const { return c_stab / lipschitz_bound(); }

  StepResult step(const ParticleState& state, double dt, Integrator method) const;

 private:
  std::shared_ptr<const KernelSet> kernels_;
  double lipschitz_ = -1.0;
};

// N particles at the mass medians of N equal-mass cells of rho0.
ParticleState init_quantile(const GridField& rho0, Index N);

// Positions snapshot rows "t,particle_id,x_1..x_d" appended to an open CSV stream.
void write_snapshot_header(std::ostream& out, int dim);
void write_snapshot(std::ostream& out, const ParticleState& state);
// Reads the last snapshot time of a snapshot CSV.
ParticleState read_last_snapshot(const std::string& path);

}  // namespace dpa
