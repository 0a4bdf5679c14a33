#include "dpa/pde_nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpa {

namespace {

Index axis_stride(int dim, int n, int axis) {
  Index s = 1;
  for (int b = axis + 1; b < dim; ++b) s *= n;
  return s;
}

Index next_along(Index j, Index stride, int n) {
  Index c = (j / stride) % n;
  return c == n - 1 ? j - (n - 1) * stride : j + stride;
}

void require_density(const GridField& rho, const char* where) {
  rho.require_finite(where);
  if (rho.values().minCoeff() < -1e-12) {
    std::ostringstream os;
    os << where << ": density has negative cells (min " << rho.values().minCoeff() << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

std::vector<GridField> face_velocities(const GridField& rho, const KernelSet& kernels) {
  const int d = rho.dim(), n = rho.n();
  const auto& ft = fourier(n, d);
  ComplexVector ps = spectrum(potential_nl(rho, kernels));
  std::vector<GridField> faces;
  for (int a = 0; a < d; ++a) {
    ComplexVector ik = derivative_symbol(d, n, a);
    ComplexVector c(ps.size());
    for (Index j = 0; j < ps.size(); ++j) {
      double theta = M_PI * ft.frequency(j, a) / n;
      c[j] = ps[j] * ik[j] * Complex(std::cos(theta), std::sin(theta));
    }
    faces.push_back(from_spectrum(d, n, c));
  }
  return faces;
}

double cfl_limit(const std::vector<GridField>& faces) {
  double vmax = 0.0;
  for (const auto& f : faces) vmax = std::max(vmax, f.values().cwiseAbs().maxCoeff());
  if (vmax == 0.0) return std::numeric_limits<double>::infinity();
  return faces.front().spacing() / (2.0 * vmax);
}

GridField step_nonlocal(const GridField& rho, const std::vector<GridField>& faces, double dt, double nu) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_nonlocal: dt must be positive");
  if (nu < 0.0) throw std::invalid_argument("step_nonlocal: nu must be nonnegative");
  const int d = rho.dim(), n = rho.n();
  GridField out = rho;
  if (!faces.empty()) {
    double limit = cfl_limit(faces);
    if (dt > limit) {
      std::ostringstream os;
      os << "step_nonlocal: CFL violated, dt = " << dt << " exceeds admissible dt = " << limit;
      throw std::invalid_argument(os.str());
    }
    const double ratio = dt / rho.spacing();
    for (int a = 0; a < d; ++a) {
      const Index stride = axis_stride(d, n, a);
      const Vector& v = faces[a].values();
      for (Index j = 0; j < rho.size(); ++j) {
        Index k = next_along(j, stride, n);
        double vf = v[j];
        double flux = vf > 0.0 ? vf * rho[j] : vf * rho[k];
        out[j] -= ratio * flux;
        out[k] += ratio * flux;
      }
    }
  }
  if (nu > 0.0) {
    Vector lap = laplacian_symbol(d, n);
    Vector mult = (Vector::Ones(lap.size()) - dt * nu * lap).cwiseInverse();
    out = apply_multiplier(out, mult);
  }
  return out;
}

GridField step_nonlocal(const GridField& rho, const KernelSet& kernels, double dt, double nu, bool transport) {
  require_density(rho, "step_nonlocal");
  std::vector<GridField> faces;
  if (transport) faces = face_velocities(rho, kernels);
  return step_nonlocal(rho, faces, dt, nu);
}

NonlocalRun run_nonlocal(const GridField& rho0, const KernelSet& kernels, const NonlocalConfig& cfg) {
  require_density(rho0, "run_nonlocal");
  if (cfg.T < 0.0) throw std::invalid_argument("run_nonlocal: T must be nonnegative");
  if (!(cfg.cfl_fraction > 0.0 && cfg.cfl_fraction <= 1.0))
    throw std::invalid_argument("run_nonlocal: cfl_fraction must lie in (0, 1]");
  if (!cfg.transport && !(cfg.dt > 0.0))
    throw std::invalid_argument("run_nonlocal: a fixed dt is required without transport");
  const int d = rho0.dim();
  NonlocalRun run;
  run.nu = cfg.nu;
  GridField rho = rho0;
  const double mass0 = rho0.mass();
  double t = 0.0;
  run.snapshots.push_back(rho);
  run.times.push_back(0.0);
  run.min_value = rho.values().minCoeff();
  auto record = [&](double time) {
    if (!cfg.energy_trace) return;
    EnergyReport r = free_energy(rho, kernels, time);
    if (!run.energy.empty()) run.max_energy_increase = std::max(run.max_energy_increase, r.F_eps_alpha - run.energy.back().F_eps_alpha);
    run.max_entropy = run.energy.empty() ? r.entropy : std::max(run.max_entropy, r.entropy);
    run.energy.push_back(r);
  };
  record(0.0);
  const double eps_t = 1e-12 * std::max(1.0, cfg.T);
  while (t < cfg.T - eps_t) {
    std::vector<GridField> faces;
    if (cfg.transport) faces = face_velocities(rho, kernels);
    double dt;
    if (cfg.dt > 0.0) {
      dt = cfg.dt;
    } else {
      double vmax = 0.0;
      for (const auto& f : faces) vmax = std::max(vmax, f.values().cwiseAbs().maxCoeff());
      dt = vmax > 0.0 ? cfg.cfl_fraction * rho.spacing() / (2.0 * d * vmax) : cfg.T - t;
    }
    dt = std::min(dt, cfg.T - t);
    try {
      rho = step_nonlocal(rho, faces, dt, cfg.nu);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << e.what() << " at t=" << t;
      throw std::runtime_error(os.str());
    }
    t += dt;
    ++run.steps;
    run.step_sizes.push_back(dt);
    run.min_value = std::min(run.min_value, rho.values().minCoeff());
    run.max_mass_drift = std::max(run.max_mass_drift, std::abs(rho.mass() - mass0));
    record(t);
    bool last = !(t < cfg.T - eps_t);
    if (last || (cfg.cadence > 0 && run.steps % cfg.cadence == 0)) {
      run.snapshots.push_back(rho);
      run.times.push_back(t);
    }
  }
  if (run.snapshots.size() == 1) {  // T = 0
    run.snapshots.push_back(rho);
    run.times.push_back(t);
  }
  return run;
}

NuSequenceRun run_nonlocal(const GridField& rho0, const KernelSet& kernels, const NonlocalConfig& cfg,
                           const std::vector<double>& nu_sequence) {
  if (nu_sequence.empty()) throw std::invalid_argument("run_nonlocal: empty nu sequence");
  NuSequenceRun out;
  for (double nu : nu_sequence) {
    NonlocalConfig c = cfg;
    c.nu = nu;
    out.runs.push_back(run_nonlocal(rho0, kernels, c));
  }
  for (size_t k = 0; k + 1 < out.runs.size(); ++k)
    out.l2_differences.push_back(l2_distance(out.runs[k].final_state(), out.runs[k + 1].final_state()));
  return out;
}

double l2_distance(const GridField& a, const GridField& b) {
  a.require_same_grid(b, "l2_distance");
  return std::sqrt((a.values() - b.values()).squaredNorm() * a.cell_volume());
}

double l1_distance(const GridField& a, const GridField& b) {
  a.require_same_grid(b, "l1_distance");
  return (a.values() - b.values()).cwiseAbs().sum() * a.cell_volume();
}

}  // namespace dpa
