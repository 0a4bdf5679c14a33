#include "dpa/fields.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dpa {

namespace {

void require_kernel_grid(const GridField& f, const KernelTable& k, const char* where) {
  if (f.dim() != k.dim() || f.n() != k.n()) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

ComplexVector real_symbol(const Vector& v) { return v.cast<Complex>(); }

}  // namespace

GridField periodic_convolve(const GridField& f, const KernelTable& kernel) {
  require_kernel_grid(f, kernel, "periodic_convolve");
  ComplexVector s = spectrum(f);
  s.array() *= kernel.spectrum().array();
  return from_spectrum(f.dim(), f.n(), s);
}

GridField apply_multiplier(const GridField& f, const Vector& symbol) {
  if (symbol.size() != f.size()) throw std::invalid_argument("apply_multiplier: grid mismatch");
  ComplexVector s = spectrum(f);
  s.array() *= symbol.array().cast<Complex>();
  return from_spectrum(f.dim(), f.n(), s);
}

GridField B_eps(const GridField& f, const KernelTable& omega, double epsilon) {
  if (epsilon == 0.0) throw std::invalid_argument("B_eps: epsilon must be nonzero");
  GridField g = periodic_convolve(f, omega);
  g.values() = (f.values() - g.values()) / (epsilon * epsilon);
  return g;
}

double dissipation_D_eps(const GridField& f, const KernelTable& omega, double epsilon) {
  require_kernel_grid(f, omega, "dissipation_D_eps");
  const int d = f.dim(), n = f.n();
  const Vector& w = omega.values();
  const Vector& v = f.values();
  double total = 0.0;
  for (Index o = 0; o < w.size(); ++o) {
    if (w[o] == 0.0) continue;
    auto off = f.multi_index(o);
    double s = 0.0;
    for (Index x = 0; x < v.size(); ++x) {
      auto idx = f.multi_index(x);
      for (int a = 0; a < d; ++a) idx[a] = (idx[a] - off[a] + n) % n;
      double diff = v[x] - v[f.flat_index(idx)];
      s += diff * diff;
    }
    total += w[o] * s;
  }
  double hd = f.cell_volume();
  return total * hd * hd / (epsilon * epsilon);
}

double energy_E_m(const GridField& f, double m) {
  if (!(m > 1.0)) throw std::invalid_argument("energy_E_m: need m > 1");
  if (f.values().minCoeff() < -1e-12) throw std::invalid_argument("energy_E_m: negative cells below -1e-12");
  double s = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    double v = std::max(f[i], 0.0);
    s += (m == 2.0) ? v * v : std::pow(v, m);
  }
  return s * f.cell_volume() / (m - 1.0);
}

double entropy(const GridField& rho) {
  double s = 0.0;
  for (Index i = 0; i < rho.size(); ++i) {
    double v = rho[i];
    if (v < 1e-300) continue;
    s += v * (std::log(v) - 1.0);
  }
  return s * rho.cell_volume();
}

double EnergyReport::identity_residual() const {
  return std::abs(F_eps_alpha - (0.25 * D_smoothed - E_m_smoothed + viscosity_weight * E2_half_viscous));
}

Vector circular_mean(const GridField& rho) {
  Vector mean(rho.dim());
  for (int a = 0; a < rho.dim(); ++a) {
    double c = 0.0, s = 0.0;
    for (Index i = 0; i < rho.size(); ++i) {
      double x = rho.node(i)[a];
      c += rho[i] * std::cos(2.0 * M_PI * x);
      s += rho[i] * std::sin(2.0 * M_PI * x);
    }
    mean[a] = wrap_coordinate(std::atan2(s, c) / (2.0 * M_PI));
  }
  return mean;
}

EnergyReport free_energy(const GridField& rho, const KernelSet& kernels, double t) {
  const auto& s = kernels.schedule();
  EnergyReport r;
  r.t = t;
  GridField smooth = periodic_convolve(rho, kernels.omega_tilde().table());
  r.D_smoothed = dissipation_D_eps(smooth, kernels.omega().table(), s.epsilon);
  r.E_m_smoothed = energy_E_m(smooth, s.m);
  if (kernels.viscosity_active()) {
    GridField half = apply_multiplier(rho, kernels.viscosity_multiplier(rho.n(), true));
    r.E2_half_viscous = energy_E_m(half, 2.0);
    r.viscosity_weight = 0.5 * s.epsilon_star;
  }
  r.F_eps_alpha = 0.25 * r.D_smoothed - r.E_m_smoothed + r.viscosity_weight * r.E2_half_viscous;
  r.entropy = entropy(rho);
  r.mean_position = circular_mean(rho);
  auto v = velocity_field_nl(rho, kernels);
  double diss = 0.0;
  for (Index i = 0; i < rho.size(); ++i) {
    double v2 = 0.0;
    for (const auto& c : v) v2 += c[i] * c[i];
    diss += rho[i] * v2;
  }
  r.step_dissipation = diss * rho.cell_volume();
  return r;
}

double quadratic_energy(const GridField& rho, const KernelSet& kernels) {
  const auto& s = kernels.schedule();
  Vector A = kernels.omega_tilde().table().spectrum().real().cwiseAbs2();
  Vector K = kernels.W_eps().spectrum().real() - 2.0 * A;
  if (kernels.viscosity_active()) K += s.epsilon_star * kernels.viscosity_multiplier(rho.n(), false);
  GridField Kr = apply_multiplier(rho, K);
  return 0.5 * Kr.inner(rho);
}

GridField kde_density(const ParticleState& state, const KernelTable& omega_tilde, int n) {
  const int d = state.dim();
  if (omega_tilde.dim() != d) throw std::invalid_argument("kde_density: dimension mismatch");
  if (state.count() < 1) throw std::invalid_argument("kde_density: no particles");
  GridField out(d, n);
  const Index N = state.count();
  const double invN = 1.0 / static_cast<double>(N);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < out.size(); ++i) {
    HermiteStencil st(d, omega_tilde.n());
    Vector x = out.node(i);
    double disp[3];
    double s = 0.0;
    for (Index p = 0; p < N; ++p) {
      for (int a = 0; a < d; ++a) disp[a] = min_image_coordinate(x[a] - state.positions(a, p));
      st.locate(disp);
      s += st.value(omega_tilde);
    }
    out[i] = s * invN;
  }
  return out;
}

GridField potential_nl(const GridField& rho, const KernelSet& kernels) {
  const auto& s = kernels.schedule();
  const KernelTable& wt = kernels.omega_tilde().table();
  require_kernel_grid(rho, wt, "potential_nl");
  const double m = s.m;
  ComplexVector r = spectrum(rho);
  ComplexVector phi = -(kernels.W_eps().spectrum().array() * r.array()).matrix();
  if (m == 2.0) {
    phi.array() += 2.0 * (kernels.aggregation().spectrum().array() * r.array());
  } else {
    ComplexVector sm = wt.spectrum().array() * r.array();
    GridField smooth = from_spectrum(rho.dim(), rho.n(), sm);
    for (Index i = 0; i < smooth.size(); ++i) smooth[i] = std::pow(std::max(smooth[i], 0.0), m - 1.0);
    phi.array() += (m / (m - 1.0)) * (wt.spectrum().array() * spectrum(smooth).array());
  }
  if (kernels.viscosity_active()) {
    Vector R = kernels.viscosity_multiplier(rho.n(), false);
    phi.array() -= s.epsilon_star * (real_symbol(R).array() * r.array());
  }
  return from_spectrum(rho.dim(), rho.n(), phi);
}

std::vector<GridField> velocity_field_nl(const GridField& rho, const KernelSet& kernels) {
  GridField phi = potential_nl(rho, kernels);
  ComplexVector ps = spectrum(phi);
  std::vector<GridField> v;
  for (int a = 0; a < rho.dim(); ++a) {
    ComplexVector c = ps.array() * derivative_symbol(rho.dim(), rho.n(), a).array();
    v.push_back(from_spectrum(rho.dim(), rho.n(), c));
  }
  return v;
}

void write_energy_header(std::ostream& out, int dim) {
  out << "t,F_eps_alpha,D_eps_smoothed,E_m_smoothed,E2_half_viscous,entropy";
  for (int a = 0; a < dim; ++a) out << ",mean_" << (a + 1);
  out << ",step_dissipation\n";
}

void write_energy_row(std::ostream& out, const EnergyReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.t << ',' << r.F_eps_alpha << ',' << r.D_smoothed << ',' << r.E_m_smoothed << ','
     << r.E2_half_viscous << ',' << r.entropy;
  for (Index a = 0; a < r.mean_position.size(); ++a) os << ',' << r.mean_position[a];
  os << ',' << r.step_dissipation << '\n';
  out << os.str();
}

}  // namespace dpa
