#include "dpa/particles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dpa {

namespace {

// Neumaier compensated accumulator; keeps row sums correctly rounded so that
// the pairwise antisymmetry survives the reduction.
struct Compensated {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::Euler;
  if (name == "heun") return Integrator::Heun;
  if (name == "rk4") return Integrator::RK4;
  throw std::invalid_argument("unknown integrator '" + name + "'");
}

std::string to_string(Integrator method) {
  switch (method) {
    case Integrator::Euler: return "euler";
    case Integrator::Heun: return "heun";
    case Integrator::RK4: return "rk4";
  }
  return "?";
}

ParticleSystem::ParticleSystem(std::shared_ptr<const KernelSet> kernels) : kernels_(std::move(kernels)) {
  if (!kernels_) throw std::invalid_argument("ParticleSystem: missing kernel tables");
  const auto& k = *kernels_;
  if (k.viscosity_active() && !k.viscosity())
    throw std::invalid_argument(
        "ParticleSystem: viscosity term needs tabulated R_alpha (alpha > 0 resolvable on the table); "
        "set appendix_a_mode to drop it");
  lipschitz_ = lipschitz_bound();
}

double ParticleSystem::lipschitz_bound() const {
  if (lipschitz_ > 0.0) return lipschitz_;
  const auto& k = *kernels_;
  double m = this->m();
  double L = k.W_eps().sup_hessian_norm();
  if (m == 2.0) {
    L += 2.0 * k.aggregation().sup_hessian_norm();
  } else {
    const auto& wt = k.omega_tilde().table();
    double w = wt.sup_abs(), g = wt.sup_gradient_norm(), H = wt.sup_hessian_norm();
    L += m / (m - 1.0) * (H * std::pow(w, m - 1.0) + (m - 1.0) * g * g * std::pow(w, m - 2.0));
  }
  if (k.viscosity()) L += k.schedule().epsilon_star * k.viscosity()->table().sup_hessian_norm();
  return L;
}

ForceField ParticleSystem::compute_forces(const ParticleState& state) const {
  const auto& k = *kernels_;
  const int d = dim();
  if (state.dim() != d) throw std::invalid_argument("compute_forces: dimension mismatch");
  const Index N = state.count();
  const Matrix& X = state.positions;
  const KernelTable& W = k.W_eps();
  const KernelTable& A = k.aggregation();
  const KernelTable& Wt = k.omega_tilde().table();
  const KernelTable* R = k.viscosity() ? &k.viscosity()->table() : nullptr;
  const int n = W.n();
  const double m = this->m();
  const bool quadratic = (m == 2.0);
  const double invN = 1.0 / static_cast<double>(N);

  ForceField f;
  f.interaction = Matrix::Zero(d, N);
  f.aggregation = Matrix::Zero(d, N);
  f.viscosity = Matrix::Zero(d, N);

  // rho~_j^{m-1} for the general-m aggregation term
  Vector density_weight;
  if (!quadratic) {
    density_weight.resize(N);
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < N; ++j) {
      HermiteStencil st(d, n);
      Compensated acc;
      double disp[3];
      for (Index l = 0; l < N; ++l) {
        for (int a = 0; a < d; ++a) disp[a] = min_image_coordinate(X(a, j) - X(a, l));
        st.locate(disp);
        acc.add(st.value(Wt));
      }
      density_weight[j] = std::pow(acc.value() * invN, m - 1.0);
    }
  }

#pragma omp parallel for schedule(static)
  for (Index i = 0; i < N; ++i) {
    HermiteStencil st(d, n);
    Compensated sw[3], sa[3], sr[3];
    double disp[3], g[3];
    for (Index j = 0; j < N; ++j) {
      for (int a = 0; a < d; ++a) disp[a] = min_image_coordinate(X(a, i) - X(a, j));
      st.locate(disp);
      st.gradient(W, g);
      for (int a = 0; a < d; ++a) sw[a].add(g[a]);
      st.gradient(quadratic ? A : Wt, g);
      if (quadratic)
        for (int a = 0; a < d; ++a) sa[a].add(g[a]);
      else
        for (int a = 0; a < d; ++a) sa[a].add(g[a] * density_weight[j]);
      if (R) {
        st.gradient(*R, g);
        for (int a = 0; a < d; ++a) sr[a].add(g[a]);
      }
    }
    const double agg = quadratic ? 2.0 : m / (m - 1.0);
    for (int a = 0; a < d; ++a) {
      f.interaction(a, i) = -sw[a].value() * invN;
      f.aggregation(a, i) = agg * sa[a].value() * invN;
      if (R) f.viscosity(a, i) = -k.schedule().epsilon_star * sr[a].value() * invN;
    }
  }
  f.total = f.interaction + f.aggregation + f.viscosity;
  return f;
}

Matrix ParticleSystem::velocity(const Matrix& positions) const {
  ParticleState s;
  s.positions = positions;
  return compute_forces(s).total;
}

double ParticleSystem::discrete_energy(const ParticleState& state) const {
  if (m() != 2.0) throw std::invalid_argument("discrete_energy: only defined for m = 2");
  const KernelTable& K = kernels_->pair_potential();
  const int d = dim();
  const Index N = state.count();
  const Matrix& X = state.positions;
  Vector rows(N);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < N; ++i) {
    HermiteStencil st(d, K.n());
    Compensated acc;
    double disp[3];
    for (Index j = 0; j < N; ++j) {
      for (int a = 0; a < d; ++a) disp[a] = min_image_coordinate(X(a, i) - X(a, j));
      st.locate(disp);
      acc.add(st.value(K));
    }
    rows[i] = acc.value();
  }
  Compensated total;
  for (Index i = 0; i < N; ++i) total.add(rows[i]);
  double invN = 1.0 / static_cast<double>(N);
  return 0.5 * total.value() * invN * invN;
}

StepResult ParticleSystem::step(const ParticleState& state, double dt, Integrator method) const {
  StepResult out;
  out.dt_exceeded = std::abs(dt) > stable_dt();
  const Matrix& X = state.positions;
  Matrix next;
  auto shifted = [](const Matrix& base, double h, const Matrix& k) {
    Matrix y = base + h * k;
    wrap_in_place(y);
    return y;
  };
  switch (method) {
    case Integrator::Euler:
      next = X + dt * velocity(X);
      break;
    case Integrator::Heun: {
      Matrix k1 = velocity(X);
      Matrix k2 = velocity(shifted(X, dt, k1));
      next = X + 0.5 * dt * (k1 + k2);
      break;
    }
    case Integrator::RK4: {
      Matrix k1 = velocity(X);
      Matrix k2 = velocity(shifted(X, 0.5 * dt, k1));
      Matrix k3 = velocity(shifted(X, 0.5 * dt, k2));
      Matrix k4 = velocity(shifted(X, dt, k3));
      next = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      break;
    }
  }
  wrap_in_place(next);
  out.state.positions = std::move(next);
  out.state.time = state.time + dt;
  return out;
}

// ------------------------------------------------------------ initialization

namespace {

// Segments of the piecewise-constant 1D density starting at x = 0: node j is the
// center of cell j, so cell 0 is split between [0, h/2) and [1 - h/2, 1).
struct Segment {
  double x0, length, density;
  int cell;
};

std::vector<Segment> segments_1d(const std::vector<double>& dens) {
  const int n = static_cast<int>(dens.size());
  const double h = 1.0 / n;
  std::vector<Segment> segs;
  segs.push_back({0.0, 0.5 * h, dens[0], 0});
  for (int j = 1; j < n; ++j) segs.push_back({(j - 0.5) * h, h, dens[j], j});
  segs.push_back({1.0 - 0.5 * h, 0.5 * h, dens[0], 0});
  return segs;
}

// Position of cumulative mass q (0 <= q <= total) along the segment list.
double quantile(const std::vector<Segment>& segs, double q) {
  double acc = 0.0;
  for (const auto& s : segs) {
    double m = s.density * s.length;
    if (m > 0.0 && q <= acc + m) return s.x0 + (q - acc) / s.density;
    acc += m;
  }
  // q beyond the total by rounding: last point with positive density
  for (auto it = segs.rbegin(); it != segs.rend(); ++it)
    if (it->density > 0.0) return it->x0 + it->length;
  return 0.0;
}

// Places `count` points on an r-dimensional grid density (flat, last axis fastest)
// at the mass medians of equal-mass cells; returns r x count.
Matrix place(const std::vector<double>& dens, int r, int n, Index count) {
  Matrix out(r, count);
  const double h = 1.0 / n;
  if (r == 1) {
    auto segs = segments_1d(dens);
    double total = 0.0;
    for (const auto& s : segs) total += s.density * s.length;
    for (Index i = 0; i < count; ++i) out(0, i) = wrap_coordinate(quantile(segs, (i + 0.5) / count * total));
    return out;
  }
  Index stride = 1;
  for (int a = 1; a < r; ++a) stride *= n;
  std::vector<double> marginal(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (Index k = 0; k < stride; ++k) s += dens[j * stride + k];
    marginal[j] = s * std::pow(h, r - 1);
  }
  auto segs = segments_1d(marginal);
  double total = 0.0;
  for (const auto& s : segs) total += s.density * s.length;

  Index slabs = std::max<Index>(1, std::min<Index>(count, static_cast<Index>(std::ceil(std::pow(double(count), 1.0 / r) - 1e-9))));
  Index base = count / slabs, extra = count % slabs;
  Index done = 0;
  for (Index s = 0; s < slabs; ++s) {
    Index c = base + (s < extra ? 1 : 0);
    double lo = double(done) / count * total, hi = double(done + c) / count * total;
    double x0 = wrap_coordinate(quantile(segs, 0.5 * (lo + hi)));
    // fraction of each cell's marginal mass inside [lo, hi]
    std::vector<double> sub(stride, 0.0);
    double acc = 0.0;
    for (const auto& sg : segs) {
      double m = sg.density * sg.length;
      double a = std::max(acc, lo), b = std::min(acc + m, hi);
      if (m > 0.0 && b > a) {
        double w = (b - a) / m * sg.length;  // x-length of the overlap
        for (Index k = 0; k < stride; ++k) sub[k] += w * dens[sg.cell * stride + k];
      }
      acc += m;
    }
    Matrix rest = place(sub, r - 1, n, c);
    for (Index i = 0; i < c; ++i) {
      out(0, done + i) = x0;
      out.block(1, done + i, r - 1, 1) = rest.col(i);
    }
    done += c;
  }
  return out;
}

}  // namespace

ParticleState init_quantile(const GridField& rho0, Index N) {
  if (N <= 0) throw std::invalid_argument("init_quantile: N must be positive");
  if (rho0.values().minCoeff() < 0.0) throw std::invalid_argument("init_quantile: density has negative mass cells");
  if (!(rho0.mass() > 0.0)) throw std::invalid_argument("init_quantile: density has no mass");
  std::vector<double> dens(rho0.values().data(), rho0.values().data() + rho0.size());
  ParticleState s;
  s.positions = place(dens, rho0.dim(), rho0.n(), N);
  s.time = 0.0;
  return s;
}

void write_snapshot_header(std::ostream& out, int dim) {
  out << "t,particle_id";
  for (int a = 0; a < dim; ++a) out << ",x_" << (a + 1);
  out << '\n';
}

void write_snapshot(std::ostream& out, const ParticleState& state) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Index i = 0; i < state.count(); ++i) {
    os << state.time << ',' << i;
    for (int a = 0; a < state.dim(); ++a) os << ',' << state.positions(a, i);
    os << '\n';
  }
  out << os.str();
}

ParticleState read_last_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  int dim = -2;
  for (char c : line) dim += (c == ',');
  dim += 1;
  if (dim < 1) throw std::runtime_error("bad snapshot header in " + path);
  double last_t = -1.0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals[0] != last_t) {
      rows.clear();
      last_t = vals[0];
    }
    rows.push_back(vals);
  }
  ParticleState s;
  s.time = last_t;
  s.positions.resize(dim, static_cast<Index>(rows.size()));
  for (Index i = 0; i < s.positions.cols(); ++i)
    for (int a = 0; a < dim; ++a) s.positions(a, i) = rows[i][2 + a];
  return s;
}

}  // namespace dpa
