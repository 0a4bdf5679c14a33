#include "dpa/pde_local.hpp"

#include "dpa/fields.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dpa {
class MobilityOperator;
}

namespace Eigen::internal {
template <>
struct traits<dpa::MobilityOperator> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace dpa {

namespace {

// Spectral building blocks for one grid.
struct Spectral {
  int dim, n;
  std::vector<ComplexVector> ik;  // derivative symbols
  Vector lap;                     // -|k|^2

  Spectral(int d, int n_) : dim(d), n(n_) {
    for (int a = 0; a < d; ++a) ik.push_back(derivative_symbol(d, n_, a));
    lap = laplacian_symbol(d, n_);
  }

  // div(M grad lap x)
  Vector mobility_term(const Vector& M, const Vector& x) const {
    const auto& ft = fourier(n, dim);
    ComplexVector xs = ft.forward(x);
    ComplexVector ls = xs.array() * lap.array().cast<Complex>();
    ComplexVector div = ComplexVector::Zero(xs.size());
    for (int a = 0; a < dim; ++a) {
      Vector g = ft.inverse_real(ComplexVector(ls.array() * ik[a].array()));
      g.array() *= M.array();
      div.array() += ft.forward(g).array() * ik[a].array();
    }
    return ft.inverse_real(div);
  }

  // div(M grad b)
  Vector flux_term(const Vector& M, const Vector& b) const {
    const auto& ft = fourier(n, dim);
    ComplexVector bs = ft.forward(b);
    ComplexVector div = ComplexVector::Zero(bs.size());
    for (int a = 0; a < dim; ++a) {
      Vector g = ft.inverse_real(ComplexVector(bs.array() * ik[a].array()));
      g.array() *= M.array();
      div.array() += ft.forward(g).array() * ik[a].array();
    }
    return ft.inverse_real(div);
  }

  // symbol of div(grad lap) with the skew derivative: -|k_g|^2 * (-|k|^2)
  Vector biharmonic() const {
    Vector kg2 = Vector::Zero(lap.size());
    for (int a = 0; a < dim; ++a) kg2 += ik[a].cwiseAbs2();
    return kg2.cwiseProduct(-lap);
  }
};

double dirichlet(const GridField& rho) {
  GridField l = spectral_laplacian(rho);
  return -0.5 * l.inner(rho);
}

double energy_nonneg(const GridField& rho, double m) {
  GridField c = rho;
  c.values() = c.values().cwiseMax(0.0);
  return energy_E_m(c, m);
}

}  // namespace

// x -> x + dt div(M grad lap x)
class MobilityOperator : public Eigen::EigenBase<MobilityOperator> {
 public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  MobilityOperator(const Spectral& sp, const Vector& M, double dt, double kappa)
      : sp_(&sp), M_(&M), dt_(dt), kappa_(kappa) {}

  Index rows() const { return M_->size(); }
  Index cols() const { return M_->size(); }

  template <typename Rhs>
  Eigen::Product<MobilityOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<MobilityOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }

  Vector apply(const Vector& x) const { return x + dt_ * sp_->mobility_term(*M_, x); }
  const Spectral& spectral() const { return *sp_; }
  double dt() const { return dt_; }
  double kappa() const { return kappa_; }

 private:
  const Spectral* sp_;
  const Vector* M_;
  double dt_, kappa_;
};

// (I + dt kappa lap^2)^{-1} in Fourier space.
class ConstantMobilityPreconditioner {
 public:
  ConstantMobilityPreconditioner() = default;
  template <typename MatType>
  ConstantMobilityPreconditioner& analyzePattern(const MatType&) { return *this; }
  template <typename MatType>
  ConstantMobilityPreconditioner& factorize(const MatType& op) { return compute(op); }
  template <typename MatType>
  ConstantMobilityPreconditioner& compute(const MatType& op) {
    const Spectral& sp = op.spectral();
    dim_ = sp.dim;
    n_ = sp.n;
    inv_ = (Vector::Ones(sp.lap.size()) + op.dt() * op.kappa() * sp.biharmonic()).cwiseInverse();
    return *this;
  }
  template <typename Rhs>
  Vector solve(const Rhs& b) const {
    const auto& ft = fourier(n_, dim_);
    ComplexVector s = ft.forward(Vector(b));
    s.array() *= inv_.array().cast<Complex>();
    return ft.inverse_real(s);
  }
  Eigen::ComputationInfo info() { return Eigen::Success; }

 private:
  int dim_ = 1, n_ = 1;
  Vector inv_;
};

}  // namespace dpa

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<dpa::MobilityOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<dpa::MobilityOperator, Rhs, generic_product_impl<dpa::MobilityOperator, Rhs>> {
  using Scalar = typename Product<dpa::MobilityOperator, Rhs>::Scalar;
  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const dpa::MobilityOperator& lhs, const Rhs& rhs, const Scalar& alpha) {
    dst.noalias() += alpha * lhs.apply(Eigen::VectorXd(rhs));
  }
};
}  // namespace Eigen::internal

namespace dpa {

LocalScheme parse_local_scheme(const std::string& s) {
  if (s == "lagged-implicit") return LocalScheme::LaggedImplicit;
  if (s == "stabilized") return LocalScheme::Stabilized;
  throw std::invalid_argument("unknown local scheme '" + s + "' (expected lagged-implicit or stabilized)");
}

std::string to_string(LocalScheme s) { return s == LocalScheme::Stabilized ? "stabilized" : "lagged-implicit"; }

GridField local_operator(const GridField& rho, double m) {
  Spectral sp(rho.dim(), rho.n());
  Vector a = sp.mobility_term(rho.values(), rho.values());
  GridField pm = rho;
  for (Index i = 0; i < pm.size(); ++i) pm[i] = std::pow(rho[i], m);
  GridField lpm = spectral_laplacian(pm);
  return GridField(rho.dim(), rho.n(), a + lpm.values());
}

double local_free_energy(const GridField& rho, double m) { return dirichlet(rho) - energy_nonneg(rho, m); }

double sav_modified_energy(const LocalState& s) { return dirichlet(s.rho) + s.r * s.r - s.C0; }

LocalState init_local(const GridField& rho0, const LocalSolverConfig& cfg) {
  if (rho0.values().minCoeff() < -1e-12) throw std::invalid_argument("init_local: negative density");
  LocalState s;
  s.rho = rho0;
  double Em = energy_nonneg(rho0, cfg.m);
  s.C0 = cfg.C0 > 0.0 ? cfg.C0 : 10.0 * Em + 1.0;
  if (!(s.C0 - Em > 0.0)) throw std::invalid_argument("init_local: C0 must exceed E_m[rho0]");
  s.r = std::sqrt(s.C0 - Em);
  return s;
}

LocalStepInfo step_local(LocalState& state, const LocalSolverConfig& cfg) {
  const GridField& rho = state.rho;
  const int d = rho.dim(), n = rho.n();
  const double dt = cfg.dt, m = cfg.m;
  Spectral sp(d, n);
  LocalStepInfo info;
  info.modified_energy_before = sav_modified_energy(state);

  Vector M = rho.values().cwiseMax(0.0);
  double kappa = cfg.kappa > 0.0 ? cfg.kappa : std::max(M.maxCoeff(), 1e-12);
  double Em = energy_nonneg(rho, m);
  double gap = state.C0 - Em;
  if (!(gap > 0.0)) {
    std::ostringstream os;
    os << "step_local: C0 - E_m = " << gap << " <= 0 at t=" << state.t << "; increase C0";
    throw std::runtime_error(os.str());
  }
  Vector U(M.size());
  for (Index i = 0; i < M.size(); ++i) U[i] = -(m / (m - 1.0)) * (m == 2.0 ? M[i] : std::pow(M[i], m - 1.0));
  Vector b = U / std::sqrt(gap);

  MobilityOperator A(sp, M, dt, kappa);
  Eigen::BiCGSTAB<MobilityOperator, ConstantMobilityPreconditioner> solver;
  solver.setTolerance(cfg.solver_tolerance);
  solver.setMaxIterations(cfg.max_iterations);
  solver.compute(A);

  auto solve = [&](const Vector& f, const Vector& guess) {
    Vector x = solver.solveWithGuess(f, guess);
    info.iterations += static_cast<int>(solver.iterations());
    info.residual = std::max(info.residual, solver.error());
    if (solver.info() != Eigen::Success && solver.error() > 1e3 * cfg.solver_tolerance) {
      std::ostringstream os;
      os << "step_local: linear solve stalled at t=" << state.t << " (relative residual " << solver.error() << ")";
      throw std::runtime_error(os.str());
    }
    return x;
  };

  ConstantMobilityPreconditioner P;
  P.compute(A);
  Vector rhs2 = dt * sp.flux_term(M, b);
  Vector rho1, rho2;
  if (cfg.scheme == LocalScheme::Stabilized) {
    // (I + dt kappa lap^2) x = f - dt (div(M grad lap) - kappa lap^2) rho^n
    const Vector& x0 = rho.values();
    Vector rem = x0 - A.apply(x0);  // -dt div(M grad lap rho^n)
    const auto& ft = fourier(n, d);
    ComplexVector xs = ft.forward(x0);
    xs.array() *= (dt * kappa * sp.biharmonic()).array().cast<Complex>();
    rho1 = P.solve(Vector(x0 + rem + ft.inverse_real(xs)));
    rho2 = P.solve(rhs2);
  } else {
    rho1 = solve(rho.values(), P.solve(rho.values()));
    rho2 = solve(rhs2, P.solve(rhs2));
  }

  double hd = rho.cell_volume();
  double num = state.r + 0.5 * b.dot(rho1 - rho.values()) * hd;
  double den = 1.0 - 0.5 * b.dot(rho2) * hd;
  double r_next = num / den;
  Vector next = rho1 + r_next * rho2;

  double sup = next.cwiseAbs().maxCoeff();
  if (!std::isfinite(sup) || sup > 1e3) {
    std::ostringstream os;
    os << "step_local: blow-up detected at t=" << state.t + dt << " (max |rho| = " << sup << ")";
    throw std::runtime_error(os.str());
  }
  state.rho.values() = next;
  state.r = r_next;
  state.t += dt;
  state.step += 1;
  info.min_value = next.minCoeff();
  info.undershoot_cells = (next.array() < -1e-10).count();
  info.modified_energy_after = sav_modified_energy(state);
  return info;
}

LocalRun run_local(const GridField& rho0, const LocalSolverConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("run_local: dt must be positive");
  if (cfg.T < 0.0) throw std::invalid_argument("run_local: T must be nonnegative");
  LocalState s = init_local(rho0, cfg);
  LocalRun run;
  const double mass0 = rho0.mass();
  auto sample = [&](const LocalState& st) {
    LocalEnergySample e;
    e.t = st.t;
    e.free_energy = local_free_energy(st.rho, cfg.m);
    e.modified_energy = sav_modified_energy(st);
    e.mass = st.rho.mass();
    e.min_value = st.rho.values().minCoeff();
    run.max_mass_drift = std::max(run.max_mass_drift, std::abs(e.mass - mass0));
    return e;
  };
  run.snapshots.push_back(s.rho);
  run.times.push_back(0.0);
  run.energy.push_back(sample(s));
  long steps = static_cast<long>(std::ceil(cfg.T / cfg.dt - 1e-9));
  for (long k = 0; k < steps; ++k) {
    LocalSolverConfig c = cfg;
    if (k == steps - 1) c.dt = cfg.T - s.t;  // land exactly on T
    if (!(c.dt > 0.0)) break;
    LocalStepInfo info = step_local(s, c);
    double inc = info.modified_energy_after - info.modified_energy_before;
    if (inc > 1e-10) ++run.energy_increases;
    run.max_energy_increase = std::max(run.max_energy_increase, inc);
    if (info.undershoot_cells > 0) ++run.undershoot_steps;
    run.energy.push_back(sample(s));
    ++run.steps;
    bool last = (k == steps - 1);
    if (last || (cfg.cadence > 0 && (k + 1) % cfg.cadence == 0)) {
      run.snapshots.push_back(s.rho);
      run.times.push_back(s.t);
    }
  }
  return run;
}

}  // namespace dpa
