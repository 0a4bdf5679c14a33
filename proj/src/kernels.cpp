#include "dpa/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dpa {

namespace {

Index grid_size(int dim, int n) {
  Index s = 1;
  for (int a = 0; a < dim; ++a) s *= n;
  return s;
}

Index wrapped_flat(int dim, int n, const int* j) {
  Index flat = 0;
  for (int a = 0; a < dim; ++a) flat = flat * n + ((j[a] % n) + n) % n;
  return flat;
}

// Calls fn(j) for every integer offset j in [-J, J]^dim.
void for_each_offset(int dim, int J, const std::function<void(const int*)>& fn) {
  int j[3] = {-J, -J, -J};
  while (true) {
    fn(j);
    int a = dim - 1;
    while (a >= 0 && j[a] == J) {
      j[a] = -J;
      --a;
    }
    if (a < 0) return;
    ++j[a];
  }
}

int popcount(unsigned v) { return __builtin_popcount(v); }

// Radial profile g(s), s = |x|^2, and its first three s-derivatives.
struct Radial {
  MollifierKind kind;
  double width;

  double cutoff2() const {
    return kind == MollifierKind::CompactBump ? width * width : 25.0 * width * width;
  }

  void derivatives(double s, double* g) const {
    g[0] = g[1] = g[2] = g[3] = 0.0;
    if (kind == MollifierKind::CompactBump) {
      double R2 = width * width;
      if (s >= R2) return;
      double u = 1.0 - s / R2;
      double G = std::exp(-1.0 / u);
      double iu = 1.0 / u, iu2 = iu * iu;
      double G1 = G * iu2;
      double G2 = G * (iu2 * iu2 - 2.0 * iu2 * iu);
      double G3 = G * (iu2 * iu2 * iu2 - 6.0 * iu2 * iu2 * iu + 6.0 * iu2 * iu2);
      double c = -1.0 / R2;
      g[0] = G;
      g[1] = c * G1;
      g[2] = c * c * G2;
      g[3] = c * c * c * G3;
    } else {
      double s2 = width * width;
      if (s > 25.0 * s2) return;
      double G = std::exp(-s / (2.0 * s2));
      double c = -1.0 / (2.0 * s2);
      g[0] = G;
      g[1] = c * G;
      g[2] = c * c * G;
      g[3] = c * c * c * G;
    }
  }

  double value(double s) const {
    double g[4];
    derivatives(s, g);
    return g[0];
  }
};

double hermite_basis(int corner, int order, double t) {
  double t2 = t * t, t3 = t2 * t;
  if (corner == 0) return order == 0 ? 2 * t3 - 3 * t2 + 1 : t3 - 2 * t2 + t;
  return order == 0 ? -2 * t3 + 3 * t2 : t3 - t2;
}

double hermite_basis_dt(int corner, int order, double t) {
  double t2 = t * t;
  if (corner == 0) return order == 0 ? 6 * t2 - 6 * t : 3 * t2 - 4 * t + 1;
  return order == 0 ? -6 * t2 + 6 * t : 3 * t2 - 2 * t;
}

AdmissibilityCheck make_check(std::string name, double measured, double tol) {
  return AdmissibilityCheck{std::move(name), measured, tol, measured <= tol};
}

// Mirror index of flat along one axis: j -> -j mod n.
Index mirror_flat(int dim, int n, Index flat, int axis) {
  int idx[3] = {0, 0, 0};
  Index f = flat;
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(f % n);
    f /= n;
  }
  idx[axis] = (n - idx[axis]) % n;
  return wrapped_flat(dim, n, idx);
}

Index mirror_all(int dim, int n, Index flat) {
  for (int a = 0; a < dim; ++a) flat = mirror_flat(dim, n, flat, a);
  return flat;
}

void symmetrize_axis(Vector& v, int dim, int n, int axis, bool odd) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    double other = v[mirror_flat(dim, n, i, axis)];
    out[i] = odd ? 0.5 * (v[i] - other) : 0.5 * (v[i] + other);
  }
  v = std::move(out);
}

}  // namespace

MollifierKind parse_mollifier_kind(const std::string& name) {
  if (name == "compact-bump" || name == "bump") return MollifierKind::CompactBump;
  if (name == "truncated-gaussian" || name == "gaussian") return MollifierKind::TruncatedGaussian;
  throw std::invalid_argument("unknown mollifier kind '" + name + "'");
}

std::string to_string(MollifierKind kind) {
  return kind == MollifierKind::CompactBump ? "compact-bump" : "truncated-gaussian";
}

MomentConvention parse_moment_convention(const std::string& name) {
  if (name == "per-axis" || name == "dimension-uniform") return MomentConvention::PerAxis;
  if (name == "literal") return MomentConvention::Literal;
  throw std::invalid_argument("unknown moment convention '" + name + "'");
}

// ---------------------------------------------------------------- KernelTable

KernelTable::KernelTable(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3 || n < 2) throw std::invalid_argument("KernelTable: bad grid");
  Index size = grid_size(dim, n);
  partials_.assign(1u << dim, Vector::Zero(size));
  hessian_.assign(dim * dim, Vector::Zero(size));
  spectrum_ = ComplexVector::Zero(size);
}

KernelTable KernelTable::from_spectrum(int dim, int n, const ComplexVector& spec) {
  KernelTable t(dim, n);
  const auto& ft = fourier(n, dim);
  if (spec.size() != ft.size()) throw std::invalid_argument("from_spectrum: size mismatch");
  ComplexVector s = spec.real().cast<Complex>();
  double scale = static_cast<double>(ft.size());
  auto synth = [&](const std::function<Complex(Index)>& symbol) {
    ComplexVector w(ft.size());
    for (Index i = 0; i < ft.size(); ++i) w[i] = s[i] * symbol(i);
    return Vector(ft.inverse_real(w) * scale);
  };
  auto ik = [&](Index i, int a) -> Complex {
    if (ft.is_nyquist(i, a)) return 0.0;
    return Complex(0.0, 2.0 * M_PI * ft.frequency(i, a));
  };
  for (unsigned mask = 0; mask < (1u << dim); ++mask) {
    t.partials_[mask] = synth([&](Index i) {
      Complex c = 1.0;
      for (int a = 0; a < dim; ++a)
        if (mask & (1u << a)) c *= ik(i, a);
      return c;
    });
  }
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) {
      if (a == b) {
        t.hessian(a, a) = synth([&](Index i) {
          double k = 2.0 * M_PI * ft.frequency(i, a);
          return Complex(-k * k, 0.0);
        });
      } else if (a < b) {
        t.hessian(a, b) = t.partials_[(1u << a) | (1u << b)];
      }
    }
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < a; ++b) t.hessian(a, b) = t.hessian(b, a);
  t.spectrum_ = s;
  t.symmetrize();
  return t;
}

void KernelTable::refresh_spectrum() {
  const auto& ft = fourier(n_, dim_);
  spectrum_ = ft.forward(values()) * std::pow(spacing(), dim_);
}

void KernelTable::symmetrize() {
  for (unsigned mask = 0; mask < partials_.size(); ++mask)
    for (int a = 0; a < dim_; ++a) symmetrize_axis(partials_[mask], dim_, n_, a, mask & (1u << a));
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b)
      for (int c = 0; c < dim_; ++c) {
        bool odd = (a != b) && (c == a || c == b);
        symmetrize_axis(hessian(a, b), dim_, n_, c, odd);
      }
}

KernelTable KernelTable::scaled(double factor) const {
  KernelTable t = *this;
  for (auto& p : t.partials_) p *= factor;
  for (auto& h : t.hessian_) h *= factor;
  t.spectrum_ *= factor;
  return t;
}

double KernelTable::value(const double* disp) const {
  HermiteStencil st(dim_, n_);
  st.locate(disp);
  return st.value(*this);
}

void KernelTable::gradient(const double* disp, double* grad) const {
  HermiteStencil st(dim_, n_);
  st.locate(disp);
  st.gradient(*this, grad);
}

void KernelTable::value_and_gradient(const double* disp, double* val, double* grad) const {
  HermiteStencil st(dim_, n_);
  st.locate(disp);
  *val = st.value(*this);
  st.gradient(*this, grad);
}

double KernelTable::sup_abs() const { return values().cwiseAbs().maxCoeff(); }

double KernelTable::sup_gradient_norm() const {
  Vector g2 = Vector::Zero(size());
  for (int a = 0; a < dim_; ++a) g2 += partials_[1u << a].cwiseAbs2();
  return std::sqrt(g2.maxCoeff());
}

double KernelTable::sup_hessian_norm() const {
  double best = 0.0;
  Matrix H(dim_, dim_);
  for (Index i = 0; i < size(); ++i) {
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) H(a, b) = hessian(a, b)[i];
    double nrm = dim_ == 1 ? std::abs(H(0, 0))
                           : Eigen::SelfAdjointEigenSolver<Matrix>(H, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .cwiseAbs()
                                 .maxCoeff();
    best = std::max(best, nrm);
  }
  return best;
}

double KernelTable::sup_hessian_negative_part() const {
  double best = 0.0;
  Matrix H(dim_, dim_);
  for (Index i = 0; i < size(); ++i) {
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) H(a, b) = hessian(a, b)[i];
    double lo = dim_ == 1 ? H(0, 0)
                          : Eigen::SelfAdjointEigenSolver<Matrix>(H, Eigen::EigenvaluesOnly).eigenvalues()[0];
    best = std::max(best, -lo);
  }
  return best;
}

// ------------------------------------------------------------- HermiteStencil

void HermiteStencil::locate(const double* disp) {
  double B[3][2][2], D[3][2][2], sign[3];
  int i0[3];
  for (int a = 0; a < dim_; ++a) {
    double y = std::abs(disp[a]);
    sign[a] = disp[a] < 0.0 ? -1.0 : 1.0;
    double u = y * n_;
    int i = static_cast<int>(u);
    if (i >= n_) i = n_ - 1;
    double t = u - i;
    i0[a] = i;
    for (int c = 0; c < 2; ++c) {
      B[a][c][0] = hermite_basis(c, 0, t);
      B[a][c][1] = hermite_basis(c, 1, t) * h_;
      D[a][c][0] = hermite_basis_dt(c, 0, t) * n_;
      D[a][c][1] = hermite_basis_dt(c, 1, t);
    }
  }
  corners_ = 1 << dim_;
  const int masks = corners_;
  for (int c = 0; c < corners_; ++c) {
    Index flat = 0;
    for (int a = 0; a < dim_; ++a) {
      int j = i0[a] + ((c >> a) & 1);
      if (j >= n_) j -= n_;
      flat = flat * n_ + j;
    }
    corner_index_[c] = flat;
    for (int mask = 0; mask < masks; ++mask) {
      double w = 1.0;
      for (int a = 0; a < dim_; ++a) w *= B[a][(c >> a) & 1][(mask >> a) & 1];
      w_[c][mask] = w;
      for (int g = 0; g < dim_; ++g) {
        double v = sign[g];
        for (int a = 0; a < dim_; ++a) {
          int cc = (c >> a) & 1, mm = (mask >> a) & 1;
          v *= (a == g) ? D[a][cc][mm] : B[a][cc][mm];
        }
        g_[g][c][mask] = v;
      }
    }
  }
}

double HermiteStencil::value(const KernelTable& t) const {
  double v = 0.0;
  for (int mask = 0; mask < corners_; ++mask) {
    const double* p = t.partial(mask).data();
    for (int c = 0; c < corners_; ++c) v += p[corner_index_[c]] * w_[c][mask];
  }
  return v;
}

void HermiteStencil::gradient(const KernelTable& t, double* grad) const {
  for (int g = 0; g < dim_; ++g) grad[g] = 0.0;
  add_gradient(t, 1.0, grad);
}

void HermiteStencil::add_gradient(const KernelTable& t, double scale, double* grad) const {
  for (int g = 0; g < dim_; ++g) {
    double v = 0.0;
    for (int mask = 0; mask < corners_; ++mask) {
      const double* p = t.partial(mask).data();
      for (int c = 0; c < corners_; ++c) v += p[corner_index_[c]] * g_[g][c][mask];
    }
    grad[g] += scale * v;
  }
}

// -------------------------------------------------------------- admissibility

bool AdmissibilityReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string AdmissibilityReport::summary() const {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3);
  for (const auto& c : checks)
    os << (c.passed ? "ok   " : "FAIL ") << c.name << " measured=" << c.measured << " tol=" << c.tolerance << '\n';
  return os.str();
}

// ---------------------------------------------------------------- mollifiers

int default_resolution(int dim) { return dim == 1 ? 4096 : dim == 2 ? 512 : 64; }

double moment_target(double scale, int dim, MomentConvention conv) {
  double t = 2.0 * scale * scale;
  return conv == MomentConvention::PerAxis ? t : t / dim;
}

double KernelFamily::support_radius() const {
  return kind_ == MollifierKind::CompactBump ? width_ : 5.0 * width_;
}

double KernelFamily::profile(const Vector& x) const {
  Radial r{kind_, width_};
  return norm_ * r.value(x.squaredNorm());
}

Vector KernelFamily::profile_gradient(const Vector& x) const {
  Radial r{kind_, width_};
  double g[4];
  r.derivatives(x.squaredNorm(), g);
  return norm_ * 2.0 * g[1] * x;
}

AdmissibilityReport KernelFamily::check() const {
  AdmissibilityReport rep;
  const Vector& v = table_.values();
  int n = table_.n();
  double h_d = std::pow(table_.spacing(), dim_);
  rep.checks.push_back(make_check("nonnegativity", std::max(0.0, -v.minCoeff()), 0.0));
  double asym = 0.0;
  for (Index i = 0; i < v.size(); ++i) asym = std::max(asym, std::abs(v[i] - v[mirror_all(dim_, n, i)]));
  rep.checks.push_back(make_check("symmetry", asym, 1e-12));
  rep.checks.push_back(make_check("unit mass", std::abs(v.sum() * h_d - 1.0), 1e-8));
  rep.checks.push_back(make_check("first moment", native_first_.cwiseAbs().maxCoeff(), 1e-10));
  double second = 0.0;
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b)
      second = std::max(second, std::abs(native_second_(a, b) - (a == b ? target_ : 0.0)));
  rep.checks.push_back(make_check("second moment", second, 1e-6));
  return rep;
}

KernelFamily make_mollifier(MollifierKind kind, double scale, int dim, double target, int resolution) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("make_mollifier: dimension must be 1, 2 or 3");
  if (!(scale > 0.0)) throw std::invalid_argument("make_mollifier: scale must be positive");
  if (!(scale < 0.5)) throw std::invalid_argument("make_mollifier: scale too large to embed support (need eps < 1/2)");
  int n = resolution > 0 ? resolution : default_resolution(dim);
  if (scale * n < 8.0)
    throw std::invalid_argument("make_mollifier: table resolution insufficient (< 8 samples across the scale)");
  if (!(target > 0.0)) throw std::invalid_argument("make_mollifier: second moment target must be positive");

  const double h = 1.0 / n;
  const double h_d = std::pow(h, dim);
  Radial radial{kind, kind == MollifierKind::CompactBump ? std::sqrt(target / 0.158) : std::sqrt(target)};

  auto moments = [&](double& mass, double& second) {
    int J = static_cast<int>(std::ceil(std::sqrt(radial.cutoff2()) / h));
    double m0 = 0.0, m2 = 0.0;
    for_each_offset(dim, J, [&](const int* j) {
      double s = 0.0;
      for (int a = 0; a < dim; ++a) s += (j[a] * h) * (j[a] * h);
      double g = radial.value(s);
      m0 += g;
      m2 += g * (j[0] * h) * (j[0] * h);
    });
    mass = m0 * h_d;
    second = m2 / m0;
  };

  double mass = 0.0, second = 0.0;
  for (int it = 0; it < 100; ++it) {
    moments(mass, second);
    double ratio = target / second;
    radial.width *= std::sqrt(ratio);
    if (std::abs(ratio - 1.0) < 1e-14) break;
  }
  moments(mass, second);

  KernelFamily fam;
  fam.kind_ = kind;
  fam.scale_ = scale;
  fam.dim_ = dim;
  fam.target_ = target;
  fam.width_ = radial.width;
  fam.norm_ = 1.0 / mass;

  KernelTable table(dim, n);
  fam.native_first_ = Vector::Zero(dim);
  fam.native_second_ = Matrix::Zero(dim, dim);
  double native_mass = 0.0;
  int J = static_cast<int>(std::ceil(std::sqrt(radial.cutoff2()) / h));
  const double C = fam.norm_;
  for_each_offset(dim, J, [&](const int* j) {
    double x[3];
    double s = 0.0;
    for (int a = 0; a < dim; ++a) {
      x[a] = j[a] * h;
      s += x[a] * x[a];
    }
    if (s > radial.cutoff2()) return;
    double g[4];
    radial.derivatives(s, g);
    if (g[0] == 0.0 && g[1] == 0.0) return;
    Index flat = wrapped_flat(dim, n, j);
    double w = C * g[0];
    native_mass += w * h_d;
    for (int a = 0; a < dim; ++a) {
      fam.native_first_[a] += w * x[a] * h_d;
      for (int b = 0; b < dim; ++b) fam.native_second_(a, b) += w * x[a] * x[b] * h_d;
    }
    for (unsigned mask = 0; mask < (1u << dim); ++mask) {
      int k = popcount(mask);
      double v = C * g[k] * std::pow(2.0, k);
      for (int a = 0; a < dim; ++a)
        if (mask & (1u << a)) v *= x[a];
      table.partial(mask)[flat] += v;
    }
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        double v = 4.0 * x[a] * x[b] * g[2];
        if (a == b) v += 2.0 * g[1];
        table.hessian(a, b)[flat] += C * v;
      }
  });
  fam.native_mass_ = native_mass;
  table.symmetrize();  // image sums accumulate in mirrored order
  table.refresh_spectrum();
  fam.table_ = std::move(table);
  return fam;
}

// ------------------------------------------------------------- viscosity

double viscosity_symbol(double alpha, double k, double xi_norm) {
  double z = 2.0 * M_PI * alpha * xi_norm;
  return std::pow(1.0 + z * z, -k);
}

double minimum_viscosity_exponent(int dim) { return dim / 2.0 + 3.0; }

double ViscosityKernel::a_inner() const { return std::pow(1.0 + 4.0 * M_PI * M_PI, -k_); }
double ViscosityKernel::a() const { return std::pow(1.0 + 4.0 * M_PI * M_PI, -k_); }
double ViscosityKernel::b() const { return std::pow(2.0 * M_PI, -2.0 * k_); }

AdmissibilityReport ViscosityKernel::check() const {
  AdmissibilityReport rep;
  const auto& ft = fourier(table_.n(), dim_);
  double min_hat = std::numeric_limits<double>::infinity();
  double lower_violation = 0.0, upper_violation = 0.0;
  for (Index i = 0; i < ft.size(); ++i) {
    double xi2 = 0.0;
    for (int a = 0; a < dim_; ++a) xi2 += double(ft.frequency(i, a)) * ft.frequency(i, a);
    double xi = std::sqrt(xi2);
    min_hat = std::min(min_hat, viscosity_symbol(alpha_, k_, xi));
    double r = viscosity_symbol(1.0, k_, xi);
    if (xi > 1.0) {
      double lo = a() * std::pow(xi, -2.0 * k_), hi = b() * std::pow(xi, -k_);
      lower_violation = std::max(lower_violation, lo / r - 1.0);
      upper_violation = std::max(upper_violation, r / hi - 1.0);
    } else if (xi > 0.0) {
      lower_violation = std::max(lower_violation, a_inner() / r - 1.0);
    }
  }
  rep.checks.push_back(make_check("spectrum positivity", min_hat > 0.0 ? 0.0 : 1.0, 0.0));
  rep.checks.push_back(make_check("spectrum at zero", std::abs(viscosity_symbol(alpha_, k_, 0.0) - 1.0), 0.0));
  rep.checks.push_back(make_check("lower bound a/|xi|^2k", std::max(0.0, lower_violation), 1e-12));
  rep.checks.push_back(make_check("upper bound b/|xi|^k", std::max(0.0, upper_violation), 1e-12));
  const Vector& v = table_.values();
  double h_d = std::pow(table_.spacing(), dim_);
  rep.checks.push_back(make_check("nonnegativity", std::max(0.0, -v.minCoeff()) / v.maxCoeff(), 1e-12));
  rep.checks.push_back(make_check("unit mass", std::abs(v.sum() * h_d - 1.0), 1e-8));
  ComplexVector hs = ft.forward(half_.values()) * h_d;
  Vector sq = ft.inverse_real(ComplexVector(hs.array().square())) / h_d;
  rep.checks.push_back(make_check("half-kernel square", (sq - v).cwiseAbs().maxCoeff(), 1e-8));
  return rep;
}

ViscosityKernel make_viscosity_kernel(double alpha, double k, int dim, int resolution) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("make_viscosity_kernel: dimension must be 1, 2 or 3");
  if (k < minimum_viscosity_exponent(dim))
    throw std::invalid_argument("make_viscosity_kernel: spectral exponent k below d/2 + 3");
  if (!(alpha > 0.0)) throw std::invalid_argument("make_viscosity_kernel: alpha must be positive");
  if (!(alpha < 0.5)) throw std::invalid_argument("make_viscosity_kernel: alpha must be < 1/2");
  int n = resolution > 0 ? resolution : default_resolution(dim);
  if (alpha * n < 8.0)
    throw std::invalid_argument("make_viscosity_kernel: table resolution insufficient (< 8 samples across alpha)");
  const auto& ft = fourier(n, dim);
  ComplexVector full(ft.size()), half(ft.size());
  for (Index i = 0; i < ft.size(); ++i) {
    double xi2 = 0.0;
    for (int a = 0; a < dim; ++a) xi2 += double(ft.frequency(i, a)) * ft.frequency(i, a);
    double r = viscosity_symbol(alpha, k, std::sqrt(xi2));
    full[i] = r;
    half[i] = std::sqrt(r);
  }
  ViscosityKernel vk;
  vk.alpha_ = alpha;
  vk.k_ = k;
  vk.dim_ = dim;
  vk.table_ = KernelTable::from_spectrum(dim, n, full);
  vk.half_ = KernelTable::from_spectrum(dim, n, half);
  return vk;
}

// -------------------------------------------------------------- composition

KernelTable compose_W_eps(const KernelFamily& omega, const KernelFamily& omega_tilde, double epsilon) {
  const auto& a = omega.table();
  const auto& b = omega_tilde.table();
  if (a.dim() != b.dim() || a.n() != b.n()) throw std::invalid_argument("compose_W_eps: incompatible grids");
  if (!(epsilon > 0.0)) throw std::invalid_argument("compose_W_eps: epsilon must be positive");
  Vector w = a.spectrum().real();
  Vector wt = b.spectrum().real();
  Vector A = wt.cwiseAbs2();
  Vector W = (A - w.cwiseProduct(A)) / (epsilon * epsilon);
  return KernelTable::from_spectrum(a.dim(), a.n(), W.cast<Complex>());
}

KernelSet::KernelSet(const ParameterSchedule& schedule, const KernelOptions& options)
    : schedule_(schedule), options_(options) {
  validate_schedule(schedule_);
  int d = schedule_.dim;
  int n = options_.resolution > 0 ? options_.resolution : default_resolution(d);
  options_.resolution = n;
  omega_ = make_mollifier(options_.kind, schedule_.epsilon, d, moment_target(schedule_.epsilon, d, options_.moments), n);
  omega_tilde_ = make_mollifier(options_.kind, schedule_.epsilon_tilde, d,
                                moment_target(schedule_.epsilon_tilde, d, options_.moments), n);
  Vector wt = omega_tilde_.table().spectrum().real();
  Vector A = wt.cwiseAbs2();
  aggregation_ = KernelTable::from_spectrum(d, n, A.cast<Complex>());
  W_eps_ = compose_W_eps(omega_, omega_tilde_, schedule_.epsilon);

  viscosity_k_ = options_.viscosity_k > 0.0 ? options_.viscosity_k : std::ceil(minimum_viscosity_exponent(d));
  viscosity_active_ = !options_.appendix_a_mode;
  if (viscosity_active_ && schedule_.has_viscosity() && options_.tabulate_viscosity)
    viscosity_ = make_viscosity_kernel(schedule_.alpha, viscosity_k_, d, n);

  Vector K = W_eps_.spectrum().real() - 2.0 * A;
  if (viscosity_active_) {
    if (!viscosity_) return;
    K += schedule_.epsilon_star * viscosity_->table().spectrum().real();
  }
  pair_ = KernelTable::from_spectrum(d, n, K.cast<Complex>());
}

const KernelTable& KernelSet::pair_potential() const {
  if (!pair_) throw std::logic_error("pair potential requires tabulated viscosity kernel");
  return *pair_;
}

Vector KernelSet::viscosity_multiplier(int n, bool half) const {
  const auto& ft = fourier(n, schedule_.dim);
  Vector out = Vector::Ones(ft.size());
  if (!schedule_.has_viscosity()) return out;
  for (Index i = 0; i < ft.size(); ++i) {
    double xi2 = 0.0;
    for (int a = 0; a < schedule_.dim; ++a) xi2 += double(ft.frequency(i, a)) * ft.frequency(i, a);
    double r = viscosity_symbol(schedule_.alpha, viscosity_k_, std::sqrt(xi2));
    out[i] = half ? std::sqrt(r) : r;
  }
  return out;
}

KernelSet KernelSet::scaled(double factor) const {
  KernelSet s = *this;
  s.omega_.table_ = omega_.table_.scaled(factor);
  s.omega_tilde_.table_ = omega_tilde_.table_.scaled(factor);
  s.aggregation_ = aggregation_.scaled(factor);
  s.W_eps_ = W_eps_.scaled(factor);
  if (viscosity_) {
    s.viscosity_->table_ = viscosity_->table_.scaled(factor);
    s.viscosity_->half_ = viscosity_->half_.scaled(factor);
  }
  if (pair_) s.pair_ = pair_->scaled(factor);
  return s;
}

LambdaEstimate lambda_convexity_constant(const KernelSet& kernels) {
  const auto& s = kernels.schedule();
  if (!(s.alpha > 0.0)) throw std::invalid_argument("lambda_convexity_constant: undefined for alpha = 0");
  int d = s.dim;
  LambdaEstimate est;
  est.scaling = std::pow(s.epsilon, -2.0) * std::pow(s.epsilon_tilde, -d - 2.0) + std::pow(s.epsilon_tilde, -d - 2.0) +
                s.epsilon_star * std::exp((-d - 2.0) * s.log_alpha);
  est.hessian_negative_part = kernels.pair_potential().sup_hessian_negative_part();
  est.lambda = -est.hessian_negative_part;
  est.c_lambda = est.hessian_negative_part / est.scaling;
  return est;
}

void export_table_csv(const KernelTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  int d = t.dim();
  for (int a = 0; a < d; ++a) out << "x_" << (a + 1) << ',';
  out << "value";
  for (int a = 0; a < d; ++a) out << ",grad_" << (a + 1);
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < t.size(); ++i) {
    Index f = i;
    int idx[3] = {0, 0, 0};
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(f % t.n());
      f /= t.n();
    }
    for (int a = 0; a < d; ++a) out << idx[a] * t.spacing() << ',';
    out << t.values()[i];
    for (int a = 0; a < d; ++a) out << ',' << t.partial(1u << a)[i];
    out << '\n';
  }
}

}  // namespace dpa
