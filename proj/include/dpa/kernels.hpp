#pragma once

#include "dpa/fft.hpp"
#include "dpa/geometry.hpp"
#include "dpa/schedule.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dpa {

enum class MollifierKind { CompactBump, TruncatedGaussian };
// PerAxis: int y_i y_j w = 2 eps^2 delta_ij in every d. Literal: 2 eps^2 delta_ij / d.
enum class MomentConvention { PerAxis, Literal };

MollifierKind parse_mollifier_kind(const std::string& name);
std::string to_string(MollifierKind kind);
MomentConvention parse_moment_convention(const std::string& name);

// Even periodic kernel sampled on n^d nodes together with its mixed partials
// (mask bit a = one derivative along axis a) and full Hessian. Evaluation is the
// tensor-product cubic Hermite interpolant of those samples.
class KernelTable {
 public:
  KernelTable() = default;
  KernelTable(int dim, int n);

  // spec is the h^d-weighted DFT of the kernel values (continuous-transform scaling).
  static KernelTable from_spectrum(int dim, int n, const ComplexVector& spec);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  Index size() const { return values().size(); }

  const Vector& values() const { return partials_[0]; }
  const Vector& partial(unsigned mask) const { return partials_[mask]; }
  Vector& partial(unsigned mask) { return partials_[mask]; }
  const Vector& hessian(int a, int b) const { return hessian_[a * dim_ + b]; }
  Vector& hessian(int a, int b) { return hessian_[a * dim_ + b]; }
  const ComplexVector& spectrum() const { return spectrum_; }

  // Recomputes the spectrum from the value table (after filling samples by hand).
  void refresh_spectrum();
  // Forces exact even/odd parity of every table about the origin.
  void symmetrize();

  KernelTable scaled(double factor) const;

  template <typename Derived>
  double value(const Eigen::MatrixBase<Derived>& disp) const {
    return value(disp.derived().eval().data());
  }
  template <typename Derived>
  Vector gradient(const Eigen::MatrixBase<Derived>& disp) const {
    Vector g(dim_);
    gradient(disp.derived().eval().data(), g.data());
    return g;
  }
  double value(const double* disp) const;
  void gradient(const double* disp, double* grad) const;
  void value_and_gradient(const double* disp, double* val, double* grad) const;

  double sup_abs() const;
  double sup_gradient_norm() const;
  // max over nodes of the spectral norm of the Hessian
  double sup_hessian_norm() const;
  // max over nodes of the negative part of the smallest Hessian eigenvalue
  double sup_hessian_negative_part() const;

 private:
  int dim_ = 0;
  int n_ = 0;
  std::vector<Vector> partials_;
  std::vector<Vector> hessian_;
  ComplexVector spectrum_;
};

// Per-displacement Hermite weights shared by several tables of the same grid.
class HermiteStencil {
 public:
  HermiteStencil(int dim, int n) : dim_(dim), n_(n), h_(1.0 / n) {}
  void locate(const double* disp);
  double value(const KernelTable& t) const;
  void gradient(const KernelTable& t, double* grad) const;
  // adds scale * gradient into grad
  void add_gradient(const KernelTable& t, double scale, double* grad) const;

 private:
  int dim_, n_;
  double h_;
  int corners_ = 0;
  Index corner_index_[8];
  double w_[8][8];
  double g_[3][8][8];
};

struct AdmissibilityCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct AdmissibilityReport {
  std::vector<AdmissibilityCheck> checks;
  bool passed() const;
  std::string summary() const;
};

class KernelFamily {
 public:
  MollifierKind kind() const { return kind_; }
  double scale() const { return scale_; }
  int dim() const { return dim_; }
  double second_moment_target() const { return target_; }
  // profile width: bump support radius or Gaussian sigma
  double width() const { return width_; }
  double support_radius() const;
  double normalization() const { return norm_; }
  const KernelTable& table() const { return table_; }

  // Analytic kernel on R^d (not periodized).
  double profile(const Vector& x) const;
  Vector profile_gradient(const Vector& x) const;

  AdmissibilityReport check() const;

 private:
  friend KernelFamily make_mollifier(MollifierKind, double, int, double, int);
  friend class KernelSet;
  MollifierKind kind_ = MollifierKind::CompactBump;
  double scale_ = 0.0;
  int dim_ = 1;
  double target_ = 0.0;
  double width_ = 0.0;
  double norm_ = 1.0;
  KernelTable table_;
  // native (unwrapped) sample moments
  double native_mass_ = 0.0;
  Vector native_first_;
  Matrix native_second_;
};

int default_resolution(int dim);
double moment_target(double scale, int dim, MomentConvention conv);

KernelFamily make_mollifier(MollifierKind kind, double scale, int dim, double second_moment_target,
                            int resolution = 0);

// Closed-form spectrum (1 + |2 pi alpha xi|^2)^{-k}.
double viscosity_symbol(double alpha, double k, double xi_norm);

class ViscosityKernel {
 public:
  double alpha() const { return alpha_; }
  double k() const { return k_; }
  int dim() const { return dim_; }
  // certified bounds: a_inner <= R(xi) for |xi| <= 1, a/|xi|^{2k} <= R(xi) <= b/|xi|^k for |xi| > 1
  double a_inner() const;
  double a() const;
  double b() const;
  const KernelTable& table() const { return table_; }
  const KernelTable& half_table() const { return half_; }
  AdmissibilityReport check() const;

 private:
  friend ViscosityKernel make_viscosity_kernel(double, double, int, int);
  friend class KernelSet;
  double alpha_ = 0.0;
  double k_ = 0.0;
  int dim_ = 1;
  KernelTable table_;
  KernelTable half_;
};

double minimum_viscosity_exponent(int dim);
ViscosityKernel make_viscosity_kernel(double alpha, double k, int dim, int resolution = 0);

// W_eps = (w~*w~ - w*w~*w~)/eps^2 on the common grid of the factors.
KernelTable compose_W_eps(const KernelFamily& omega, const KernelFamily& omega_tilde, double epsilon);

struct KernelOptions {
  MollifierKind kind = MollifierKind::CompactBump;
  MomentConvention moments = MomentConvention::PerAxis;
  int resolution = 0;
  double viscosity_k = 0.0;  // 0: minimum exponent rounded up to an integer
  bool appendix_a_mode = false;
  // Particle runs need real-space viscosity tables; grid solvers only the symbol.
  bool tabulate_viscosity = true;
};

// Everything the particle system and the grid diagnostics need for one schedule.
class KernelSet {
 public:
  KernelSet(const ParameterSchedule& schedule, const KernelOptions& options = {});

  const ParameterSchedule& schedule() const { return schedule_; }
  const KernelOptions& options() const { return options_; }
  int dim() const { return schedule_.dim; }
  int resolution() const { return omega_.table().n(); }

  const KernelFamily& omega() const { return omega_; }
  const KernelFamily& omega_tilde() const { return omega_tilde_; }
  const KernelTable& aggregation() const { return aggregation_; }  // w~ * w~
  const KernelTable& W_eps() const { return W_eps_; }
  const ViscosityKernel* viscosity() const { return viscosity_ ? &*viscosity_ : nullptr; }
  // viscosity term present in the dynamics (false with appendix_a_mode). With alpha = 0
  // it is the local term -eps* grad rho (convention rho * R_0 = rho).
  bool viscosity_active() const { return viscosity_active_; }
  double viscosity_exponent() const { return viscosity_k_; }
  // Pair potential K = W_eps - 2 w~*w~ + eps* R_alpha of the m = 2 energy (1/2) int rho K*rho.
  const KernelTable& pair_potential() const;
  bool has_pair_potential() const { return pair_.has_value(); }

  // Symbol of R_alpha (or R_alpha^{1/2}) on the lattice of an n^d grid; ones for alpha = 0.
  Vector viscosity_multiplier(int n, bool half) const;

  KernelSet scaled(double factor) const;

 private:
  KernelSet() = default;
  ParameterSchedule schedule_;
  KernelOptions options_;
  KernelFamily omega_, omega_tilde_;
  KernelTable aggregation_, W_eps_;
  std::optional<ViscosityKernel> viscosity_;
  std::optional<KernelTable> pair_;
  bool viscosity_active_ = false;
  double viscosity_k_ = 0.0;
};

struct LambdaEstimate {
  double lambda = 0.0;     // <= 0
  double c_lambda = 0.0;   // prefactor
  double scaling = 0.0;    // eps^-2 eps~^{-d-2} + eps~^{-d-2} + eps* alpha^{-d-2}
  double hessian_negative_part = 0.0;
};

// Default prefactor path: lambda = -||(D^2 K)_-||_inf with K the tabulated pair potential.
LambdaEstimate lambda_convexity_constant(const KernelSet& kernels);

// CSV with columns x_1..x_d,value,grad_1..grad_d.
void export_table_csv(const KernelTable& t, const std::string& path);

}  // namespace dpa
