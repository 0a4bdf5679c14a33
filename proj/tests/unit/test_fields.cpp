#include "dpa/fields.hpp"
#include "dpa/kernels.hpp"
#include "dpa/particles.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace dpa;

namespace {

const double kTwoPi = 2.0 * M_PI;

KernelSet make_set(double eps, double tilde, double star, double alpha, int d = 1, double m = 2.0) {
  ScheduleOverrides o;
  o.epsilon_tilde = tilde;
  o.epsilon_star = star;
  o.alpha = alpha;
  o.m = m;
  return KernelSet(schedule_from_epsilon(eps, d, o));
}

GridField sine(int n, double amp = 1.0, double base = 0.0) {
  return GridField::sample(1, n, [&](const Vector& x) { return base + amp * std::sin(kTwoPi * x[0]); });
}

KernelTable delta_table(int d, int n) {
  ComplexVector spec = ComplexVector::Ones(static_cast<Index>(std::pow(n, d)));
  return KernelTable::from_spectrum(d, n, spec);
}

double profile1(const KernelFamily& k, double x) { return k.profile(Vector::Constant(1, x)); }

}  // namespace

TEST_CASE("periodic convolution") {
  GridField f = GridField::sample(1, 128, [](const Vector& x) { return std::cos(kTwoPi * 3 * x[0]) + x[0]; });
  GridField id = periodic_convolve(f, delta_table(1, 128));
  CHECK((id.values() - f.values()).cwiseAbs().maxCoeff() < 1e-12);

  KernelFamily g = make_mollifier(MollifierKind::TruncatedGaussian, 0.05, 1, 2 * 0.05 * 0.05);
  const int n = g.table().n();
  GridField c(1, n, Vector::Constant(n, 2.0));
  CHECK((periodic_convolve(c, g.table()).values().array() - 2.0).abs().maxCoeff() < 1e-12);

  double sigma = g.width();
  double multiplier = std::exp(-2.0 * M_PI * M_PI * sigma * sigma);
  GridField out = periodic_convolve(sine(n), g.table());
  CHECK((out.values() - multiplier * sine(n).values()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(out.mass() == doctest::Approx(0.0).epsilon(1e-12));

  GridField wrong(1, n / 2);
  CHECK_THROWS(periodic_convolve(wrong, g.table()));
}

TEST_CASE("quadrature oracle agrees with the table convolution at random points") {
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, 0.05, 1, 2 * 0.05 * 0.05);
  const int n = w.table().n();
  auto f = [](double x) { return 1.0 + 0.4 * std::sin(kTwoPi * x) + 0.2 * std::cos(kTwoPi * 3 * x); };
  GridField fg = GridField::sample(1, n, [&](const Vector& x) { return f(x[0]); });
  GridField conv = periodic_convolve(fg, w.table());
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> node(0, n - 1);
  double R = w.support_radius(), worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    int j = node(rng);
    double x = j / double(n);
    double exact = oracle::quad_convolve([&](double y) { return std::abs(y) < R ? profile1(w, y) : 0.0; }, f, x,
                                         1e-10, {-R, 0.0, R});
    worst = std::max(worst, std::abs(exact - conv[j]));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("B_eps") {
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, 0.05, 1, 2 * 0.05 * 0.05);
  const int n = w.table().n();
  GridField c(1, n, Vector::Constant(n, 3.0));
  CHECK(B_eps(c, w.table(), 0.05).values().cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS(B_eps(c, w.table(), 0.0));

  GridField f = sine(n), g = GridField::sample(1, n, [](const Vector& x) { return std::cos(kTwoPi * 2 * x[0]); });
  GridField combo(1, n, 2.0 * f.values() - 3.0 * g.values());
  Vector lin = 2.0 * B_eps(f, w.table(), 0.05).values() - 3.0 * B_eps(g, w.table(), 0.05).values();
  CHECK((B_eps(combo, w.table(), 0.05).values() - lin).cwiseAbs().maxCoeff() < 1e-9 * lin.cwiseAbs().maxCoeff());

  std::vector<double> errors;
  for (double eps : {0.04, 0.02, 0.01}) {
    KernelFamily k = make_mollifier(MollifierKind::CompactBump, eps, 1, 2 * eps * eps, 2048);
    GridField s = sine(2048);
    GridField b = B_eps(s, k.table(), eps);
    errors.push_back((b.values() - kTwoPi * kTwoPi * s.values()).cwiseAbs().maxCoeff());
  }
  CHECK(std::log2(errors[0] / errors[1]) >= 1.5);
  CHECK(std::log2(errors[1] / errors[2]) >= 1.5);
}

TEST_CASE("D_eps") {
  const double eps = 0.01;
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, eps, 1, 2 * eps * eps);
  const int n = w.table().n();
  GridField c(1, n, Vector::Constant(n, 1.0));
  CHECK(dissipation_D_eps(c, w.table(), eps) == doctest::Approx(0.0));

  GridField f = sine(n);
  double D = dissipation_D_eps(f, w.table(), eps);
  CHECK(std::abs(D - kTwoPi * kTwoPi) <= 0.02 * kTwoPi * kTwoPi);

  GridField twice(1, n, 2.0 * f.values());
  CHECK(dissipation_D_eps(twice, w.table(), eps) == doctest::Approx(4.0 * D).epsilon(1e-12));

  GridField g = GridField::sample(1, n, [](const Vector& x) { return std::cos(kTwoPi * 2 * x[0]) + 0.3 * x[0]; });
  double Bff = B_eps(f, w.table(), eps).inner(f);
  CHECK(std::abs(D - 2.0 * Bff) < 1e-8 * std::max(1.0, D));
  GridField sum(1, n, f.values() + g.values());
  double polar = dissipation_D_eps(sum, w.table(), eps) - D - dissipation_D_eps(g, w.table(), eps);
  double Bfg = B_eps(f, w.table(), eps).inner(g);
  CHECK(std::abs(polar - 4.0 * Bfg) < 1e-8 * std::max(1.0, std::abs(polar)));
}

TEST_CASE("E_m and entropy") {
  GridField one(1, 64, Vector::Ones(64));
  CHECK(energy_E_m(one, 2.0) == doctest::Approx(1.0));
  CHECK(energy_E_m(one, 3.0) == doctest::Approx(0.5));
  CHECK(energy_E_m(sine(256, 0.5, 1.0), 2.0) == doctest::Approx(1.125).epsilon(1e-8));
  GridField neg = one;
  neg[4] = -1e-6;
  CHECK_THROWS(energy_E_m(neg, 2.0));
  CHECK_THROWS(energy_E_m(one, 1.0));
  CHECK(entropy(one) == doctest::Approx(-1.0));
  GridField holes(1, 4, Vector::Zero(4));
  holes[0] = 4.0;
  CHECK(entropy(holes) == doctest::Approx(std::log(4.0) - 1.0));
}

TEST_CASE("free energy of the uniform state") {
  for (double m : {2.0, 3.0}) {
    KernelSet ks = make_set(0.1, 0.25, 0.5, 0.08, 1, m);
    const int n = ks.resolution();
    GridField one(1, n, Vector::Ones(n));
    EnergyReport r = free_energy(one, ks);
    CHECK(r.D_smoothed == doctest::Approx(0.0));
    CHECK(r.F_eps_alpha == doctest::Approx(-1.0 / (m - 1.0) + 0.25).epsilon(1e-10));
    CHECK(r.entropy == doctest::Approx(-1.0));
    CHECK(r.identity_residual() < 1e-10);
    CHECK(r.step_dissipation < 1e-20);
  }
}

TEST_CASE("free energy against independent quadrature") {
  const double eps = 0.02, tilde = 0.2, star = 0.45, alpha = 0.05;
  KernelSet ks = make_set(eps, tilde, star, alpha);
  const int n = ks.resolution();
  GridField rho = sine(n, 0.5, 1.0);
  EnergyReport r = free_energy(rho, ks);
  CHECK(r.identity_residual() < 1e-10);

  const KernelFamily &w = ks.omega(), &wt = ks.omega_tilde();
  double R = w.support_radius(), Rt = wt.support_radius();
  double wt_hat = oracle::quad([&](double y) { return profile1(wt, y) * std::cos(kTwoPi * y); }, -Rt, Rt, 1e-12, {0.0});
  double d_weight =
      oracle::quad([&](double y) { return profile1(w, y) * (1.0 - std::cos(kTwoPi * y)); }, -R, R, 1e-12, {0.0}) /
      (eps * eps);
  double a = 0.5 * wt_hat;
  double R1 = std::pow(1.0 + std::pow(kTwoPi * alpha, 2), -ks.viscosity_exponent());
  double expected = 0.25 * a * a * d_weight - (1.0 + a * a / 2.0) + 0.5 * star * (1.0 + 0.25 * R1 / 2.0);
  CHECK(std::abs(r.F_eps_alpha - expected) <= 1e-4 * std::abs(expected));
  CHECK(quadratic_energy(rho, ks) == doctest::Approx(r.F_eps_alpha).epsilon(1e-9));
}

TEST_CASE("kde density") {
  KernelSet ks = make_set(0.1, 0.25, 0.5, 0.08);
  const KernelTable& wt = ks.omega_tilde().table();
  const int n = 256;
  ParticleState one;
  one.positions = Matrix::Constant(1, 1, 0.5);
  GridField k = kde_density(one, wt, n);
  double worst = 0.0, Rt = ks.omega_tilde().support_radius();
  for (Index i = 0; i < k.size(); ++i) {
    double x = k.node(i)[0] - 0.5, exact = 0.0;
    for (int s = -2; s <= 2; ++s)
      if (std::abs(x + s) < Rt) exact += profile1(ks.omega_tilde(), x + s);
    worst = std::max(worst, std::abs(k[i] - exact));
  }
  CHECK(worst < 1e-5);
  CHECK(k.mass() == doctest::Approx(1.0).epsilon(1e-8));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ParticleState s;
  s.positions = Matrix::NullaryExpr(1, 30, [&]() { return u(rng); });
  ParticleState t = s;
  t.positions.array() += 0.25;
  wrap_in_place(t.positions);
  GridField a = kde_density(s, wt, n), b = kde_density(t, wt, n);
  double shift_err = 0.0;
  for (int i = 0; i < n; ++i) shift_err = std::max(shift_err, std::abs(b[(i + n / 4) % n] - a[i]));
  CHECK(shift_err < 1e-12);
  CHECK(a.mass() == doctest::Approx(1.0).epsilon(1e-8));

  GridField uniform(1, 4096, Vector::Ones(4096));
  ParticleState q = init_quantile(uniform, 1000);
  GridField flat = kde_density(q, wt, n);
  CHECK((flat.values().array() - 1.0).abs().maxCoeff() <= 3.0 / std::sqrt(1000.0) + 1e-3);
}

TEST_CASE("nonlocal velocity field") {
  KernelSet ks = make_set(0.1, 0.25, 0.5, 0.08);
  const int n = ks.resolution();
  GridField c(1, n, Vector::Ones(n));
  CHECK(velocity_field_nl(c, ks)[0].values().cwiseAbs().maxCoeff() < 1e-9);
  GridField rho = sine(n, 0.5, 1.0);
  CHECK(std::abs(velocity_field_nl(rho, ks)[0].values().mean()) < 1e-12);

  KernelSet ks2 = make_set(0.1, 0.25, 0.5, 0.08, 2);
  const int n2 = ks2.resolution();
  GridField rho2 = GridField::sample(2, n2, [](const Vector& x) {
    return 1.0 + 0.3 * std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]);
  });
  auto v2 = velocity_field_nl(rho2, ks2);
  REQUIRE(v2.size() == 2);
  CHECK(std::abs(v2[0].values().mean()) < 1e-12);
  CHECK(std::abs(v2[1].values().mean()) < 1e-12);
}

TEST_CASE("grid velocity of a point-mass density matches the particle forces") {
  // Two particles on grid nodes; the density is the discrete delta sum, so every
  // convolution reduces to sampling the tabulated kernels.
  KernelSet ks = make_set(0.1, 0.25, 0.5, 0.08);
  auto shared = std::make_shared<const KernelSet>(ks);
  const int n = ks.resolution();
  ParticleState two;
  two.positions.resize(1, 2);
  two.positions << 100.0 / n, 160.0 / n;
  GridField rho(1, n);
  rho[100] = 0.5 * n;
  rho[160] = 0.5 * n;
  auto v = velocity_field_nl(rho, ks);
  ForceField f = ParticleSystem(shared).compute_forces(two);
  CHECK(std::abs(v[0][100] - f.total(0, 0)) <= 1e-4 * std::abs(f.total(0, 0)));
  CHECK(std::abs(v[0][160] - f.total(0, 1)) <= 1e-4 * std::abs(f.total(0, 1)));
}

TEST_CASE("energy stream") {
  KernelSet ks = make_set(0.1, 0.25, 0.5, 0.08);
  GridField rho = sine(ks.resolution(), 0.5, 1.0);
  std::ostringstream out;
  write_energy_header(out, 1);
  write_energy_row(out, free_energy(rho, ks, 0.5));
  std::string text = out.str();
  CHECK(text.rfind("t,F_eps_alpha", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}
