#include "dpa/fields.hpp"
#include "dpa/kernels.hpp"
#include "dpa/schedule.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dpa;

namespace {

KernelSet default_set(double eps, double tilde, double star, double alpha, int d = 1, int res = 0) {
  ScheduleOverrides o;
  o.epsilon_tilde = tilde;
  o.epsilon_star = star;
  o.alpha = alpha;
  KernelOptions k;
  k.resolution = res;
  return KernelSet(schedule_from_epsilon(eps, d, o), k);
}

double profile1(const KernelFamily& k, double x) { return k.profile(Vector::Constant(1, x)); }

}  // namespace

TEST_CASE("compact bump moments by independent quadrature") {
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, 0.1, 1, 2 * 0.01);
  double R = w.support_radius();
  auto f = [&](double x) { return profile1(w, x); };
  double mass = oracle::quad(f, -R, R, 1e-12, {0.0});
  double first = oracle::quad([&](double x) { return x * f(x); }, -R, R, 1e-12, {0.0});
  double second = oracle::quad([&](double x) { return x * x * f(x); }, -R, R, 1e-12, {0.0});
  CHECK(std::abs(mass - 1.0) < 1e-8);
  CHECK(std::abs(first) < 1e-10);
  CHECK(std::abs(second - 0.02) < 1e-6);
  CHECK(w.check().passed());
}

TEST_CASE("tables are even and admissible for both kinds") {
  for (auto kind : {MollifierKind::CompactBump, MollifierKind::TruncatedGaussian})
    for (double eps : {0.2, 0.1, 0.05, 0.02}) {
      KernelFamily w = make_mollifier(kind, eps, 1, 2 * eps * eps);
      const Vector& v = w.table().values();
      const int n = w.table().n();
      double asym = 0.0;
      for (int j = 1; j < n; ++j) asym = std::max(asym, std::abs(v[j] - v[n - j]));
      CHECK(asym == 0.0);
      AdmissibilityReport r = w.check();
      CHECK_MESSAGE(r.passed(), r.summary());
      CHECK(std::abs(v.sum() / n - 1.0) < 1e-8);
    }
}

TEST_CASE("mollifier preconditions") {
  CHECK_THROWS_WITH(make_mollifier(MollifierKind::CompactBump, 0.5, 1, 0.5), doctest::Contains("scale too large"));
  CHECK_THROWS_WITH(make_mollifier(MollifierKind::CompactBump, 0.01, 1, 2e-4, 512),
                    doctest::Contains("resolution insufficient"));
}

TEST_CASE("viscosity kernel") {
  ViscosityKernel R = make_viscosity_kernel(0.1, 4, 1, 1024);
  CHECK(viscosity_symbol(0.1, 4, 0.0) == 1.0);
  for (int k = 0; k <= 512; ++k) CHECK(viscosity_symbol(0.1, 4, k) > 0.0);
  AdmissibilityReport rep = R.check();
  CHECK_MESSAGE(rep.passed(), rep.summary());
  // independent synthesis of R^{1/2} * R^{1/2} - R on the grid
  const int n = 1024;
  double worst = 0.0;
  for (int j = 0; j < n; j += 7) {
    double x = double(j) / n, s = 0.0;
    for (int i = 0; i < n; ++i) s += R.half_table().values()[i] * R.half_table().values()[(j - i + n) % n];
    worst = std::max(worst, std::abs(s / n - R.table().values()[j]));
    (void)x;
  }
  CHECK(worst < 1e-8);
  CHECK_THROWS(make_viscosity_kernel(0.1, 3, 1, 1024));
  CHECK_THROWS(make_viscosity_kernel(0.5, 4, 1, 1024));
  CHECK(minimum_viscosity_exponent(2) == 4.0);
}

TEST_CASE("viscosity bounds at every lattice frequency") {
  const double k = 4.0;
  ViscosityKernel R = make_viscosity_kernel(0.1, k, 2, 128);
  for (int a = -64; a <= 64; ++a)
    for (int b = -64; b <= 64; ++b) {
      double xi = std::sqrt(double(a * a + b * b));
      double r = viscosity_symbol(1.0, k, xi);
      CHECK(r > 0.0);
      if (xi > 1.0) {
        CHECK(R.a() * std::pow(xi, -2 * k) <= r * (1 + 1e-12));
        CHECK(r <= R.b() * std::pow(xi, -k) * (1 + 1e-12));
      }
    }
}

TEST_CASE("W_eps structure and nested quadrature oracle") {
  const double eps = 0.05, tilde = 0.25;
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, eps, 1, 2 * eps * eps);
  KernelFamily wt = make_mollifier(MollifierKind::CompactBump, tilde, 1, 2 * tilde * tilde);
  KernelTable W = compose_W_eps(w, wt, eps);
  double z = 0.0, g = 1.0;
  W.gradient(&z, &g);
  CHECK(g == 0.0);
  CHECK(std::abs(W.values().sum() / W.n()) < 1e-8);

  const double R = w.support_radius(), Rt = wt.support_radius();
  auto A = [&](double x) {  // (w~ * w~)(x) on the line
    double lo = std::max(-Rt, x - Rt), hi = std::min(Rt, x + Rt);
    if (lo >= hi) return 0.0;
    return oracle::quad([&](double y) { return profile1(wt, y) * profile1(wt, x - y); }, lo, hi, 1e-11, {0.0, x});
  };
  auto B = [&](double x) {  // (w * w~ * w~)(x)
    return oracle::quad([&](double y) { return profile1(w, y) * A(x - y); }, -R, R, 1e-10,
                       {0.0, x - 2 * Rt, x + 2 * Rt, x});
  };
  double exact = 0.0;
  for (int k = -2; k <= 2; ++k) {
    double x = 0.1 + k;
    if (std::abs(x) > 2 * Rt + R) continue;
    exact += (A(x) - B(x)) / (eps * eps);
  }
  double table = W.value(Vector::Constant(1, 0.1));
  CHECK(std::abs(table - exact) / std::abs(exact) < 1e-6);
}

TEST_CASE("interpolated gradient matches the analytic Gaussian gradient") {
  const double eps = 0.05;
  KernelFamily g = make_mollifier(MollifierKind::TruncatedGaussian, eps, 1, 2 * eps * eps);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    double x = u(rng) * g.width() * (i % 2 ? 1 : -1);
    double table = g.table().gradient(Vector::Constant(1, x))[0];
    double exact = g.profile_gradient(Vector::Constant(1, x))[0];
    worst = std::max(worst, std::abs(table - exact) / std::abs(exact));
    CHECK(g.table().gradient(Vector::Constant(1, -x))[0] == -table);
  }
  CHECK(worst < 1e-4);
  CHECK(g.table().gradient(Vector::Zero(1))[0] == 0.0);
}

TEST_CASE("table convolution is associative and the squared kernel has a nonnegative spectrum") {
  KernelSet ks = default_set(0.1, 0.25, 0.5, 0.08);
  GridField w(1, ks.resolution(), ks.omega().table().values());
  GridField wt(1, ks.resolution(), ks.omega_tilde().table().values());
  GridField left = periodic_convolve(periodic_convolve(w, ks.omega_tilde().table()), ks.omega_tilde().table());
  GridField right = periodic_convolve(w, ks.aggregation());
  CHECK((left.values() - right.values()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(ks.aggregation().spectrum().real().minCoeff() >= -1e-12);
  (void)wt;
}

TEST_CASE("parameter schedule") {
  ParameterSchedule s = schedule_from_epsilon(1e-3, 1);
  CHECK(s.epsilon_tilde == doctest::Approx(std::pow(1e-3, 1.0 / 7.0)));
  CHECK(s.epsilon_tilde == doctest::Approx(0.3728).epsilon(1e-4));
  CHECK(s.epsilon_star == doctest::Approx(0.6106).epsilon(1e-4));
  CHECK(s.log_alpha == doctest::Approx(-1000.0));
  CHECK(s.alpha == 0.0);
  double prev = INFINITY;
  for (double e : {0.1, 0.05, 0.02, 0.01, 0.001}) {
    ParameterSchedule t = schedule_from_epsilon(e, 2);
    double ratio = t.epsilon / std::pow(t.epsilon_tilde, 4.0);
    CHECK(ratio < prev);
    CHECK(ratio == doctest::Approx(std::sqrt(e)));
    prev = ratio;
    CHECK(t.epsilon < t.epsilon_tilde);
    CHECK(t.epsilon_tilde < t.epsilon_star);
    CHECK(t.alpha == doctest::Approx(std::exp(-1.0 / e)));
  }
  ScheduleOverrides bad;
  bad.epsilon_tilde = 0.05;
  CHECK_THROWS_WITH(schedule_from_epsilon(0.1, 1, bad), doctest::Contains("eps < eps_tilde"));
  ScheduleOverrides bad2;
  bad2.epsilon_star = 0.2;
  CHECK_THROWS_WITH(schedule_from_epsilon(0.1, 1, bad2), doctest::Contains("eps_tilde < eps_star"));
  ScheduleOverrides zero;
  zero.epsilon_tilde = 0.25;
  zero.epsilon_star = 0.5;
  zero.alpha = 0.0;
  ParameterSchedule z = schedule_from_epsilon(0.1, 1, zero);
  CHECK(z.alpha == 0.0);
  CHECK_FALSE(z.has_viscosity());
  KernelOptions ko;
  ko.resolution = 1024;
  KernelSet ks(z, ko);
  CHECK(ks.viscosity_active());
  CHECK(ks.viscosity_multiplier(64, false).isOnes());
}

TEST_CASE("lambda convexity constant") {
  KernelSet ks = default_set(0.1, 0.4, std::sqrt(0.4), 0.2);
  LambdaEstimate l = lambda_convexity_constant(ks);
  CHECK(l.lambda <= 0.0);
  // dense second differencing of the tabulated pair potential
  const KernelTable& K = ks.pair_potential();
  const int n = K.n();
  const double h = 1.0 / n;
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    double d2 = (K.values()[(j + 1) % n] - 2 * K.values()[j] + K.values()[(j + n - 1) % n]) / (h * h);
    worst = std::max(worst, -d2);
  }
  CHECK(std::abs(-l.lambda - worst) / worst < 0.02);

  double prev = 0.0;
  for (double alpha : {0.2, 0.1, 0.05}) {
    double lam = lambda_convexity_constant(default_set(0.1, 0.25, 0.5, alpha)).lambda;
    CHECK(std::abs(lam) > prev);
    prev = std::abs(lam);
  }
  ScheduleOverrides z;
  z.epsilon_tilde = 0.25;
  z.epsilon_star = 0.5;
  z.alpha = 0.0;
  KernelOptions ko;
  ko.resolution = 1024;
  CHECK_THROWS(lambda_convexity_constant(KernelSet(schedule_from_epsilon(0.1, 1, z), ko)));
}

TEST_CASE("2D kernels are admissible") {
  KernelFamily w = make_mollifier(MollifierKind::CompactBump, 0.1, 2, 2 * 0.01, 256);
  AdmissibilityReport r = w.check();
  CHECK_MESSAGE(r.passed(), r.summary());
  KernelTable t = w.table();
  Vector x(2);
  x << 0.03, -0.07;
  Vector g1 = t.gradient(x), g2 = t.gradient(Vector(-x));
  CHECK((g1 + g2).norm() == 0.0);
  CHECK(t.value(x) == t.value(Vector(-x)));
}
