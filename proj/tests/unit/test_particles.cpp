#include "dpa/kernels.hpp"
#include "dpa/particles.hpp"
#include "dpa/transport.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <filesystem>
#include <fstream>

using namespace dpa;

namespace {

std::shared_ptr<const KernelSet> make_set(double eps, double tilde, double star, double alpha, int d = 1,
                                          bool appendix_a = false, double m = 2.0) {
  ScheduleOverrides o;
  o.epsilon_tilde = tilde;
  o.epsilon_star = star;
  o.alpha = alpha;
  o.m = m;
  KernelOptions k;
  k.appendix_a_mode = appendix_a;
  return std::make_shared<const KernelSet>(schedule_from_epsilon(eps, d, o), k);
}

ParticleState random_state(Index N, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ParticleState s;
  s.positions = Matrix::NullaryExpr(d, N, [&]() { return u(rng); });
  return s;
}

double profile1(const KernelFamily& k, double x) { return k.profile(Vector::Constant(1, x)); }
double dprofile1(const KernelFamily& k, double x) { return k.profile_gradient(Vector::Constant(1, x))[0]; }

// (w~ * w~)(x), (w * w~ * w~)(x) and their derivatives on the line by nested quadrature.
struct LineConvolutions {
  const KernelFamily& w;
  const KernelFamily& wt;
  double tol = 1e-10;

  double A(double x, bool derivative = false) const {
    double Rt = wt.support_radius();
    double lo = std::max(-Rt, x - Rt), hi = std::min(Rt, x + Rt);
    if (lo >= hi) return 0.0;
    return oracle::quad(
        [&](double y) { return profile1(wt, y) * (derivative ? dprofile1(wt, x - y) : profile1(wt, x - y)); }, lo,
        hi, tol, {0.0, x});
  }
  double B(double x, bool derivative = false) const {
    double R = w.support_radius(), Rt = wt.support_radius();
    return oracle::quad([&](double y) { return profile1(w, y) * A(x - y, derivative); }, -R, R, 100 * tol,
                        {0.0, x - 2 * Rt, x + 2 * Rt, x});
  }
  // periodized (A - B)/eps^2 + c A; c = -2 gives the viscosity-free pair potential
  double periodized(double x, double eps, double c, bool derivative = false) const {
    double reach = 2 * wt.support_radius() + w.support_radius();
    double s = 0.0;
    for (int k = -2; k <= 2; ++k) {
      double y = x + k;
      if (std::abs(y) > reach) continue;
      double a = A(y, derivative);
      s += (a - B(y, derivative)) / (eps * eps) + c * a;
    }
    return s;
  }
  double K(double x, double eps) const { return periodized(x, eps, -2.0); }
};

}  // namespace

TEST_CASE("quantile initialization") {
  GridField uniform(1, 64, Vector::Ones(64));
  ParticleState s = init_quantile(uniform, 4);
  REQUIRE(s.count() == 4);
  for (int i = 0; i < 4; ++i) CHECK(s.positions(0, i) == doctest::Approx(0.125 + 0.25 * i).epsilon(1e-12));

  GridField spike(1, 64, Vector::Zero(64));
  spike[20] = 64.0;
  ParticleState t = init_quantile(spike, 10);
  for (Index i = 0; i < t.count(); ++i) {
    CHECK(t.positions(0, i) >= 20.0 / 64 - 0.5 / 64);
    CHECK(t.positions(0, i) <= 20.0 / 64 + 0.5 / 64);
  }

  CHECK_THROWS(init_quantile(uniform, 0));
  GridField negative = uniform;
  negative[3] = -1.0;
  CHECK_THROWS(init_quantile(negative, 4));
}

TEST_CASE("quantile initialization converges in W2") {
  GridField rho = GridField::sample(1, 4096, [](const Vector& x) { return 1.0 + 0.5 * std::sin(2 * M_PI * x[0]); });
  DiscreteMeasure target = grid_to_measure(rho);
  double w32 = w2_distance(particles_to_measure(init_quantile(rho, 32).positions), target);
  double w64 = w2_distance(particles_to_measure(init_quantile(rho, 64).positions), target);
  CHECK(w64 < w32);
  CHECK(w64 < 0.6 * w32);
}

TEST_CASE("product quantiles in 2D stay inside the torus") {
  GridField rho = GridField::sample(2, 64, [](const Vector& x) {
    return 1.0 + 0.3 * std::cos(2 * M_PI * x[0]) * std::sin(2 * M_PI * x[1]);
  });
  ParticleState s = init_quantile(rho, 100);
  CHECK(s.count() == 100);
  CHECK(s.positions.minCoeff() >= 0.0);
  CHECK(s.positions.maxCoeff() < 1.0);
}

TEST_CASE("forces: trivial configurations and antisymmetry") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  ParticleSystem sys(ks);
  ParticleState one;
  one.positions = Matrix::Constant(1, 1, 0.3);
  ForceField f1 = sys.compute_forces(one);
  CHECK(f1.total.cwiseAbs().maxCoeff() == 0.0);

  ParticleState two;
  two.positions.resize(1, 2);
  two.positions << 0.2, 0.33;
  ForceField f = sys.compute_forces(two);
  CHECK(f.interaction(0, 0) == -f.interaction(0, 1));
  CHECK(f.aggregation(0, 0) == -f.aggregation(0, 1));
  CHECK(f.viscosity(0, 0) == -f.viscosity(0, 1));
  CHECK(std::abs(f.total(0, 0) + f.total(0, 1)) <= 1e-12 * f.total.cwiseAbs().maxCoeff());

  auto appendix = make_set(0.1, 0.25, 0.5, 0.08, 1, true);
  ForceField fa = ParticleSystem(appendix).compute_forces(two);
  CHECK(fa.viscosity.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fa.interaction(0, 0) == doctest::Approx(f.interaction(0, 0)));
}

TEST_CASE("interaction force against nested quadrature of the convolution definition") {
  const double eps = 0.05, tilde = 0.25;
  auto ks = make_set(eps, tilde, 0.5, 0.08);
  ParticleSystem sys(ks);
  ParticleState two;
  two.positions.resize(1, 2);
  two.positions << 0.4, 0.5;
  ForceField f = sys.compute_forces(two);
  LineConvolutions q{ks->omega(), ks->omega_tilde(), 1e-9};
  double grad_W = q.periodized(-0.1, eps, 0.0, true);
  double expected = -grad_W / 2.0;
  CHECK(std::abs(f.interaction(0, 0) - expected) <= 1e-4 * std::abs(expected));
}

TEST_CASE("discrete energy") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  ParticleSystem sys(ks);
  ParticleState one;
  one.positions = Matrix::Constant(1, 1, 0.7);
  CHECK(sys.discrete_energy(one) == doctest::Approx(0.5 * ks->pair_potential().value(Vector::Zero(1))));

  ParticleState s = random_state(7, 1, 5);
  ParticleState shifted = s;
  shifted.positions.array() += 0.37;
  wrap_in_place(shifted.positions);
  CHECK(sys.discrete_energy(shifted) == doctest::Approx(sys.discrete_energy(s)).epsilon(1e-12));

  auto general = make_set(0.1, 0.25, 0.5, 0.08, 1, false, 3.0);
  CHECK_THROWS(ParticleSystem(general).discrete_energy(s));
}

TEST_CASE("discrete energy against a brute-force pairwise quadrature sum") {
  const double eps = 0.1;
  auto ks = make_set(eps, 0.25, 0.5, 0.08, 1, true);
  ParticleSystem sys(ks);
  ParticleState s;
  s.positions.resize(1, 3);
  s.positions << 0.12, 0.31, 0.77;
  LineConvolutions q{ks->omega(), ks->omega_tilde(), 1e-9};
  double sum = 3.0 * q.K(0.0, eps);  // diagonal; K is even
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      double d = s.positions(0, i) - s.positions(0, j);
      sum += 2.0 * q.K(d - std::round(d), eps);
    }
  double expected = sum / (2.0 * 9.0);
  CHECK(std::abs(sys.discrete_energy(s) - expected) <= 1e-4 * std::abs(expected));
}

TEST_CASE("forces are minus N times the energy gradient") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  ParticleSystem sys(ks);
  ParticleState s = random_state(5, 1, 11);
  ForceField f = sys.compute_forces(s);
  const Index N = s.count();
  auto energy = [&](const Vector& flat) {
    ParticleState t;
    t.positions = Eigen::Map<const Matrix>(flat.data(), 1, N);
    return sys.discrete_energy(t);
  };
  Vector x = Eigen::Map<const Vector>(s.positions.data(), N);
  Vector g = oracle::fd_gradient(energy, x, 1e-6);
  Vector force = Eigen::Map<const Vector>(f.total.data(), N);
  CHECK((force + double(N) * g).norm() <= 1e-5 * force.norm());
}

TEST_CASE("momentum and permutation equivariance") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08, 2);
  ParticleSystem sys(ks);
  ParticleState s = random_state(20, 2, 3);
  ForceField f = sys.compute_forces(s);
  CHECK(f.total.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);

  std::vector<Index> perm(s.count());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  ParticleState p = s;
  for (Index i = 0; i < s.count(); ++i) p.positions.col(i) = s.positions.col(perm[i]);
  ForceField fp = sys.compute_forces(p);
  double worst = 0.0;
  for (Index i = 0; i < s.count(); ++i) worst = std::max(worst, (fp.total.col(i) - f.total.col(perm[i])).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-12 * f.total.cwiseAbs().maxCoeff());
}

TEST_CASE("integrators") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  ParticleSystem sys(ks);
  ParticleState one;
  one.positions = Matrix::Constant(1, 1, 0.4);
  CHECK(sys.step(one, 1e-3, Integrator::RK4).state.positions(0, 0) == 0.4);

  ParticleState s = random_state(10, 1, 4);
  auto gap = [&](double dt) {
    Matrix e = sys.step(s, dt, Integrator::Euler).state.positions;
    Matrix h = sys.step(s, dt, Integrator::Heun).state.positions;
    double worst = 0.0;
    for (Index i = 0; i < e.size(); ++i) worst = std::max(worst, std::abs(min_image_coordinate(e(i) - h(i))));
    return worst;
  };
  double order = std::log2(gap(1e-4) / gap(5e-5));
  CHECK(order == doctest::Approx(2.0).epsilon(0.05));

  ParticleState there = sys.step(s, 1e-4, Integrator::RK4).state;
  CHECK(there.time == doctest::Approx(1e-4));
  ParticleState back = sys.step(there, -1e-4, Integrator::RK4).state;
  double err = 0.0;
  for (Index i = 0; i < s.positions.size(); ++i)
    err = std::max(err, std::abs(min_image_coordinate(back.positions(i) - s.positions(i))));
  CHECK(err <= 1e-10);

  StepResult big = sys.step(s, 10.0 * sys.stable_dt(), Integrator::Euler);
  CHECK(big.dt_exceeded);
  CHECK(!sys.step(s, 0.5 * sys.stable_dt(), Integrator::Euler).dt_exceeded);
  CHECK(parse_integrator("heun") == Integrator::Heun);
  CHECK(to_string(Integrator::RK4) == "rk4");
  CHECK_THROWS(parse_integrator("leapfrog"));
}

TEST_CASE("stable dt") {
  auto narrow = make_set(0.1, 0.2, 0.5, 0.08);
  auto wide = make_set(0.1, 0.3, 0.5, 0.08);
  CHECK(ParticleSystem(wide).stable_dt() > ParticleSystem(narrow).stable_dt());

  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  auto doubled = std::make_shared<const KernelSet>(ks->scaled(2.0));
  double dt = ParticleSystem(ks).stable_dt();
  CHECK(ParticleSystem(doubled).stable_dt() == doctest::Approx(dt / 2.0).epsilon(1e-12));
}

TEST_CASE("Lipschitz bound matches finite-difference second derivatives of the tables") {
  auto ks = make_set(0.1, 0.25, 0.5, 0.08);
  ParticleSystem sys(ks);
  auto sup_fd2 = [](const KernelTable& t) {
    const double h = 1e-4;
    double best = 0.0;
    for (int i = 0; i < 20000; ++i) {
      double x = -0.5 + (i + 0.5) / 20000.0;
      auto v = [&](double y) { return t.value(Vector::Constant(1, y)); };
      best = std::max(best, std::abs((v(x + h) - 2 * v(x) + v(x - h)) / (h * h)));
    }
    return best;
  };
  double L = sup_fd2(ks->W_eps()) + 2.0 * sup_fd2(ks->aggregation()) +
             ks->schedule().epsilon_star * sup_fd2(ks->viscosity()->table());
  CHECK(std::abs(sys.lipschitz_bound() - L) <= 0.05 * L);
}

TEST_CASE("snapshot round trip") {
  ParticleState s = random_state(6, 2, 8);
  s.time = 0.25;
  auto path = std::filesystem::temp_directory_path() / "dpa_snapshot_test.csv";
  {
    std::ofstream out(path);
    write_snapshot_header(out, 2);
    ParticleState early = s;
    early.time = 0.0;
    write_snapshot(out, early);
    write_snapshot(out, s);
  }
  ParticleState r = read_last_snapshot(path.string());
  CHECK(r.time == 0.25);
  CHECK((r.positions - s.positions).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}
