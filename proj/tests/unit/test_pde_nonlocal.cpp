#include "dpa/fields.hpp"
#include "dpa/pde_nonlocal.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace dpa;

namespace {

const double kTwoPi = 2.0 * M_PI;

KernelSet grid_set(int n, int d = 1) {
  ScheduleOverrides o;
  o.epsilon_tilde = 0.25;
  o.epsilon_star = 0.5;
  o.alpha = 0.08;
  KernelOptions k;
  k.resolution = n;
  k.tabulate_viscosity = false;
  return KernelSet(schedule_from_epsilon(0.1, d, o), k);
}

GridField smooth(int n) {
  return GridField::sample(1, n, [](const Vector& x) { return 1.0 + 0.5 * std::sin(kTwoPi * x[0]); });
}

}  // namespace

TEST_CASE("constant density is an exact steady state") {
  KernelSet ks = grid_set(128);
  GridField one(1, 128, Vector::Ones(128));
  GridField next = step_nonlocal(one, ks, 1e-3, 0.0);
  CHECK((next.values().array() - 1.0).abs().maxCoeff() <= 1e-13);
  CHECK(cfl_limit(face_velocities(one, ks)) > 1e6);
}

TEST_CASE("heat flow decays the first mode at the analytic rate") {
  KernelSet ks = grid_set(128);
  NonlocalConfig cfg;
  cfg.T = 0.01;
  cfg.dt = 1e-4;
  cfg.nu = 1.0;
  cfg.transport = false;
  cfg.energy_trace = false;
  GridField rho = GridField::sample(1, 128, [](const Vector& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  NonlocalRun run = run_nonlocal(rho, ks, cfg);
  GridField f = run.final_state();
  double amp = (f.values().array() - 1.0).abs().maxCoeff();
  double exact = 0.5 * std::exp(-cfg.nu * kTwoPi * kTwoPi * cfg.T);
  CHECK(std::abs(amp - exact) <= 0.02 * exact);

  NonlocalConfig bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS(run_nonlocal(rho, ks, bad));
}

TEST_CASE("CFL violation names the admissible step") {
  KernelSet ks = grid_set(256);
  GridField rho = smooth(256);
  auto faces = face_velocities(rho, ks);
  double limit = cfl_limit(faces);
  CHECK(std::isfinite(limit));
  CHECK_NOTHROW(step_nonlocal(rho, faces, 0.9 * limit, 0.0));
  try {
    step_nonlocal(rho, faces, 2.0 * limit, 0.0);
    FAIL("expected a CFL error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("admissible dt") != std::string::npos);
  }
}

TEST_CASE("default run: mass, positivity and energy") {
  KernelSet ks = grid_set(256);
  NonlocalConfig cfg;
  cfg.T = 0.01;
  NonlocalRun run = run_nonlocal(smooth(256), ks, cfg);
  CHECK(run.steps > 0);
  CHECK(run.max_mass_drift <= 1e-12);
  CHECK(run.min_value >= -1e-12);
  double dt = *std::max_element(run.step_sizes.begin(), run.step_sizes.end());
  CHECK(run.max_energy_increase <= 10.0 * dt * dt);
  CHECK(run.times.back() == doctest::Approx(cfg.T));
  for (const auto& e : run.energy) CHECK(e.identity_residual() < 1e-10);
}

TEST_CASE("2D run stays nonnegative") {
  KernelSet ks = grid_set(96, 2);
  NonlocalConfig cfg;
  cfg.T = 0.002;
  GridField rho = GridField::sample(2, 96, [](const Vector& x) {
    return 1.0 + 0.5 * std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]);
  });
  NonlocalRun run = run_nonlocal(rho, ks, cfg);
  CHECK(run.min_value >= -1e-12);
  CHECK(run.max_mass_drift <= 1e-12);
}

TEST_CASE("viscosity sequence") {
  KernelSet ks = grid_set(256);
  NonlocalConfig cfg;
  cfg.T = 0.01;
  cfg.energy_trace = false;
  GridField rho = smooth(256);

  NuSequenceRun single = run_nonlocal(rho, ks, cfg, {1e-2});
  REQUIRE(single.runs.size() == 1);
  CHECK(single.l2_differences.empty());
  NonlocalConfig one = cfg;
  one.nu = 1e-2;
  CHECK(l2_distance(single.runs[0].final_state(), run_nonlocal(rho, ks, one).final_state()) == 0.0);

  NuSequenceRun seq = run_nonlocal(rho, ks, cfg, {1e-2, 5e-3, 2.5e-3});
  REQUIRE(seq.l2_differences.size() == 2);
  CHECK(seq.l2_differences[1] < seq.l2_differences[0]);
}

TEST_CASE("grid distances") {
  GridField a = smooth(64), b(1, 64, Vector::Ones(64));
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l2_distance(a, b) == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-10));
  CHECK(l1_distance(a, b) == doctest::Approx(1.0 / M_PI).epsilon(1e-3));
}
