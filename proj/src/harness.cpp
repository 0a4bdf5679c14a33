#include "dpa/harness.hpp"

#include "dpa/io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dpa {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

int quantile_grid(const Scenario& s) {
  if (s.particles.init_grid > 0) return s.particles.init_grid;
  return s.dim == 1 ? 4096 : s.dim == 2 ? 512 : 64;
}

double momentum_of(const Matrix& v) {
  if (v.cols() == 0) return 0.0;
  // compensated column sum per axis
  double worst = 0.0;
  for (Index a = 0; a < v.rows(); ++a) {
    double sum = 0.0, c = 0.0;
    for (Index i = 0; i < v.cols(); ++i) {
      double x = v(a, i), t = sum + x;
      c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    worst = std::max(worst, std::abs(sum + c) / static_cast<double>(v.cols()));
  }
  return worst;
}

void add_check(std::vector<InvariantCheck>& out, std::string name, double value, double tol) {
  out.push_back({std::move(name), value <= tol, value, tol});
}

std::string context(const Scenario& s, const std::string& engine) {
  return "scenario '" + s.name + "', engine " + engine + ": ";
}

}  // namespace

bool RunArtifacts::invariants_hold() const {
  for (const auto& c : invariants)
    if (!c.passed) return false;
  return true;
}

ScenarioKernels build_kernels(const Scenario& s, bool need_particle_tables) {
  ScenarioKernels k;
  const ParameterSchedule sc = s.schedule();
  if (need_particle_tables) k.particle = std::make_shared<const KernelSet>(sc, s.kernels);
  KernelOptions g = s.kernels;
  g.resolution = s.grid_n;
  g.tabulate_viscosity = false;
  k.grid = std::make_shared<const KernelSet>(sc, g);
  return k;
}

ParticleState initial_particles(const Scenario& s) {
  GridField rho0 = initial_density(s.initial, s.dim, quantile_grid(s), s.seed);
  return init_quantile(rho0, s.particles.N);
}

ParticleRun run_particles(const Scenario& s, const ScenarioKernels& k) {
  return run_particles(s, k, initial_particles(s), s.T);
}

ParticleRun run_particles(const Scenario& s, const ScenarioKernels& k, const ParticleState& start, double T) {
  if (!k.particle) throw std::invalid_argument("run_particles: particle kernel tables not built");
  ParticleSystem sys(k.particle);
  ParticleRun run;
  run.stable_dt = sys.stable_dt();
  run.dt = s.particles.dt > 0.0 ? s.particles.dt : s.particles.dt_fraction * run.stable_dt;
  const bool quadratic = s.m == 2.0;
  const bool energy = s.has_metric("energy");
  const KernelTable& wt = k.particle->omega_tilde().table();
  ParticleState state = start;
  auto sample = [&](double dt, bool with_kde) {
    ParticleEnergySample e;
    e.t = state.time;
    e.dt = dt;
    e.discrete_energy = quadratic ? sys.discrete_energy(state) : std::numeric_limits<double>::quiet_NaN();
    e.momentum = momentum_of(sys.velocity(state.positions));
    e.kde_free_energy = std::numeric_limits<double>::quiet_NaN();
    if (with_kde && energy)
      e.kde_free_energy = free_energy(kde_density(state, wt, s.grid_n), *k.grid, state.time).F_eps_alpha;
    run.max_momentum = std::max(run.max_momentum, e.momentum);
    run.energy.push_back(e);
  };
  run.snapshots.push_back(state);
  sample(0.0, true);
  const double tol = 1e-12 * std::max(1.0, T);
  while (state.time < T - tol) {
    double dt = std::min(run.dt, T - state.time);
    StepResult r = sys.step(state, dt, s.particles.integrator);
    if (r.dt_exceeded) ++run.dt_exceeded_steps;
    double t_next = state.time + dt;
    state = std::move(r.state);
    state.time = t_next;
    ++run.steps;
    bool last = !(state.time < T - tol);
    bool snap = last || (s.particles.cadence > 0 && run.steps % s.particles.cadence == 0);
    if (!state.positions.allFinite()) throw std::runtime_error("run_particles: non-finite positions at t=" + std::to_string(state.time));
    sample(dt, snap);
    if (snap) run.snapshots.push_back(state);
  }
  if (run.snapshots.size() == 1) run.snapshots.push_back(state);
  return run;
}

NonlocalRun run_nl_grid(const Scenario& s, const ScenarioKernels& k) {
  GridField rho0 = initial_density(s.initial, s.dim, s.grid_n, s.seed);
  NonlocalConfig c = s.nonlocal;
  c.T = s.T;
  c.energy_trace = s.has_metric("energy");
  return run_nonlocal(rho0, *k.grid, c);
}

LocalRun run_local_grid(const Scenario& s) {
  GridField rho0 = initial_density(s.initial, s.dim, s.local.n, s.seed);
  LocalSolverConfig c = s.local;
  c.T = s.T;
  c.m = s.m;
  return run_local(rho0, c);
}

double w2_grids(const GridField& a, const GridField& b, Index max_atoms) {
  if (a.dim() == 1) return w2_circle_exact(grid_to_measure(a), grid_to_measure(b)).distance;
  return w2_exact_lp(grid_to_measure(a, max_atoms), grid_to_measure(b, max_atoms)).distance;
}

double w2_particles_grid(const ParticleState& p, const GridField& g, Index max_atoms) {
  DiscreteMeasure mu = particles_to_measure(p.positions);
  if (g.dim() == 1) return w2_circle_exact(mu, grid_to_measure(g)).distance;
  return w2_exact_lp(mu, grid_to_measure(g, max_atoms)).distance;
}

RunArtifacts run_scenario(const Scenario& s, const fs::path& out) {
  validate_scenario(s);
  RunArtifacts art;
  art.dir = out;
  const bool write = !out.empty();
  if (write) fs::create_directories(out);
  auto t_all = Clock::now();
  std::optional<Manifest> manifest;
  if (write) {
    manifest.emplace(out);
    manifest->set_scenario(s.name, config_hash(s), s.seed);
    if (s.engines.empty()) {
      manifest->write();
      art.seconds["total"] = seconds_since(t_all);
      return art;
    }
    auto f = open_out(out / "scenario.yaml");
    f << canonical_form(s);
    f.close();
    manifest->add("scenario.yaml", "scenario-yaml/v1");
  }

  const bool any_engine = !s.engines.empty();
  std::optional<ScenarioKernels> kernels;
  if (any_engine) {
    auto t0 = Clock::now();
    try {
      kernels = build_kernels(s, s.has_engine("particles"));
    } catch (const std::exception& e) {
      throw std::runtime_error(context(s, "kernels") + e.what());
    }
    art.seconds["kernels"] = seconds_since(t0);
  }

  if (s.has_engine("particles")) {
    auto t0 = Clock::now();
    try {
      art.particles = run_particles(s, *kernels);
    } catch (const std::exception& e) {
      throw std::runtime_error(context(s, "particles") + e.what());
    }
    const ParticleRun& pr = *art.particles;
    art.particle_kde = kde_density(pr.final_state(), kernels->particle->omega_tilde().table(), s.grid_n);
    art.seconds["particles"] = seconds_since(t0);
    add_check(art.invariants, "particles.count", std::abs(double(pr.final_state().count() - s.particles.N)), 0.0);
    if (s.m == 2.0) add_check(art.invariants, "particles.momentum", pr.max_momentum, 1e-12);
    if (write) {
      auto f = open_out(out / "snapshots.csv");
      write_snapshot_header(f, s.dim);
      for (const auto& st : pr.snapshots) write_snapshot(f, st);
      f.close();
      manifest->add("snapshots.csv", "snapshot-csv/v1");
      auto e = open_out(out / "particle_energy.csv");
      e << "t,dt,discrete_energy,kde_free_energy,momentum\n";
      for (const auto& x : pr.energy)
        e << x.t << ',' << x.dt << ',' << x.discrete_energy << ',' << x.kde_free_energy << ',' << x.momentum << '\n';
      e.close();
      manifest->add("particle_energy.csv", "particle-energy-csv/v1");
      write_binary(*art.particle_kde, (out / "particles_kde_final.bin").string());
      manifest->add("particles_kde_final.bin", "gridfield-bin/v1");
    }
  }

  if (s.has_engine("nl-grid")) {
    auto t0 = Clock::now();
    try {
      art.nonlocal = run_nl_grid(s, *kernels);
    } catch (const std::exception& e) {
      throw std::runtime_error(context(s, "nl-grid") + e.what());
    }
    const NonlocalRun& nr = *art.nonlocal;
    art.seconds["nl-grid"] = seconds_since(t0);
    add_check(art.invariants, "nl-grid.mass_drift", nr.max_mass_drift, 1e-10);
    add_check(art.invariants, "nl-grid.negativity", std::max(0.0, -nr.min_value), 1e-12);
    if (write) {
      if (!nr.energy.empty()) {
        auto e = open_out(out / "nl_energy.csv");
        write_energy_header(e, s.dim);
        for (const auto& r : nr.energy) write_energy_row(e, r);
        e.close();
        manifest->add("nl_energy.csv", "energy-csv/v1");
      }
      for (size_t i = 0; i < nr.snapshots.size(); ++i) {
        std::ostringstream name;
        name << "nl_snapshot_" << std::setw(4) << std::setfill('0') << i << ".bin";
        write_binary(nr.snapshots[i], (out / name.str()).string());
        manifest->add(name.str(), "gridfield-bin/v1");
      }
    }
  }

  if (s.has_engine("local-grid")) {
    auto t0 = Clock::now();
    try {
      art.local = run_local_grid(s);
    } catch (const std::exception& e) {
      throw std::runtime_error(context(s, "local-grid") + e.what());
    }
    const LocalRun& lr = *art.local;
    art.seconds["local-grid"] = seconds_since(t0);
    add_check(art.invariants, "local-grid.mass_drift", lr.max_mass_drift, 1e-10);
    add_check(art.invariants, "local-grid.modified_energy_increase", std::max(0.0, lr.max_energy_increase), 1e-10);
    if (write) {
      auto e = open_out(out / "local_energy.csv");
      e << "t,free_energy,modified_energy,mass,min_value\n";
      for (const auto& x : lr.energy)
        e << x.t << ',' << x.free_energy << ',' << x.modified_energy << ',' << x.mass << ',' << x.min_value << '\n';
      e.close();
      manifest->add("local_energy.csv", "local-energy-csv/v1");
      for (size_t i = 0; i < lr.snapshots.size(); ++i) {
        std::ostringstream name;
        name << "local_snapshot_" << std::setw(4) << std::setfill('0') << i << ".bin";
        write_binary(lr.snapshots[i], (out / name.str()).string());
        manifest->add(name.str(), "gridfield-bin/v1");
      }
    }
  }

  if (s.has_metric("w2")) {
    auto t0 = Clock::now();
    std::vector<std::pair<std::string, GridField>> grids;
    if (art.particle_kde) grids.emplace_back("particles-kde", *art.particle_kde);
    if (art.nonlocal) grids.emplace_back("nl-grid", art.nonlocal->final_state());
    if (art.local) grids.emplace_back("local-grid", art.local->final_state());
    for (size_t i = 0; i < grids.size(); ++i)
      for (size_t j = i + 1; j < grids.size(); ++j)
        art.metrics.push_back({"w2", grids[i].first, grids[j].first, s.T,
                               w2_grids(grids[i].second, grids[j].second, s.max_atoms)});
    if (art.particles)
      for (const auto& g : grids)
        if (g.first != "particles-kde")
          art.metrics.push_back({"w2", "particles", g.first, s.T,
                                 w2_particles_grid(art.particles->final_state(), g.second, s.max_atoms)});
    art.seconds["w2"] = seconds_since(t0);
  }

  if (write) {
    auto m = open_out(out / "metrics.csv");
    m << "quantity,a,b,t,value\n";
    for (const auto& r : art.metrics) m << r.quantity << ',' << r.a << ',' << r.b << ',' << r.t << ',' << r.value << '\n';
    m.close();
    manifest->add("metrics.csv", "metrics-csv/v1");
    auto inv = open_out(out / "invariants.csv");
    inv << "name,passed,value,tolerance\n";
    for (const auto& c : art.invariants) inv << c.name << ',' << (c.passed ? 1 : 0) << ',' << c.value << ',' << c.tolerance << '\n';
    inv.close();
    manifest->add("invariants.csv", "invariants-csv/v1");
    art.seconds["total"] = seconds_since(t_all);
    nlohmann::ordered_json tj;
    for (const auto& [k, v] : art.seconds) tj[k] = v;
    auto t = open_out(out / "timing.json");
    t << tj.dump(2) << '\n';
    t.close();
    manifest->add("timing.json", "timing-json/v1", false);
    manifest->write();
  } else {
    art.seconds["total"] = seconds_since(t_all);
  }
  return art;
}

namespace {

double w2_kde_nl(const RunArtifacts& a, Index max_atoms) {
  return w2_grids(*a.particle_kde, a.nonlocal->final_state(), max_atoms);
}

}  // namespace

std::vector<SweepRow> convergence_sweep(const Scenario& base, const std::vector<double>& eps_list, const fs::path& out) {
  if (eps_list.size() < 3) throw std::invalid_argument("convergence_sweep: need at least 3 epsilon values");
  for (size_t i = 1; i < eps_list.size(); ++i)
    if (eps_list[i] > eps_list[i - 1]) throw std::invalid_argument("convergence_sweep: epsilon list must be non-increasing");
  std::optional<LocalRun> local;
  if (base.has_engine("local-grid")) local = run_local_grid(base);
  std::vector<SweepRow> rows;
  for (size_t i = 0; i < eps_list.size(); ++i) {
    Scenario s = base;
    s.epsilon = eps_list[i];
    s.overrides.epsilon_tilde.reset();
    s.overrides.epsilon_star.reset();
    s.overrides.alpha.reset();
    s.engines.clear();
    for (const auto& e : base.engines)
      if (e != "local-grid") s.engines.push_back(e);
    s.metrics = {};
    std::ostringstream name;
    name << "eps_" << std::setw(2) << std::setfill('0') << i;
    RunArtifacts a = run_scenario(s, out.empty() ? fs::path{} : out / name.str());
    SweepRow row;
    row.schedule = s.schedule();
    row.N = s.has_engine("particles") ? s.particles.N : 0;
    if (local && a.particle_kde) row.w2_particle_kde_local = w2_grids(*a.particle_kde, local->final_state(), s.max_atoms);
    if (local && a.nonlocal) row.w2_nl_local = w2_grids(a.nonlocal->final_state(), local->final_state(), s.max_atoms);
    if (a.particle_kde && a.nonlocal) {
      row.w2_particle_kde_nl = w2_kde_nl(a, s.max_atoms);
      row.w2_particle_empirical_nl = w2_particles_grid(a.particles->final_state(), a.nonlocal->final_state(), s.max_atoms);
    }
    rows.push_back(row);
  }
  if (!out.empty()) write_sweep_csv(rows, out / "sweep.csv");
  return rows;
}

std::vector<SweepRow> particle_count_sweep(const Scenario& base, const std::vector<Index>& counts, const fs::path& out) {
  if (!base.has_engine("particles") || !base.has_engine("nl-grid"))
    throw std::invalid_argument("particle_count_sweep: scenario needs the particles and nl-grid engines");
  Scenario s = base;
  s.engines = {"nl-grid"};
  s.metrics = {};
  ScenarioKernels k = build_kernels(base, true);
  NonlocalRun nl = run_nl_grid(s, k);
  GridField nl_smoothed = periodic_convolve(nl.final_state(), k.grid->omega_tilde().table());
  std::vector<SweepRow> rows;
  for (Index N : counts) {
    Scenario p = base;
    p.particles.N = N;
    p.metrics = {};
    ParticleRun pr = run_particles(p, k);
    GridField kde = kde_density(pr.final_state(), k.particle->omega_tilde().table(), p.grid_n);
    SweepRow row;
    row.schedule = p.schedule();
    row.N = N;
    row.w2_particle_kde_nl = w2_grids(kde, nl.final_state(), p.max_atoms);
    row.w2_particle_kde_nl_smoothed = w2_grids(kde, nl_smoothed, p.max_atoms);
    row.w2_particle_empirical_nl = w2_particles_grid(pr.final_state(), nl.final_state(), p.max_atoms);
    rows.push_back(row);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_sweep_csv(rows, out / "sweep.csv");
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
  auto f = open_out(path);
  f << "epsilon,epsilon_tilde,epsilon_star,alpha,N,w2_particle_kde_local,w2_nl_local,w2_particle_kde_nl,"
       "w2_particle_kde_nl_smoothed,w2_particle_empirical_nl\n";
  for (const auto& r : rows)
    f << r.schedule.epsilon << ',' << r.schedule.epsilon_tilde << ',' << r.schedule.epsilon_star << ','
      << r.schedule.alpha << ',' << r.N << ',' << r.w2_particle_kde_local << ',' << r.w2_nl_local << ','
      << r.w2_particle_kde_nl << ',' << r.w2_particle_kde_nl_smoothed << ',' << r.w2_particle_empirical_nl << '\n';
}

ContractionReport contraction_test(const Scenario& s, double delta, double t_max, const fs::path& out) {
  if (s.m != 2.0) throw std::invalid_argument("contraction_test: requires m = 2");
  if (!(s.schedule().alpha > 0.0)) throw std::invalid_argument("contraction_test: requires alpha > 0");
  if (delta < 0.0) throw std::invalid_argument("contraction_test: delta must be nonnegative");
  ScenarioKernels k = build_kernels(s, true);
  ContractionReport rep;
  rep.delta = delta;
  rep.lambda = lambda_convexity_constant(*k.particle).lambda;
  ParticleSystem sys(k.particle);
  const double dt = s.particles.dt > 0.0 ? s.particles.dt : s.particles.dt_fraction * sys.stable_dt();
  ParticleState a = initial_particles(s);
  ParticleState b = a;
  std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Index i = 0; i < b.count(); ++i)
    for (int d = 0; d < s.dim; ++d) b.positions(d, i) = wrap_coordinate(b.positions(d, i) + delta * u(rng));
  auto dist = [&]() {
    DiscreteMeasure ma = particles_to_measure(a.positions), mb = particles_to_measure(b.positions);
    return w2_distance(ma, mb);
  };
  rep.w2_initial = dist();
  const double rate = std::abs(rep.lambda);
  auto record = [&](double t) {
    ContractionSample c;
    c.t = t;
    c.w2 = t == 0.0 ? rep.w2_initial : dist();
    c.envelope = std::exp(rate * t) * rep.w2_initial;
    c.ratio = c.envelope > 0.0 ? c.w2 / c.envelope : (c.w2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.max_ratio = std::max(rep.max_ratio, c.ratio);
    if (c.ratio > 1.01 && rep.offending_time < 0.0) rep.offending_time = t;
    rep.samples.push_back(c);
  };
  record(0.0);
  double t = 0.0;
  const double tol = 1e-12;
  while (t < t_max - tol) {
    double h = std::min(dt, t_max - t);
    a = sys.step(a, h, s.particles.integrator).state;
    b = sys.step(b, h, s.particles.integrator).state;
    t += h;
    record(t);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    auto f = open_out(out / "contraction.csv");
    f << "t,w2,envelope,ratio\n";
    for (const auto& c : rep.samples) f << c.t << ',' << c.w2 << ',' << c.envelope << ',' << c.ratio << '\n';
  }
  return rep;
}

}  // namespace dpa
