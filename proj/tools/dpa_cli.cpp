// dpa: run scenarios, sweeps and contraction tests; compare densities in W2.

#include "dpa/harness.hpp"
#include "dpa/io.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace dpa;

namespace {

constexpr int kOk = 0, kError = 1, kViolation = 2;

struct Common {
  std::optional<unsigned long long> seed;
  std::string out;
  int threads = 0;
  bool appendix_a = false;
};

Scenario load(const std::string& path, const Common& c) {
  Scenario s = load_scenario(path);
  if (c.seed) s.seed = *c.seed;
  if (c.appendix_a) s.kernels.appendix_a_mode = true;
  validate_scenario(s);
  return s;
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--seed", c.seed, "Override the scenario seed");
  if (with_out) app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker threads (results do not depend on it)");
  app->add_flag("--appendix-a-mode", c.appendix_a, "Drop the viscosity particle term");
}

bool is_snapshot_csv(const std::string& path) {
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  return header.rfind("t,particle_id", 0) == 0;
}

DiscreteMeasure load_measure(const std::string& path) {
  bool csv = fs::path(path).extension() == ".csv";
  if (csv && is_snapshot_csv(path)) return particles_to_measure(read_last_snapshot(path).positions);
  GridField g = csv ? read_csv(path) : read_binary(path);
  return grid_to_measure(g, g.dim() == 1 ? 0 : 2500);
}

void print_report(const std::string& what, const AdmissibilityReport& r) {
  std::cout << what << ": " << (r.passed() ? "admissible" : "NOT admissible") << '\n' << r.summary() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic particle approximation of the fourth-order adhesion equation"};
  app.require_subcommand(1);
  Common common;

  std::string config;
  auto* simulate = app.add_subcommand("simulate", "Run every engine of a scenario");
  simulate->add_option("config", config, "Scenario file (YAML or JSON)")->required();
  add_common(simulate, common);

  std::vector<double> eps;
  std::vector<long> counts;
  auto* sweep = app.add_subcommand("sweep", "Convergence sweep over epsilon or particle count");
  sweep->add_option("config", config, "Scenario file")->required();
  auto* eps_opt = sweep->add_option("--eps", eps, "Decreasing epsilon values");
  auto* n_opt = sweep->add_option("--N", counts, "Particle counts");
  eps_opt->excludes(n_opt);
  add_common(sweep, common);

  double delta = 1e-3, t_max = 0.1;
  auto* contraction = app.add_subcommand("contraction", "Twin-run lambda-contraction test");
  contraction->add_option("config", config, "Scenario file")->required();
  contraction->add_option("--delta", delta, "Perturbation size")->default_val(1e-3);
  contraction->add_option("--t-max", t_max, "Final time")->default_val(0.1);
  add_common(contraction, common);

  std::string file_a, file_b;
  auto* w2 = app.add_subcommand("w2", "W2 distance between two densities or snapshot files");
  w2->add_option("fileA", file_a)->required()->check(CLI::ExistingFile);
  w2->add_option("fileB", file_b)->required()->check(CLI::ExistingFile);

  auto* kernels = app.add_subcommand("kernels", "Kernel utilities");
  kernels->require_subcommand(1);
  std::string export_dir;
  auto* inspect = kernels->add_subcommand("inspect", "Admissibility, Lipschitz bound and lambda of a scenario");
  inspect->add_option("config", config, "Scenario file")->required();
  inspect->add_option("--export", export_dir, "Write kernel tables as CSV into this directory");
  add_common(inspect, common, false);

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (common.threads > 0) omp_set_num_threads(common.threads);
#endif

  try {
    if (*simulate) {
      Scenario s = load(config, common);
      fs::path out = common.out.empty() ? fs::path("runs") / s.name : fs::path(common.out);
      RunArtifacts a = run_scenario(s, out);
      std::cout << std::setprecision(10);
      for (const auto& m : a.metrics) std::cout << m.quantity << '(' << m.a << ", " << m.b << ") = " << m.value << '\n';
      for (const auto& c : a.invariants)
        std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << " = " << c.value << " (tol " << c.tolerance << ")\n";
      std::cout << "outputs in " << out.string() << '\n';
      return a.invariants_hold() ? kOk : kViolation;
    }
    if (*sweep) {
      Scenario s = load(config, common);
      fs::path out = common.out.empty() ? fs::path("runs") / (s.name + "-sweep") : fs::path(common.out);
      std::vector<SweepRow> rows;
      if (!counts.empty()) {
        std::vector<Index> n(counts.begin(), counts.end());
        rows = particle_count_sweep(s, n, out);
      } else {
        if (eps.empty()) throw std::invalid_argument("sweep: give --eps or --N");
        rows = convergence_sweep(s, eps, out);
      }
      std::ifstream in(out / "sweep.csv");
      std::cout << in.rdbuf();
      return kOk;
    }
    if (*contraction) {
      Scenario s = load(config, common);
      fs::path out = common.out.empty() ? fs::path("runs") / (s.name + "-contraction") : fs::path(common.out);
      ContractionReport r = contraction_test(s, delta, t_max, out);
      std::cout << std::setprecision(10) << "lambda = " << r.lambda << "\nW2(0) = " << r.w2_initial
                << "\nmax ratio = " << r.max_ratio << '\n';
      if (!r.passed()) {
        std::cout << "envelope violated at t = " << r.offending_time << '\n';
        return kViolation;
      }
      std::cout << "envelope holds\n";
      return kOk;
    }
    if (*w2) {
      DiscreteMeasure a = load_measure(file_a), b = load_measure(file_b);
      if (a.dim() != b.dim()) throw std::invalid_argument("w2: dimension mismatch");
      std::cout << std::setprecision(17) << w2_distance(a, b) << '\n';
      return kOk;
    }
    if (*inspect) {
      Scenario s = load(config, common);
      ScenarioKernels k = build_kernels(s, true);
      const KernelSet& ks = *k.particle;
      std::cout << ks.schedule().describe() << '\n';
      bool ok = true;
      auto rw = ks.omega().check(), rt = ks.omega_tilde().check();
      print_report("omega", rw);
      print_report("omega_tilde", rt);
      ok = rw.passed() && rt.passed();
      if (ks.viscosity()) {
        auto rv = ks.viscosity()->check();
        print_report("R_alpha", rv);
        ok = ok && rv.passed();
      }
      ParticleSystem sys(k.particle);
      std::cout << std::setprecision(10) << "Lipschitz bound = " << sys.lipschitz_bound()
                << "\nstable dt = " << sys.stable_dt() << '\n';
      if (ks.has_pair_potential() && ks.schedule().alpha > 0.0) {
        LambdaEstimate l = lambda_convexity_constant(ks);
        std::cout << "lambda = " << l.lambda << " (c_lambda = " << l.c_lambda << ", scaling = " << l.scaling << ")\n";
      }
      if (!export_dir.empty()) {
        fs::create_directories(export_dir);
        export_table_csv(ks.omega().table(), (fs::path(export_dir) / "omega.csv").string());
        export_table_csv(ks.omega_tilde().table(), (fs::path(export_dir) / "omega_tilde.csv").string());
        export_table_csv(ks.W_eps(), (fs::path(export_dir) / "W_eps.csv").string());
        if (ks.has_pair_potential())
          export_table_csv(ks.pair_potential(), (fs::path(export_dir) / "pair_potential.csv").string());
      }
      return ok ? kOk : kViolation;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kOk;
}
