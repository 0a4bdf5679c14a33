#include "dpa/scenario.hpp"

#include "dpa/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dpa {

namespace {

const std::set<std::string> kEngines = {"particles", "nl-grid", "local-grid"};
const std::set<std::string> kMetrics = {"energy", "w2"};

std::string kind_name(DensitySpec::Kind k) {
  switch (k) {
    case DensitySpec::Kind::UniformPlusModes: return "uniform-plus-modes";
    case DensitySpec::Kind::RandomFourier: return "random-fourier";
    case DensitySpec::Kind::File: return "file";
  }
  return "";
}

DensitySpec::Kind parse_kind(const std::string& s) {
  if (s == "uniform-plus-modes") return DensitySpec::Kind::UniformPlusModes;
  if (s == "random-fourier") return DensitySpec::Kind::RandomFourier;
  if (s == "file") return DensitySpec::Kind::File;
  throw std::invalid_argument("unknown initial density kind '" + s + "'");
}

void check_keys(const YAML::Node& node, const std::string& block, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw std::invalid_argument("scenario: block '" + block + "' must be a map");
  for (const auto& kv : node) {
    std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw std::invalid_argument("scenario: unknown key '" + key + "' in block '" + block + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

template <typename T>
void read_opt(const YAML::Node& node, const char* key, std::optional<T>& out) {
  if (node[key]) out = node[key].as<T>();
}

double evaluate(const std::vector<DensitySpec::Mode>& modes, const Vector& x) {
  double v = 1.0;
  for (const auto& md : modes) {
    double phase = 0.0;
    for (size_t a = 0; a < md.k.size(); ++a) phase += md.k[a] * x[static_cast<Index>(a)];
    phase *= 2.0 * M_PI;
    v += md.cos_coef * std::cos(phase) + md.sin_coef * std::sin(phase);
  }
  return v;
}

// Half lattice: first nonzero component positive.
bool in_half_lattice(const std::vector<int>& k) {
  for (int c : k)
    if (c != 0) return c > 0;
  return false;
}

}  // namespace

std::vector<DensitySpec::Mode> density_modes(const DensitySpec& spec, int dim, unsigned long long seed) {
  if (spec.kind == DensitySpec::Kind::UniformPlusModes) {
    for (const auto& md : spec.modes)
      if (static_cast<int>(md.k.size()) != dim)
        throw std::invalid_argument("initial density: mode wave vector has wrong dimension");
    return spec.modes;
  }
  if (spec.kind != DensitySpec::Kind::RandomFourier)
    throw std::invalid_argument("initial density: file densities have no mode list");
  if (spec.max_mode < 1) throw std::invalid_argument("random-fourier: max_mode must be >= 1");
  if (!(spec.amplitude >= 0.0 && spec.amplitude < 1.0))
    throw std::invalid_argument("random-fourier: amplitude must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<DensitySpec::Mode> modes;
  const int K = spec.max_mode, side = 2 * K + 1;
  int total = 1;
  for (int a = 0; a < dim; ++a) total *= side;
  for (int flat = 0; flat < total; ++flat) {
    std::vector<int> k(dim);
    int r = flat;
    for (int a = dim - 1; a >= 0; --a) {
      k[a] = r % side - K;
      r /= side;
    }
    if (!in_half_lattice(k)) continue;
    double k2 = 0.0;
    for (int c : k) k2 += double(c) * c;
    double sd = std::pow(1.0 + k2, -spec.decay / 2.0);
    DensitySpec::Mode md;
    md.k = k;
    md.cos_coef = sd * gauss(rng);
    md.sin_coef = sd * gauss(rng);
    modes.push_back(md);
  }
  // sup norm of f on a fixed fine lattice, independent of the output grid
  const int probe = dim == 1 ? 64 * K : 16 * K;
  GridField f = GridField::sample(dim, probe, [&](const Vector& x) { return evaluate(modes, x) - 1.0; });
  double sup = f.values().cwiseAbs().maxCoeff();
  double scale = sup > 0.0 ? spec.amplitude / sup : 0.0;
  for (auto& md : modes) {
    md.cos_coef *= scale;
    md.sin_coef *= scale;
  }
  return modes;
}

GridField initial_density(const DensitySpec& spec, int dim, int n, unsigned long long seed) {
  GridField rho;
  if (spec.kind == DensitySpec::Kind::File) {
    const std::string& p = spec.path;
    bool csv = p.size() >= 4 && p.substr(p.size() - 4) == ".csv";
    rho = csv ? read_csv(p) : read_binary(p);
    if (rho.dim() != dim) throw std::invalid_argument("initial density file has dimension " + std::to_string(rho.dim()));
    rho = resample(rho, n);
  } else {
    auto modes = density_modes(spec, dim, seed);
    rho = GridField::sample(dim, n, [&](const Vector& x) { return evaluate(modes, x); });
  }
  rho.require_finite("initial density");
  double lo = rho.values().minCoeff();
  if (lo < 0.0) {
    std::ostringstream os;
    os << "initial density is negative on the grid (min " << lo << ")";
    throw std::invalid_argument(os.str());
  }
  double mass = rho.mass();
  if (!(mass > 0.0)) throw std::invalid_argument("initial density has no mass");
  rho.values() /= mass;
  return rho;
}

ParameterSchedule Scenario::schedule() const {
  ScheduleOverrides o = overrides;
  o.m = m;
  return schedule_from_epsilon(epsilon, dim, o);
}

bool Scenario::has_engine(const std::string& e) const {
  return std::find(engines.begin(), engines.end(), e) != engines.end();
}

bool Scenario::has_metric(const std::string& x) const {
  return std::find(metrics.begin(), metrics.end(), x) != metrics.end();
}

void validate_scenario(const Scenario& s) {
  if (s.dim < 1 || s.dim > 3) throw std::invalid_argument("scenario: dimension must be 1, 2 or 3");
  if (!(s.T >= 0.0)) throw std::invalid_argument("scenario: T must be nonnegative");
  for (const auto& e : s.engines)
    if (!kEngines.count(e)) throw std::invalid_argument("scenario: unknown engine '" + e + "'");
  for (const auto& x : s.metrics)
    if (!kMetrics.count(x)) throw std::invalid_argument("scenario: unknown metric '" + x + "'");
  if (s.has_engine("particles") && s.particles.N <= 0) throw std::invalid_argument("scenario: particles.N must be positive");
  if (s.has_engine("local-grid") && s.dim > 2) throw std::invalid_argument("scenario: local-grid supports d <= 2");
  if (s.grid_n < 8) throw std::invalid_argument("scenario: grid_n too small");
  validate_schedule(s.schedule());
}

Scenario parse_scenario(const std::string& text) {
  YAML::Node root = YAML::Load(text);
  check_keys(root, "root",
             {"name", "dimension", "m", "seed", "T", "initial_density", "schedule", "kernels", "grid_n", "max_atoms",
              "engines", "metrics", "particles", "pde_nonlocal", "pde_local"});
  Scenario s;
  read(root, "name", s.name);
  read(root, "dimension", s.dim);
  read(root, "m", s.m);
  read(root, "seed", s.seed);
  read(root, "T", s.T);
  read(root, "grid_n", s.grid_n);
  read(root, "max_atoms", s.max_atoms);
  if (root["engines"]) s.engines = root["engines"].as<std::vector<std::string>>();
  if (root["metrics"]) s.metrics = root["metrics"].as<std::vector<std::string>>();
  else s.metrics = {"energy", "w2"};

  if (YAML::Node d = root["initial_density"]) {
    check_keys(d, "initial_density", {"kind", "modes", "max_mode", "amplitude", "decay", "path", "file_sha256"});
    if (d["kind"]) s.initial.kind = parse_kind(d["kind"].as<std::string>());
    read(d, "max_mode", s.initial.max_mode);
    read(d, "amplitude", s.initial.amplitude);
    read(d, "decay", s.initial.decay);
    read(d, "path", s.initial.path);
    if (d["modes"]) {
      for (const auto& md : d["modes"]) {
        check_keys(md, "initial_density.modes", {"k", "cos", "sin"});
        DensitySpec::Mode mode;
        mode.k = md["k"].IsSequence() ? md["k"].as<std::vector<int>>() : std::vector<int>{md["k"].as<int>()};
        read(md, "cos", mode.cos_coef);
        read(md, "sin", mode.sin_coef);
        s.initial.modes.push_back(mode);
      }
    }
    if (s.initial.kind == DensitySpec::Kind::File && s.initial.path.empty())
      throw std::invalid_argument("scenario: file density needs a path");
    if (d["file_sha256"] && d["file_sha256"].as<std::string>() != sha256_file(s.initial.path))
      throw std::invalid_argument("scenario: " + s.initial.path + " does not match its recorded sha256");
  }

  if (YAML::Node sc = root["schedule"]) {
    check_keys(sc, "schedule", {"epsilon", "epsilon_tilde", "epsilon_star", "alpha", "log_alpha", "p", "q", "c"});
    // log_alpha is emitted by canonical_form only; alpha determines it
    read(sc, "epsilon", s.epsilon);
    read_opt(sc, "epsilon_tilde", s.overrides.epsilon_tilde);
    read_opt(sc, "epsilon_star", s.overrides.epsilon_star);
    read_opt(sc, "alpha", s.overrides.alpha);
    read_opt(sc, "p", s.overrides.p);
    read_opt(sc, "q", s.overrides.q);
    read_opt(sc, "c", s.overrides.c);
  }

  if (YAML::Node k = root["kernels"]) {
    check_keys(k, "kernels", {"kind", "moments", "resolution", "viscosity_k", "appendix_a_mode"});
    if (k["kind"]) s.kernels.kind = parse_mollifier_kind(k["kind"].as<std::string>());
    if (k["moments"]) s.kernels.moments = parse_moment_convention(k["moments"].as<std::string>());
    read(k, "resolution", s.kernels.resolution);
    read(k, "viscosity_k", s.kernels.viscosity_k);
    read(k, "appendix_a_mode", s.kernels.appendix_a_mode);
  }

  if (YAML::Node p = root["particles"]) {
    check_keys(p, "particles", {"N", "integrator", "dt", "dt_fraction", "init_grid", "cadence"});
    read(p, "N", s.particles.N);
    if (p["integrator"]) s.particles.integrator = parse_integrator(p["integrator"].as<std::string>());
    read(p, "dt", s.particles.dt);
    read(p, "dt_fraction", s.particles.dt_fraction);
    read(p, "init_grid", s.particles.init_grid);
    read(p, "cadence", s.particles.cadence);
  } else if (s.has_engine("particles")) {
    throw std::invalid_argument("scenario: engine 'particles' has no 'particles' block");
  }

  if (YAML::Node p = root["pde_nonlocal"]) {
    check_keys(p, "pde_nonlocal", {"dt", "cfl_fraction", "nu", "transport", "cadence"});
    read(p, "dt", s.nonlocal.dt);
    read(p, "cfl_fraction", s.nonlocal.cfl_fraction);
    read(p, "nu", s.nonlocal.nu);
    read(p, "transport", s.nonlocal.transport);
    read(p, "cadence", s.nonlocal.cadence);
  } else if (s.has_engine("nl-grid")) {
    throw std::invalid_argument("scenario: engine 'nl-grid' has no 'pde_nonlocal' block");
  }

  if (YAML::Node p = root["pde_local"]) {
    check_keys(p, "pde_local", {"n", "dt", "kappa", "C0", "scheme", "cadence", "solver_tolerance", "max_iterations"});
    read(p, "n", s.local.n);
    read(p, "dt", s.local.dt);
    read(p, "kappa", s.local.kappa);
    read(p, "C0", s.local.C0);
    if (p["scheme"]) s.local.scheme = parse_local_scheme(p["scheme"].as<std::string>());
    read(p, "cadence", s.local.cadence);
    read(p, "solver_tolerance", s.local.solver_tolerance);
    read(p, "max_iterations", s.local.max_iterations);
  } else if (s.has_engine("local-grid")) {
    throw std::invalid_argument("scenario: engine 'local-grid' has no 'pde_local' block");
  }

  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string canonical_form(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  const ParameterSchedule sc = s.schedule();
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "dimension" << YAML::Value << s.dim;
  out << YAML::Key << "m" << YAML::Value << s.m;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "T" << YAML::Value << s.T;
  out << YAML::Key << "initial_density" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << kind_name(s.initial.kind);
  if (s.initial.kind == DensitySpec::Kind::UniformPlusModes) {
    out << YAML::Key << "modes" << YAML::Value << YAML::BeginSeq;
    for (const auto& md : s.initial.modes) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "k" << YAML::Value << YAML::Flow << md.k;
      out << YAML::Key << "cos" << YAML::Value << md.cos_coef << YAML::Key << "sin" << YAML::Value << md.sin_coef
          << YAML::EndMap;
    }
    out << YAML::EndSeq;
  } else if (s.initial.kind == DensitySpec::Kind::RandomFourier) {
    out << YAML::Key << "max_mode" << YAML::Value << s.initial.max_mode;
    out << YAML::Key << "amplitude" << YAML::Value << s.initial.amplitude;
    out << YAML::Key << "decay" << YAML::Value << s.initial.decay;
  } else {
    out << YAML::Key << "path" << YAML::Value << s.initial.path;
    out << YAML::Key << "file_sha256" << YAML::Value << sha256_file(s.initial.path);
  }
  out << YAML::EndMap;
  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epsilon" << YAML::Value << sc.epsilon;
  out << YAML::Key << "epsilon_tilde" << YAML::Value << sc.epsilon_tilde;
  out << YAML::Key << "epsilon_star" << YAML::Value << sc.epsilon_star;
  out << YAML::Key << "alpha" << YAML::Value << sc.alpha;
  out << YAML::Key << "log_alpha" << YAML::Value << sc.log_alpha;
  out << YAML::EndMap;
  out << YAML::Key << "kernels" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(s.kernels.kind);
  out << YAML::Key << "moments" << YAML::Value
      << (s.kernels.moments == MomentConvention::PerAxis ? "per-axis" : "literal");
  out << YAML::Key << "resolution" << YAML::Value << (s.kernels.resolution > 0 ? s.kernels.resolution : default_resolution(s.dim));
  out << YAML::Key << "viscosity_k" << YAML::Value << s.kernels.viscosity_k;
  out << YAML::Key << "appendix_a_mode" << YAML::Value << s.kernels.appendix_a_mode;
  out << YAML::EndMap;
  out << YAML::Key << "grid_n" << YAML::Value << s.grid_n;
  out << YAML::Key << "max_atoms" << YAML::Value << s.max_atoms;
  out << YAML::Key << "engines" << YAML::Value << YAML::Flow << s.engines;
  out << YAML::Key << "metrics" << YAML::Value << YAML::Flow << s.metrics;
  if (s.has_engine("particles")) {
    out << YAML::Key << "particles" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "N" << YAML::Value << s.particles.N;
    out << YAML::Key << "integrator" << YAML::Value << to_string(s.particles.integrator);
    out << YAML::Key << "dt" << YAML::Value << s.particles.dt;
    out << YAML::Key << "dt_fraction" << YAML::Value << s.particles.dt_fraction;
    out << YAML::Key << "init_grid" << YAML::Value << s.particles.init_grid;
    out << YAML::Key << "cadence" << YAML::Value << s.particles.cadence;
    out << YAML::EndMap;
  }
  if (s.has_engine("nl-grid")) {
    out << YAML::Key << "pde_nonlocal" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dt" << YAML::Value << s.nonlocal.dt;
    out << YAML::Key << "cfl_fraction" << YAML::Value << s.nonlocal.cfl_fraction;
    out << YAML::Key << "nu" << YAML::Value << s.nonlocal.nu;
    out << YAML::Key << "transport" << YAML::Value << s.nonlocal.transport;
    out << YAML::Key << "cadence" << YAML::Value << s.nonlocal.cadence;
    out << YAML::EndMap;
  }
  if (s.has_engine("local-grid")) {
    out << YAML::Key << "pde_local" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n" << YAML::Value << s.local.n;
    out << YAML::Key << "dt" << YAML::Value << s.local.dt;
    out << YAML::Key << "kappa" << YAML::Value << s.local.kappa;
    out << YAML::Key << "C0" << YAML::Value << s.local.C0;
    out << YAML::Key << "scheme" << YAML::Value << to_string(s.local.scheme);
    out << YAML::Key << "cadence" << YAML::Value << s.local.cadence;
    out << YAML::Key << "solver_tolerance" << YAML::Value << s.local.solver_tolerance;
    out << YAML::Key << "max_iterations" << YAML::Value << s.local.max_iterations;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const Scenario& s) { return sha256_hex(canonical_form(s)); }

}  // namespace dpa
