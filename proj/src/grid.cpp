#include "dpa/grid.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dpa {

GridField::GridField(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3 || n < 1) throw std::invalid_argument("GridField: bad grid");
  Index size = 1;
  for (int a = 0; a < dim; ++a) size *= n;
  values_ = Vector::Zero(size);
}

GridField::GridField(int dim, int n, Vector values) : GridField(dim, n) {
  if (values.size() != values_.size()) throw std::invalid_argument("GridField: value count mismatch");
  values_ = std::move(values);
}

GridField GridField::sample(int dim, int n, const std::function<double(const Vector&)>& fn) {
  GridField f(dim, n);
  for (Index i = 0; i < f.size(); ++i) f[i] = fn(f.node(i));
  return f;
}

double GridField::cell_volume() const { return std::pow(spacing(), dim_); }

double GridField::inner(const GridField& other) const {
  require_same_grid(other, "inner");
  return values_.dot(other.values_) * cell_volume();
}

std::array<int, 3> GridField::multi_index(Index flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n_);
    flat /= n_;
  }
  return idx;
}

Index GridField::flat_index(const std::array<int, 3>& idx) const {
  Index flat = 0;
  for (int a = 0; a < dim_; ++a) flat = flat * n_ + ((idx[a] % n_) + n_) % n_;
  return flat;
}

Vector GridField::node(Index flat) const {
  auto idx = multi_index(flat);
  Vector x(dim_);
  for (int a = 0; a < dim_; ++a) x[a] = idx[a] * spacing();
  return x;
}

void GridField::require_same_grid(const GridField& other, const char* where) const {
  if (!same_grid(other)) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

void GridField::require_finite(const char* where) const {
  if (!values_.allFinite()) throw std::runtime_error(std::string(where) + ": non-finite grid values");
}

ComplexVector spectrum(const GridField& f) { return fourier(f.n(), f.dim()).forward(f.values()); }

GridField from_spectrum(int dim, int n, const ComplexVector& spec) {
  return GridField(dim, n, fourier(n, dim).inverse_real(spec));
}

ComplexVector derivative_symbol(int dim, int n, int axis) {
  const auto& ft = fourier(n, dim);
  ComplexVector s(ft.size());
  for (Index i = 0; i < ft.size(); ++i) {
    if (ft.is_nyquist(i, axis))
      s[i] = 0.0;
    else
      s[i] = Complex(0.0, 2.0 * M_PI * ft.frequency(i, axis));
  }
  return s;
}

Vector laplacian_symbol(int dim, int n) {
  const auto& ft = fourier(n, dim);
  Vector s(ft.size());
  for (Index i = 0; i < ft.size(); ++i) {
    double k2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      double k = 2.0 * M_PI * ft.frequency(i, a);
      k2 += k * k;
    }
    s[i] = -k2;
  }
  return s;
}

GridField spectral_derivative(const GridField& f, int axis) {
  ComplexVector s = spectrum(f);
  s.array() *= derivative_symbol(f.dim(), f.n(), axis).array();
  return from_spectrum(f.dim(), f.n(), s);
}

GridField spectral_laplacian(const GridField& f) {
  ComplexVector s = spectrum(f);
  s.array() *= laplacian_symbol(f.dim(), f.n()).array().cast<Complex>();
  return from_spectrum(f.dim(), f.n(), s);
}

void write_binary(const GridField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  std::int32_t d = f.dim(), n = f.n();
  double mass = f.mass();
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&mass), sizeof mass);
  out.write(reinterpret_cast<const char*>(f.values().data()), sizeof(double) * f.size());
}

GridField read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::int32_t d = 0, n = 0;
  double mass = 0.0;
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&mass), sizeof mass);
  GridField f(d, n);
  in.read(reinterpret_cast<char*>(f.values().data()), sizeof(double) * f.size());
  if (!in) throw std::runtime_error("truncated grid file " + path);
  return f;
}

void write_csv(const GridField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (int a = 0; a < f.dim(); ++a) out << "x_" << (a + 1) << ',';
  out << "value\n";
  out << std::setprecision(17);
  for (Index i = 0; i < f.size(); ++i) {
    Vector x = f.node(i);
    for (int a = 0; a < f.dim(); ++a) out << x[a] << ',';
    out << f[i] << '\n';
  }
}

GridField read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  int dim = 0;
  for (char c : line) dim += (c == ',');
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto pos = line.rfind(',');
    vals.push_back(std::stod(line.substr(pos + 1)));
  }
  int n = static_cast<int>(std::lround(std::pow(static_cast<double>(vals.size()), 1.0 / dim)));
  return GridField(dim, n, Eigen::Map<Vector>(vals.data(), vals.size()));
}

GridField resample(const GridField& f, int m) {
  if (m <= 0) throw std::invalid_argument("resample: resolution must be positive");
  const int d = f.dim(), n = f.n();
  if (m == n) return f;
  const auto& src = fourier(n, d);
  const auto& dst = fourier(m, d);
  ComplexVector in = src.forward(f.values());
  ComplexVector out = ComplexVector::Zero(dst.size());
  const int c = std::min(n, m);
  for (Index j = 0; j < in.size(); ++j) {
    Index target = 0;
    bool keep = true;
    for (int a = 0; a < d; ++a) {
      int k = src.frequency(j, a);
      if (2 * std::abs(k) >= c) keep = false;
      target = target * m + (k >= 0 ? k : k + m);
    }
    if (keep) out[target] = in[j];
  }
  const double ratio = std::pow(double(m) / n, d);
  return GridField(d, m, dst.inverse_real(ComplexVector(out * ratio)));
}

}  // namespace dpa
