#pragma once

#include "dpa/fft.hpp"
#include "dpa/geometry.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <string>

namespace dpa {

// Periodic scalar field on n^d nodes x_j = j/n, flat index row-major
// (last axis fastest). Node j is the center of the cell [x_j - h/2, x_j + h/2).
class GridField {
 public:
  GridField() = default;
  GridField(int dim, int n);
  GridField(int dim, int n, Vector values);

  // Samples fn(x) at every node.
  static GridField sample(int dim, int n, const std::function<double(const Vector&)>& fn);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  double cell_volume() const;
  Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  double& operator[](Index i) { return values_[i]; }
  double operator[](Index i) const { return values_[i]; }

  double mass() const { return values_.sum() * cell_volume(); }
  double inner(const GridField& other) const;
  Vector node(Index flat) const;
  std::array<int, 3> multi_index(Index flat) const;
  Index flat_index(const std::array<int, 3>& idx) const;

  bool same_grid(const GridField& other) const { return dim_ == other.dim_ && n_ == other.n_; }
  void require_same_grid(const GridField& other, const char* where) const;
  void require_finite(const char* where) const;

 private:
  int dim_ = 0;
  int n_ = 0;
  Vector values_;
};

// Spectral helpers on grid fields.
ComplexVector spectrum(const GridField& f);
GridField from_spectrum(int dim, int n, const ComplexVector& spec);

// Fourier symbol of d/dx_axis with the Nyquist mode zeroed (keeps the operator skew).
ComplexVector derivative_symbol(int dim, int n, int axis);
// Symbol of the discrete Laplacian -|2 pi xi|^2 (Nyquist retained).
Vector laplacian_symbol(int dim, int n);

// Trigonometric interpolation onto an m^d grid (zero padding or truncation);
// the Nyquist mode of the coarser grid is dropped.
GridField resample(const GridField& f, int m);

GridField spectral_derivative(const GridField& f, int axis);
GridField spectral_laplacian(const GridField& f);

// Binary: int32 d, int32 n, float64 mass, then n^d float64 values.
void write_binary(const GridField& f, const std::string& path);
GridField read_binary(const std::string& path);
// CSV: x_1..x_d,value
void write_csv(const GridField& f, const std::string& path);
GridField read_csv(const std::string& path);

}  // namespace dpa
