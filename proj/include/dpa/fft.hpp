#pragma once

#include <Eigen/Core>

#include <complex>
#include <memory>
#include <vector>

namespace dpa {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

// Multi-dimensional DFT on an n^d periodic grid, row-major flat layout
// (last axis fastest). forward is unnormalized; inverse divides by n^d.
class FourierTransform {
 public:
  FourierTransform(int n, int dim);
  ~FourierTransform();
  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;

  int n() const { return n_; }
  int dim() const { return dim_; }
  Eigen::Index size() const { return size_; }

  ComplexVector forward(const Eigen::VectorXd& values) const;
  ComplexVector forward(const ComplexVector& values) const;
  ComplexVector inverse(const ComplexVector& spectrum) const;
  Eigen::VectorXd inverse_real(const ComplexVector& spectrum) const;

  // Signed integer frequency of flat index along axis (Nyquist reported as +n/2).
  int frequency(Eigen::Index flat, int axis) const;
  bool is_nyquist(Eigen::Index flat, int axis) const;

 private:
  void transform(std::vector<Complex>& data, bool inverse) const;

  int n_;
  int dim_;
  Eigen::Index size_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Shared, thread-compatible cache of transforms keyed by (n, d).
const FourierTransform& fourier(int n, int dim);

inline int signed_frequency(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace dpa
