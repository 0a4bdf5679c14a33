#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace dpa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// x mod 1 in [0,1). Values that round up to 1 (e.g. -1e-20) map to 0.
template <typename Scalar>
inline Scalar wrap_coordinate(Scalar x) {
  if (!std::isfinite(x)) throw std::invalid_argument("wrap: non-finite coordinate");
  Scalar r = x - std::floor(x);
  return r >= Scalar(1) ? Scalar(0) : r;
}

// Representative of a coordinate difference in (-1/2, 1/2]; exact ties go to +1/2.
// For |delta| < 1 the result is bitwise antisymmetric away from ties.
template <typename Scalar>
inline Scalar min_image_coordinate(Scalar delta) {
  return delta - std::ceil(delta - Scalar(0.5));
}

template <typename Scalar = double>
class BasicTorusPoint {
 public:
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTorusPoint() = default;

  template <typename Derived>
  explicit BasicTorusPoint(const Eigen::MatrixBase<Derived>& raw) : coords_(raw.size()) {
    for (Index i = 0; i < raw.size(); ++i) coords_[i] = wrap_coordinate<Scalar>(raw[i]);
  }

  const VectorType& coords() const { return coords_; }
  Scalar operator[](Index i) const { return coords_[i]; }
  Index dim() const { return coords_.size(); }

 private:
  VectorType coords_;
};

template <typename Scalar = double>
class BasicDisplacement {
 public:
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicDisplacement() = default;

  // Takes an arbitrary raw difference and reduces it to the minimum image.
  template <typename Derived>
  explicit BasicDisplacement(const Eigen::MatrixBase<Derived>& raw) : delta_(raw.size()) {
    for (Index i = 0; i < raw.size(); ++i) {
      Scalar r = raw[i];
      if (!std::isfinite(r)) throw std::invalid_argument("displacement: non-finite value");
      delta_[i] = min_image_coordinate(r);
    }
  }

  const VectorType& delta() const { return delta_; }
  Scalar operator[](Index i) const { return delta_[i]; }
  Index dim() const { return delta_.size(); }
  Scalar cost() const { return delta_.squaredNorm(); }

 private:
  VectorType delta_;
};

using TorusPoint = BasicTorusPoint<double>;
using Displacement = BasicDisplacement<double>;

template <typename Derived>
TorusPoint wrap(const Eigen::MatrixBase<Derived>& raw) {
  return TorusPoint(raw);
}

inline Displacement min_image(const TorusPoint& x, const TorusPoint& y) {
  if (x.dim() != y.dim()) throw std::invalid_argument("min_image: dimension mismatch");
  Vector d(x.dim());
  for (Index i = 0; i < x.dim(); ++i) d[i] = min_image_coordinate(x[i] - y[i]);
  return Displacement(d);
}

// Squared torus cost between two wrapped coordinate columns.
template <typename DerivedA, typename DerivedB>
double torus_cost(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y) {
  double c = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    double d = min_image_coordinate(x[i] - y[i]);
    c += d * d;
  }
  return c;
}

// Wraps every entry of a coordinate matrix in place.
template <typename Derived>
void wrap_in_place(Eigen::MatrixBase<Derived>& x) {
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) x(i, j) = wrap_coordinate(x(i, j));
}

}  // namespace dpa
