#pragma once

// Brute-force references for the tests. Nothing here calls production numerics.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <vector>

namespace oracle {

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

// int_{[-1/2,1/2]} k(y) f(x - y) dy by adaptive Gauss-Kronrod, split at the
// given breakpoints (kernel support edges). Throws when tol is not reached.
double quad_convolve(const Fn1& kernel, const Fn1& f, double x, double tol, std::vector<double> breaks = {});
// Same on [-1/2,1/2]^2 by nested quadrature, breakpoints shared by both axes.
double quad_convolve_2d(const Fn2& kernel, const Fn2& f, double x1, double x2, double tol,
                        std::vector<double> breaks = {});
// int_a^b f
double quad(const Fn1& f, double a, double b, double tol, std::vector<double> breaks = {});

// Central differences with step h and h/2, Richardson-combined (error O(h^4)).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& fn, const Eigen::VectorXd& x,
                            double h);
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& fn, const Eigen::VectorXd& x,
                           double h);

// Exact W2 on the torus between equal-weight measures of n <= 8 atoms each
// (columns of a and b) by enumerating all n! permutations.
double brute_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Linear growth rate of mode k about rho_bar for the local equation.
double dispersion_sigma(double k, double m, double rho_bar);

// rho(x) = 1 + a sum_{k=1}^{K} r^k cos(2 pi k x), summed term by term.
struct PoissonSeries {
  double a = 0.2;
  double r = 0.7;  // a r / (1 - r) < 1: positive density
  int terms = 400;
  // rho and its first four derivatives
  std::array<double, 5> derivatives(double x) const;
  // div(rho grad lap rho) + lap(rho^m) at x
  double local_operator(double x, double m) const;
};

}  // namespace oracle
