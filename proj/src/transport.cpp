#include "dpa/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dpa {

DiscreteMeasure::DiscreteMeasure(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) {
  validate();
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix pts) {
  Index n = pts.cols();
  return DiscreteMeasure(std::move(pts), Vector::Constant(n, 1.0 / n));
}

void DiscreteMeasure::validate() const {
  if (points.cols() != weights.size()) throw std::invalid_argument("DiscreteMeasure: weight count mismatch");
  if (weights.size() == 0) throw std::invalid_argument("DiscreteMeasure: empty measure");
  if (weights.minCoeff() < 0.0) throw std::invalid_argument("DiscreteMeasure: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw std::invalid_argument("DiscreteMeasure: weights must sum to 1");
}

Vector TransportPlan::row_sums() const {
  Vector r = Vector::Zero(rows);
  for (const auto& e : entries) r[e.i] += e.weight;
  return r;
}

Vector TransportPlan::col_sums() const {
  Vector c = Vector::Zero(cols);
  for (const auto& e : entries) c[e.j] += e.weight;
  return c;
}

double TransportPlan::max_marginal_violation(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
  return std::max((row_sums() - mu.weights).cwiseAbs().maxCoeff(), (col_sums() - nu.weights).cwiseAbs().maxCoeff());
}

double TransportPlan::cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
  double c = 0.0;
  for (const auto& e : entries) c += e.weight * torus_cost(mu.points.col(e.i), nu.points.col(e.j));
  return c;
}

// ------------------------------------------------------------------ circle

namespace {

struct Sorted1D {
  std::vector<double> x;    // sorted positions in [0,1)
  std::vector<double> cum;  // cum[k] = mass of atoms 0..k (inclusive)
  std::vector<Index> id;    // original atom index
};

Sorted1D sort_measure(const DiscreteMeasure& mu) {
  Index n = mu.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return mu.points(0, a) < mu.points(0, b); });
  Sorted1D s;
  double acc = 0.0;
  for (Index k : order) {
    acc += mu.weights[k];
    s.x.push_back(wrap_coordinate(mu.points(0, k)));
    s.cum.push_back(acc);
    s.id.push_back(k);
  }
  // pin the total to exactly 1 so the lifted quantile is periodic
  s.cum.back() = 1.0;
  return s;
}

// Cost of matching the t-quantile of a with the (t + theta)-quantile of the
// lifted b, t in [0,1). Optionally records the coupling pieces.
double shifted_cost(const Sorted1D& a, const Sorted1D& b, double theta, std::vector<TransportPlan::Entry>* pieces) {
  const Index na = a.x.size(), nb = b.x.size();
  double k = std::floor(theta);
  double frac = theta - k;
  Index j = std::upper_bound(b.cum.begin(), b.cum.end(), frac) - b.cum.begin();
  if (j == nb) {
    j = 0;
    k += 1.0;
    frac = 0.0;
  }
  Index i = 0;
  double t = 0.0;
  double cost = 0.0;
  while (i < na) {
    double end_a = a.cum[i];
    double end_b = b.cum[j] + k - theta;
    double end = std::min(end_a, end_b);
    double len = end - t;
    if (len > 0.0) {
      double d = a.x[i] - (b.x[j] + k);
      cost += len * d * d;
      if (pieces) pieces->push_back({a.id[i], b.id[j], len});
      t = end;
    }
    if (end_a <= end_b) ++i;
    if (end_b <= end_a) {
      ++j;
      if (j == nb) {
        j = 0;
        k += 1.0;
      }
    }
  }
  return cost;
}

}  // namespace

W2Result w2_circle_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1) throw std::invalid_argument("w2_circle_exact: requires d = 1");
  mu.validate();
  nu.validate();
  Sorted1D a = sort_measure(mu), b = sort_measure(nu);
  auto f = [&](double th) { return shifted_cost(a, b, th, nullptr); };

  // golden-section search on the convex piecewise-linear cost
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -1.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  // The minimum sits at a breakpoint theta = B_j + k - A_i; snap to those near the bracket.
  double best_theta = 0.5 * (lo + hi);
  double best = f(best_theta);
  const double window = 1e-9;
  std::vector<double> acum(1, 0.0);
  acum.insert(acum.end(), a.cum.begin(), a.cum.end());
  std::vector<double> bcum(1, 0.0);
  bcum.insert(bcum.end(), b.cum.begin(), b.cum.end());
  for (double A : acum) {
    for (double k = -2.0; k <= 2.0; k += 1.0) {
      // B + k - A in [lo - window, hi + window]
      double target_lo = lo - window + A - k, target_hi = hi + window + A - k;
      auto it = std::lower_bound(bcum.begin(), bcum.end(), target_lo);
      for (; it != bcum.end() && *it <= target_hi; ++it) {
        double th = *it + k - A;
        double v = f(th);
        if (v < best) {
          best = v;
          best_theta = th;
        }
      }
    }
  }
  W2Result r;
  std::vector<TransportPlan::Entry> pieces;
  double c = shifted_cost(a, b, best_theta, &pieces);
  std::map<std::pair<Index, Index>, double> merged;
  for (const auto& p : pieces) merged[{p.i, p.j}] += p.weight;
  r.plan.rows = mu.size();
  r.plan.cols = nu.size();
  for (const auto& [key, w] : merged) r.plan.entries.push_back({key.first, key.second, w});
  r.distance = std::sqrt(std::max(c, 0.0));
  return r;
}

// ---------------------------------------------------------------------- LP

namespace {

Matrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  Matrix C(mu.size(), nu.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < mu.size(); ++i)
    for (Index j = 0; j < nu.size(); ++j) C(i, j) = torus_cost(mu.points.col(i), nu.points.col(j));
  return C;
}

}  // namespace

W2Result w2_exact_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("w2_exact_lp: dimension mismatch");
  if (mu.size() > kExactLpCap || nu.size() > kExactLpCap)
    throw std::invalid_argument("w2_exact_lp: support larger than 3000 atoms; use w2_sinkhorn");
  mu.validate();
  nu.validate();
  Matrix C = cost_matrix(mu, nu);
  W2Result r;
  r.plan = detail::network_simplex(mu.weights, nu.weights, C);
  double c = 0.0;
  for (const auto& e : r.plan.entries) c += e.weight * C(e.i, e.j);
  r.distance = std::sqrt(std::max(c, 0.0));
  return r;
}

// ---------------------------------------------------------------- Sinkhorn

namespace {

struct EntropicOT {
  double objective = 0.0;  // dual value <a,f> + <b,g>
  double transport = 0.0;  // <P, C>
  int iterations = 0;
};

double log_sum_exp(const double* v, Index n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) mx = std::max(mx, v[k]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Index k = 0; k < n; ++k) s += std::exp(v[k] - mx);
  return mx + std::log(s);
}

// Log-domain Sinkhorn with eps-scaling: the regularization is annealed from the
// cost scale down to reg by halving, warm-starting the potentials at each level.
// symmetric: a == b and C symmetric; uses the averaged fixed-point map f <- (f + T f)/2,
// which avoids the slow oscillation of the alternating updates.
EntropicOT sinkhorn_log(const Vector& a, const Vector& b, const Matrix& C, double reg, int max_it,
                        bool symmetric = false) {
  const Index n = a.size(), m = b.size();
  Vector f = Vector::Zero(n), g = Vector::Zero(m);
  Vector la = a.array().log(), lb = b.array().log();
  std::vector<double> buf(std::max(n, m));
  double level = reg;
  auto row_lse = [&](Index i) {
    for (Index j = 0; j < m; ++j) buf[j] = (g[j] - C(i, j)) / level + lb[j];
    return log_sum_exp(buf.data(), m);
  };
  auto col_lse = [&](Index j) {
    for (Index i = 0; i < n; ++i) buf[i] = (f[i] - C(i, j)) / level + la[i];
    return log_sum_exp(buf.data(), n);
  };
  // after the g-update columns are exact; rows carry the violation
  auto row_violation = [&]() {
    double viol = 0.0;
    for (Index i = 0; i < n; ++i) viol = std::max(viol, std::abs(std::exp(la[i] + f[i] / level + row_lse(i)) - a[i]));
    return viol;
  };
  auto sweep = [&]() {
    if (symmetric) {
      Vector t(n);
      for (Index i = 0; i < n; ++i) t[i] = -level * row_lse(i);
      f = 0.5 * (f + t);
      g = f;
      return;
    }
    for (Index i = 0; i < n; ++i) f[i] = -level * row_lse(i);
    for (Index j = 0; j < m; ++j) g[j] = -level * col_lse(j);
  };
  std::vector<double> levels;
  for (double r = reg; r < std::max(C.maxCoeff(), reg); r *= 2.0) levels.push_back(r);
  std::reverse(levels.begin(), levels.end());
  for (double r : levels) {
    if (r == reg) break;
    level = r;
    for (int it = 1; it <= 1000; ++it) {
      sweep();
      if (it % 10 == 0 && row_violation() < 1e-6) break;
    }
  }
  level = reg;
  EntropicOT out;
  for (int it = 1; it <= max_it; ++it) {
    sweep();
    if (it % 10 == 0 || it == max_it) {
      double viol = row_violation();
      out.iterations = it;
      if (viol < 1e-9) {
        out.objective = a.dot(f) + b.dot(g);
        double t = 0.0;
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < m; ++j) t += std::exp((f[i] + g[j] - C(i, j)) / reg + la[i] + lb[j]) * C(i, j);
        out.transport = t;
        return out;
      }
      if (it == max_it) {
        std::ostringstream msg;
        msg << "w2_sinkhorn: no convergence after " << it << " iterations, marginal residual " << viol;
        throw std::runtime_error(msg.str());
      }
    }
  }
  return out;
}

DiscreteMeasure drop_zero_atoms(const DiscreteMeasure& mu) {
  std::vector<Index> keep;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu.weights[i] > 0.0) keep.push_back(i);
  Matrix p(mu.dim(), static_cast<Index>(keep.size()));
  Vector w(static_cast<Index>(keep.size()));
  for (Index k = 0; k < w.size(); ++k) {
    p.col(k) = mu.points.col(keep[k]);
    w[k] = mu.weights[keep[k]];
  }
  DiscreteMeasure out;
  out.points = std::move(p);
  out.weights = std::move(w);
  return out;
}

}  // namespace

SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu_in, const DiscreteMeasure& nu_in, double reg, int max_iterations) {
  if (!(reg > 0.0)) throw std::invalid_argument("w2_sinkhorn: reg must be positive");
  DiscreteMeasure mu = drop_zero_atoms(mu_in), nu = drop_zero_atoms(nu_in);
  auto xy = sinkhorn_log(mu.weights, nu.weights, cost_matrix(mu, nu), reg, max_iterations);
  auto xx = sinkhorn_log(mu.weights, mu.weights, cost_matrix(mu, mu), reg, max_iterations, true);
  auto yy = sinkhorn_log(nu.weights, nu.weights, cost_matrix(nu, nu), reg, max_iterations, true);
  SinkhornResult r;
  r.divergence = xy.objective - 0.5 * (xx.objective + yy.objective);
  r.entropic_cost = xy.transport;
  r.lower = std::sqrt(std::max(r.divergence, 0.0));
  r.upper = std::sqrt(std::max(r.entropic_cost, 0.0));
  r.iterations = xy.iterations;
  return r;
}

// ------------------------------------------------------------ conversions

DiscreteMeasure grid_to_measure(const GridField& rho, Index max_atoms) {
  const int d = rho.dim(), n = rho.n();
  if (rho.values().minCoeff() < 0.0) throw std::invalid_argument("grid_to_measure: negative density");
  int block = 1;
  if (max_atoms > 0) {
    while (true) {
      double atoms = std::pow(double(n / block), d);
      if (n % block == 0 && atoms <= double(max_atoms)) break;
      ++block;
      if (block > n) {
        block = n;
        break;
      }
    }
  }
  const int nc = n / block;
  Index count = 1;
  for (int a = 0; a < d; ++a) count *= nc;
  Vector w = Vector::Zero(count);
  for (Index i = 0; i < rho.size(); ++i) {
    auto idx = rho.multi_index(i);
    Index c = 0;
    for (int a = 0; a < d; ++a) c = c * nc + idx[a] / block;
    w[c] += rho[i];
  }
  double total = w.sum();
  Matrix pts(d, count);
  for (Index c = 0; c < count; ++c) {
    Index f = c;
    for (int a = d - 1; a >= 0; --a) {
      int k = static_cast<int>(f % nc);
      f /= nc;
      pts(a, c) = wrap_coordinate((block * k + 0.5 * (block - 1)) / double(n));
    }
  }
  DiscreteMeasure mu;
  mu.points = std::move(pts);
  mu.weights = w / total;
  return drop_zero_atoms(mu);
}

DiscreteMeasure particles_to_measure(const Matrix& positions) { return DiscreteMeasure::uniform(positions); }

double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() == 1) return w2_circle_exact(mu, nu).distance;
  return w2_exact_lp(mu, nu).distance;
}

}  // namespace dpa
