#pragma once

#include "dpa/geometry.hpp"
#include "dpa/grid.hpp"

#include <vector>

namespace dpa {

// Atoms column-wise (d x n) with nonnegative weights summing to one.
struct DiscreteMeasure {
  Matrix points;
  Vector weights;

  DiscreteMeasure() = default;
  DiscreteMeasure(Matrix pts, Vector w);
  static DiscreteMeasure uniform(Matrix pts);

  Index size() const { return points.cols(); }
  int dim() const { return static_cast<int>(points.rows()); }
  void validate() const;
};

struct TransportPlan {
  struct Entry {
    Index i, j;
    double weight;
  };
  Index rows = 0, cols = 0;
  std::vector<Entry> entries;

  Vector row_sums() const;
  Vector col_sums() const;
  double max_marginal_violation(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;
  double cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;
};

struct W2Result {
  double distance = 0.0;  // W_2 (not squared)
  TransportPlan plan;
};

W2Result w2_circle_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

constexpr Index kExactLpCap = 3000;
W2Result w2_exact_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct SinkhornResult {
  double divergence = 0.0;      // debiased Sinkhorn divergence (squared-cost units)
  double entropic_cost = 0.0;   // <gamma_reg, C> of the entropic plan (squared-cost units)
  double lower = 0.0;           // sqrt(max(divergence, 0))
  double upper = 0.0;           // sqrt(entropic_cost)
  int iterations = 0;
};
SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double reg,
                           int max_iterations = 200000);

// Cell centers with weights rho h^d, optionally block-coarsened to at most
// max_atoms atoms (max_atoms <= 0: no coarsening). Zero-weight atoms are dropped.
DiscreteMeasure grid_to_measure(const GridField& rho, Index max_atoms = 0);

DiscreteMeasure particles_to_measure(const Matrix& positions);

// Dispatches to the exact 1D solver or the LP by dimension.
double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

namespace detail {
// Min-cost transportation by primal network simplex on a dense cost matrix.
// Returns the optimal plan; supplies and demands must have equal totals.
TransportPlan network_simplex(const Vector& supply, const Vector& demand, const Matrix& cost);
}  // namespace detail

}  // namespace dpa
