// Primal network simplex for the dense transportation problem, with an
// artificial root, big-M artificial arcs and the strongly feasible leaving
// arc rule (no cycling). Tree kept as parent / predecessor arc / children.

#include "dpa/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpa::detail {

namespace {

class Simplex {
 public:
  Simplex(const Vector& supply, const Vector& demand, const Matrix& cost)
      : n_(static_cast<int>(supply.size())), m_(static_cast<int>(demand.size())), cost_(cost) {
    nodes_ = n_ + m_ + 1;
    root_ = n_ + m_;
    real_arcs_ = static_cast<Index>(n_) * m_;
    double cmax = cost.size() ? cost.maxCoeff() : 0.0;
    art_cost_ = (std::max(cmax, 0.0) + 1.0) * nodes_;
    tol_ = 1e-14 * std::max(1.0, cmax);

    parent_.assign(nodes_, -1);
    arc_.assign(nodes_, -1);
    up_.assign(nodes_, false);
    flow_.assign(nodes_, 0.0);
    pi_.assign(nodes_, 0.0);
    depth_.assign(nodes_, 1);
    children_.assign(nodes_, {});
    art_source_up_.assign(nodes_, false);
    depth_[root_] = 0;

    for (int i = 0; i < n_; ++i) {
      parent_[i] = root_;
      arc_[i] = real_arcs_ + i;
      children_[root_].push_back(i);
      if (supply[i] > 0.0) {  // i -> root
        up_[i] = true;
        art_source_up_[i] = true;
        flow_[i] = supply[i];
        pi_[i] = art_cost_;
      } else {  // root -> i
        up_[i] = false;
        flow_[i] = 0.0;
        pi_[i] = -art_cost_;
      }
    }
    for (int j = 0; j < m_; ++j) {
      int v = n_ + j;
      parent_[v] = root_;
      arc_[v] = real_arcs_ + v;
      children_[root_].push_back(v);
      up_[v] = false;  // root -> sink
      flow_[v] = demand[j];
      pi_[v] = -art_cost_;
    }
  }

  void solve() {
    Index total = real_arcs_ + n_ + m_;
    Index block = std::max<Index>(10, static_cast<Index>(std::sqrt(double(total))));
    Index next = 0;
    Index max_pivots = 50 * total + 100000;
    for (Index pivots = 0; pivots < max_pivots; ++pivots) {
      Index entering = -1;
      double best = -tol_;
      Index scanned = 0, in_block = 0;
      while (scanned < total) {
        double rc = reduced_cost(next);
        if (rc < best) {
          best = rc;
          entering = next;
        }
        ++scanned;
        ++in_block;
        next = (next + 1 == total) ? 0 : next + 1;
        if (in_block == block) {
          if (entering >= 0) break;
          in_block = 0;
        }
      }
      if (entering < 0) return;
      pivot(entering);
    }
    throw std::runtime_error("network simplex: pivot limit exceeded");
  }

  TransportPlan plan() const {
    TransportPlan p;
    p.rows = n_;
    p.cols = m_;
    std::vector<TransportPlan::Entry> e;
    for (int v = 0; v < nodes_; ++v) {
      if (v == root_ || arc_[v] >= real_arcs_ || flow_[v] <= 0.0) continue;
      Index a = arc_[v];
      e.push_back({a / m_, a % m_, flow_[v]});
    }
    std::sort(e.begin(), e.end(), [](const auto& x, const auto& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
    p.entries = std::move(e);
    return p;
  }

 private:
  // endpoints of an arc id
  void ends(Index a, int& s, int& t) const {
    if (a < real_arcs_) {
      s = static_cast<int>(a / m_);
      t = n_ + static_cast<int>(a % m_);
      return;
    }
    int v = static_cast<int>(a - real_arcs_);
    if (v < n_ && art_source_up_[v]) {
      s = v;
      t = root_;
    } else {
      s = root_;
      t = v;
    }
  }

  double arc_cost(Index a) const {
    if (a < real_arcs_) return cost_(a / m_, a % m_);
    return art_cost_;
  }

  double reduced_cost(Index a) const {
    int s, t;
    ends(a, s, t);
    return arc_cost(a) - pi_[s] + pi_[t];
  }

  void remove_child(int p, int c) {
    auto& ch = children_[p];
    auto it = std::find(ch.begin(), ch.end(), c);
    *it = ch.back();
    ch.pop_back();
  }

  void pivot(Index entering) {
    int u, v;
    ends(entering, u, v);
    // join node
    int a = u, b = v;
    while (a != b) {
      if (depth_[a] > depth_[b])
        a = parent_[a];
      else if (depth_[b] > depth_[a])
        b = parent_[b];
      else {
        a = parent_[a];
        b = parent_[b];
      }
    }
    const int join = a;

    // Cycle orientation: join -> ... -> u -> v -> ... -> join.
    // u side: cycle runs parent -> w, so arcs pointing up (w -> parent) decrease.
    // v side: cycle runs w -> parent, so arcs pointing down decrease.
    double delta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (int w = u; w != join; w = parent_[w]) {
      if (up_[w] && flow_[w] < delta) {
        delta = flow_[w];
        leave = w;
      }
    }
    for (int w = v; w != join; w = parent_[w]) {
      if (!up_[w] && flow_[w] <= delta) {
        delta = flow_[w];
        leave = w;
      }
    }
    if (leave < 0) throw std::runtime_error("network simplex: unbounded cycle");

    for (int w = u; w != join; w = parent_[w]) flow_[w] += up_[w] ? -delta : delta;
    for (int w = v; w != join; w = parent_[w]) flow_[w] += up_[w] ? delta : -delta;

    // is the leaving arc on the u side?
    bool on_u_side = false;
    for (int w = u; w != join; w = parent_[w])
      if (w == leave) {
        on_u_side = true;
        break;
      }

    const double rc = reduced_cost(entering);
    int new_root = on_u_side ? u : v;     // endpoint inside the detached subtree
    int attach = on_u_side ? v : u;       // endpoint that stays
    bool new_up = on_u_side;              // u -> v points from subtree to attach when u is inside
    double shift = on_u_side ? rc : -rc;  // potential shift of the detached subtree

    // Reverse the path new_root -> ... -> leave.
    remove_child(parent_[leave], leave);
    int prev = attach;
    Index prev_arc = entering;
    bool prev_up = new_up;
    double prev_flow = delta;
    int w = new_root;
    while (true) {
      int old_parent = parent_[w];
      Index old_arc = arc_[w];
      bool old_up = up_[w];
      double old_flow = flow_[w];
      if (w != leave) remove_child(old_parent, w);
      parent_[w] = prev;
      arc_[w] = prev_arc;
      up_[w] = prev_up;
      flow_[w] = prev_flow;
      children_[prev].push_back(w);
      if (w == leave) break;
      prev = w;
      prev_arc = old_arc;
      prev_up = !old_up;
      prev_flow = old_flow;
      w = old_parent;
    }

    // Refresh depth and potentials of the moved subtree.
    stack_.clear();
    stack_.push_back(new_root);
    while (!stack_.empty()) {
      int x = stack_.back();
      stack_.pop_back();
      depth_[x] = depth_[parent_[x]] + 1;
      pi_[x] += shift;
      for (int c : children_[x]) stack_.push_back(c);
    }
  }

  int n_, m_;
  const Matrix& cost_;
  int nodes_, root_;
  Index real_arcs_;
  double art_cost_, tol_;
  std::vector<int> parent_;
  std::vector<Index> arc_;
  std::vector<bool> up_;  // pred arc points from node to parent
  std::vector<double> flow_;
  std::vector<double> pi_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> children_;
  std::vector<bool> art_source_up_;
  std::vector<int> stack_;
};

}  // namespace

TransportPlan network_simplex(const Vector& supply, const Vector& demand, const Matrix& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size())
    throw std::invalid_argument("network_simplex: cost matrix shape mismatch");
  Simplex s(supply, demand, cost);
  s.solve();
  return s.plan();
}

}  // namespace dpa::detail
