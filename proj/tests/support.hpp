// Test-only oracles, independent of the library's implementation paths.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "lapflow/common.hpp"
#include "lapflow/graph.hpp"

namespace oracle {

/// Brute-force reachability closure via Floyd–Warshall on booleans.
/// reach[u][v] = a walk u -> v exists (arc u -> v when a_vu > 0).
inline std::vector<std::vector<bool>> reach_closure(const lapflow::WeightedDigraph& g) {
  const int n = g.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int u = 0; u < n; ++u) {
    reach[u][u] = true;
    for (int v = 0; v < n; ++v)
      if (g.weights()(v, u) > 0.0) reach[u][v] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (reach[u][k] && reach[k][v]) reach[u][v] = true;
  return reach;
}

inline bool strongly_connected(const lapflow::WeightedDigraph& g) {
  const auto reach = reach_closure(g);
  for (const auto& row : reach)
    for (bool r : row)
      if (!r) return false;
  return true;
}

inline bool quasi_strongly_connected(const lapflow::WeightedDigraph& g) {
  const auto reach = reach_closure(g);
  for (const auto& row : reach)
    if (std::all_of(row.begin(), row.end(), [](bool b) { return b; })) return true;
  return false;
}

/// Component ids from pairwise mutual reachability.
inline std::vector<int> components(const lapflow::WeightedDigraph& g) {
  const int n = g.size();
  const auto reach = reach_closure(g);
  std::vector<int> comp(n, -1);
  int next = 0;
  for (int u = 0; u < n; ++u) {
    if (comp[u] != -1) continue;
    comp[u] = next;
    for (int v = u + 1; v < n; ++v)
      if (comp[v] == -1 && reach[u][v] && reach[v][u]) comp[v] = next;
    ++next;
  }
  return comp;
}

/// Random digraph with arc density p and weights in [wmin, wmax].
inline lapflow::WeightedDigraph random_graph(lapflow::SplitMix64& rng, int n, double density,
                                             double wmin = 0.5, double wmax = 1.5) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rng.bernoulli(density)) w(i, j) = rng.uniform(wmin, wmax);
  return lapflow::WeightedDigraph(std::move(w));
}

/// Random graph guaranteed strongly connected: a directed cycle over a
/// random permutation plus density extras.
inline lapflow::WeightedDigraph random_strong_graph(lapflow::SplitMix64& rng, int n,
                                                    double density, double wmin = 0.5,
                                                    double wmax = 1.5) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  for (int k = 0; k < n; ++k) {
    const int u = perm[k], v = perm[(k + 1) % n];
    w(v, u) = rng.uniform(wmin, wmax);  // arc u -> v
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && w(i, j) == 0.0 && rng.bernoulli(density)) w(i, j) = rng.uniform(wmin, wmax);
  return lapflow::WeightedDigraph(std::move(w));
}

/// Random type-symmetric graph with ratio bound K over a connected
/// undirected pattern (path backbone plus density extras).
inline lapflow::WeightedDigraph random_type_symmetric_graph(lapflow::SplitMix64& rng, int n,
                                                            double density, double K,
                                                            double wmin = 0.5,
                                                            double wmax = 1.5) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  auto add_pair = [&](int i, int j) {
    const double base = rng.uniform(wmin, wmax);
    double other = base * rng.uniform(1.0 / K, K);
    other = std::clamp(other, wmin / K, wmax * K);
    w(i, j) = base;
    w(j, i) = other;
  };
  for (int i = 0; i + 1 < n; ++i) add_pair(i, i + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (w(i, j) == 0.0 && rng.bernoulli(density)) add_pair(i, j);
  return lapflow::WeightedDigraph(std::move(w));
}

/// Matrix exponential by scaling and squaring with a Taylor core;
/// test-only oracle for transition matrices of static graphs.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd a = m * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

// ---- planar convex-hull helpers for the grid projection oracle ----

/// Convex hull of 2-D points (monotone chain), counter-clockwise.
inline std::vector<Eigen::Vector2d> hull2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> h(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

inline bool inside_hull(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p,
                        double eps = 1e-12) {
  if (hull.size() == 1) return (p - hull[0]).norm() <= eps;
  if (hull.size() == 2) {
    const Eigen::Vector2d d = hull[1] - hull[0];
    const double t = std::clamp((p - hull[0]).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (p - (hull[0] + t * d)).norm() <= eps;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d& a = hull[i];
    const Eigen::Vector2d& b = hull[(i + 1) % hull.size()];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross < -eps) return false;
  }
  return true;
}

/// Min distance from xi to the hull over a dense grid of in-hull points.
inline double grid_hull_distance(const std::vector<Eigen::Vector2d>& vertices,
                                 const Eigen::Vector2d& xi, double spacing) {
  const auto hull = hull2d(vertices);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& v : hull) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  double best = 1e300;
  for (double x = xmin; x <= xmax + spacing / 2; x += spacing) {
    for (double y = ymin; y <= ymax + spacing / 2; y += spacing) {
      const Eigen::Vector2d p(x, y);
      if (!inside_hull(hull, p)) continue;
      best = std::min(best, (p - xi).norm());
    }
  }
  // Vertices are exact hull points as well.
  for (const auto& v : vertices) best = std::min(best, (v - xi).norm());
  return best;
}

}  // namespace oracle
