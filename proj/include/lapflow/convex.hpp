#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "lapflow/common.hpp"

namespace lapflow {

struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// {x : normal . x <= offset} with |normal| = 1 (factories normalize).
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

struct Singleton {
  Eigen::VectorXd point;
};

struct Polytope {
  std::vector<Eigen::VectorXd> vertices;
};

class ConvexSet;

struct Intersection {
  std::vector<ConvexSet> members;
};

/// Closed convex target set, one of six shapes. Construction validates the
/// shape invariants; nonemptiness of intersections is caller-asserted and
/// probed separately (intersection_infeasibility).
class ConvexSet {
 public:
  using Variant = std::variant<Ball, Box, Halfspace, Singleton, Polytope, Intersection>;

  explicit ConvexSet(Ball b) : v_(std::move(b)) { validate(); }
  explicit ConvexSet(Box b) : v_(std::move(b)) { validate(); }
  explicit ConvexSet(Halfspace h) : v_(std::move(h)) { validate(); }
  explicit ConvexSet(Singleton s) : v_(std::move(s)) { validate(); }
  explicit ConvexSet(Polytope p) : v_(std::move(p)) { validate(); }
  explicit ConvexSet(Intersection i) : v_(std::move(i)) { validate(); }

  static ConvexSet ball(Eigen::VectorXd center, double radius) {
    return ConvexSet(Ball{std::move(center), radius});
  }
  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    return ConvexSet(Box{std::move(lower), std::move(upper)});
  }
  static ConvexSet halfspace(Eigen::VectorXd normal, double offset) {
    const double nrm = normal.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("Halfspace: zero normal");
    return ConvexSet(Halfspace{normal / nrm, offset / nrm});
  }
  static ConvexSet singleton(Eigen::VectorXd point) {
    return ConvexSet(Singleton{std::move(point)});
  }
  static ConvexSet polytope(std::vector<Eigen::VectorXd> vertices) {
    return ConvexSet(Polytope{std::move(vertices)});
  }
  static ConvexSet intersection(std::vector<ConvexSet> members) {
    return ConvexSet(Intersection{std::move(members)});
  }

  int dim() const { return dim_; }
  const Variant& variant() const { return v_; }

 private:
  void validate() {
    dim_ = std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Ball>) {
            if (!(s.radius > 0.0)) throw std::invalid_argument("Ball: radius must be positive");
            return static_cast<int>(s.center.size());
          } else if constexpr (std::is_same_v<T, Box>) {
            if (s.lower.size() != s.upper.size())
              throw std::invalid_argument("Box: bound dimensions differ");
            if (((s.upper - s.lower).array() < 0.0).any())
              throw std::invalid_argument("Box: lower must be <= upper componentwise");
            return static_cast<int>(s.lower.size());
          } else if constexpr (std::is_same_v<T, Halfspace>) {
            if (std::abs(s.normal.norm() - 1.0) > 1e-9)
              throw std::invalid_argument("Halfspace: normal must have unit norm");
            return static_cast<int>(s.normal.size());
          } else if constexpr (std::is_same_v<T, Singleton>) {
            return static_cast<int>(s.point.size());
          } else if constexpr (std::is_same_v<T, Polytope>) {
            if (s.vertices.empty()) throw std::invalid_argument("Polytope: needs >= 1 vertex");
            const auto d = s.vertices.front().size();
            for (const auto& v : s.vertices)
              if (v.size() != d) throw std::invalid_argument("Polytope: vertex dimensions differ");
            return static_cast<int>(d);
          } else {
            if (s.members.empty()) throw std::invalid_argument("Intersection: needs >= 1 member");
            const int d = s.members.front().dim();
            for (const auto& m : s.members)
              if (m.dim() != d) throw std::invalid_argument("Intersection: member dimensions differ");
            return d;
          }
        },
        v_);
  }

  Variant v_;
  int dim_ = 0;
};

/// Nearest point of the set plus the residual xi - P(xi) and its norm.
/// Iterative solves (polytope, intersection) report convergence status and
/// the achieved gap/movement; polytope projections expose the simplex
/// weights of the returned convex combination.
struct ProjectionResult {
  Eigen::VectorXd projection;
  Eigen::VectorXd residual;
  double distance = 0.0;
  bool converged = true;
  int iterations = 0;
  double achieved = 0.0;
  std::optional<Eigen::VectorXd> hull_weights;
};

struct ProjectOptions {
  double tol = kTauProj;
  int polytope_cap = 10000;
  int dykstra_cap = 50000;  // total member projections across sweeps
};

ProjectionResult project(const ConvexSet& set, const Eigen::VectorXd& xi,
                         const ProjectOptions& opt = {});

namespace detail {

inline ProjectionResult finish(const Eigen::VectorXd& xi, Eigen::VectorXd proj) {
  ProjectionResult r;
  r.projection = std::move(proj);
  r.residual = xi - r.projection;
  r.distance = r.residual.norm();
  return r;
}

/// Nearest point in a convex hull: min |V lambda - xi| over the simplex.
/// Active-set scheme in the Frank-Wolfe family: the most-aligned vertex
/// enters the active set, the affine least-squares problem on that set is
/// solved exactly, and vertices whose weights would turn negative are
/// dropped (away steps). Terminates at machine precision for the small
/// vertex counts used here; the FW gap is the stopping criterion.
inline ProjectionResult project_polytope(const Polytope& poly, const Eigen::VectorXd& xi,
                                         const ProjectOptions& opt) {
  const int k = static_cast<int>(poly.vertices.size());
  const int d = static_cast<int>(xi.size());
  Eigen::MatrixXd V(d, k);
  for (int j = 0; j < k; ++j) V.col(j) = poly.vertices[j];

  if (k == 1) {
    auto r = finish(xi, V.col(0));
    r.hull_weights = Eigen::VectorXd::Ones(1);
    return r;
  }

  int best = 0;
  double best_d = (V.col(0) - xi).squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double dj = (V.col(j) - xi).squaredNorm();
    if (dj < best_d) {
      best_d = dj;
      best = j;
    }
  }
  std::vector<int> active{best};
  Eigen::VectorXd mu = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd x = V.col(best);

  // Affine least squares over the active set, parameterized around the
  // first active vertex so degenerate (collinear) sets stay solvable.
  const auto affine_solve = [&](Eigen::VectorXd* weights) {
    const int m = static_cast<int>(active.size());
    if (m == 1) {
      *weights = Eigen::VectorXd::Ones(1);
      return;
    }
    Eigen::MatrixXd basis(d, m - 1);
    for (int j = 1; j < m; ++j) basis.col(j - 1) = V.col(active[j]) - V.col(active[0]);
    const Eigen::VectorXd alpha =
        basis.colPivHouseholderQr().solve(xi - V.col(active[0]));
    weights->resize(m);
    (*weights)(0) = 1.0 - alpha.sum();
    weights->tail(m - 1) = alpha;
  };
  const auto combo = [&]() {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < active.size(); ++j) y += mu(j) * V.col(active[j]);
    return y;
  };

  double gap = 0.0;
  int iter = 0;
  bool converged = false;
  for (; iter < opt.polytope_cap; ++iter) {
    const Eigen::VectorXd g = x - xi;  // gradient of 1/2 |x - xi|^2
    int s = 0;
    double s_val = g.dot(V.col(0));
    for (int j = 1; j < k; ++j) {
      const double val = g.dot(V.col(j));
      if (val < s_val) {
        s_val = val;
        s = j;
      }
    }
    gap = g.dot(x) - s_val;
    if (gap <= opt.tol) {
      converged = true;
      break;
    }
    if (std::find(active.begin(), active.end(), s) == active.end()) {
      active.push_back(s);
      mu.conservativeResize(mu.size() + 1);
      mu(mu.size() - 1) = 0.0;
    }
    // Minor cycles: land on the affine optimum of the active set, dropping
    // vertices whose weights would leave the simplex.
    while (true) {
      Eigen::VectorXd nu;
      affine_solve(&nu);
      if (nu.minCoeff() >= -1e-12) {
        mu = nu.cwiseMax(0.0);
        mu /= mu.sum();
        x = combo();
        break;
      }
      double theta = 1.0;
      for (int j = 0; j < nu.size(); ++j)
        if (nu(j) < 0.0 && mu(j) > nu(j)) theta = std::min(theta, mu(j) / (mu(j) - nu(j)));
      mu += theta * (nu - mu);
      std::vector<int> keep_idx;
      for (int j = 0; j < mu.size(); ++j)
        if (mu(j) > 1e-12) keep_idx.push_back(j);
      if (keep_idx.empty()) keep_idx.push_back(0);
      std::vector<int> next_active;
      Eigen::VectorXd next_mu(keep_idx.size());
      for (std::size_t j = 0; j < keep_idx.size(); ++j) {
        next_active.push_back(active[keep_idx[j]]);
        next_mu(j) = mu(keep_idx[j]);
      }
      active = std::move(next_active);
      mu = next_mu / next_mu.sum();
      x = combo();
    }
  }

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
  for (std::size_t j = 0; j < active.size(); ++j) lambda(active[j]) += mu(j);
  auto r = finish(xi, x);
  r.converged = converged;
  r.iterations = iter;
  r.achieved = gap;
  r.hull_weights = lambda;
  return r;
}

/// Dykstra's alternating scheme with per-member correction terms; unlike
/// plain alternating projections it converges to the exact projection onto
/// the intersection. Stops when a full sweep moves the iterate < tol.
inline ProjectionResult project_intersection(const Intersection& inter, const Eigen::VectorXd& xi,
                                             const ProjectOptions& opt) {
  const int m = static_cast<int>(inter.members.size());
  Eigen::VectorXd x = xi;
  std::vector<Eigen::VectorXd> corr(m, Eigen::VectorXd::Zero(xi.size()));

  int used = 0;
  double move = std::numeric_limits<double>::infinity();
  bool converged = false;
  while (used + m <= opt.dykstra_cap) {
    const Eigen::VectorXd before = x;
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd y = x + corr[i];
      auto r = project(inter.members[i], y, opt);
      corr[i] = y - r.projection;
      x = r.projection;
      ++used;
    }
    move = (x - before).norm();
    if (move < opt.tol) {
      converged = true;
      break;
    }
  }

  auto r = finish(xi, x);
  r.converged = converged;
  r.iterations = used;
  r.achieved = move;
  return r;
}

}  // namespace detail

inline ProjectionResult project(const ConvexSet& set, const Eigen::VectorXd& xi,
                                const ProjectOptions& opt) {
  if (static_cast<int>(xi.size()) != set.dim())
    throw std::invalid_argument("project: point dimension does not match the set");
  return std::visit(
      [&](const auto& s) -> ProjectionResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Ball>) {
          const Eigen::VectorXd delta = xi - s.center;
          const double d = delta.norm();
          if (d <= s.radius) return detail::finish(xi, xi);
          return detail::finish(xi, s.center + delta * (s.radius / d));
        } else if constexpr (std::is_same_v<T, Box>) {
          return detail::finish(xi, xi.cwiseMax(s.lower).cwiseMin(s.upper));
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          const double excess = s.normal.dot(xi) - s.offset;
          if (excess <= 0.0) return detail::finish(xi, xi);
          return detail::finish(xi, xi - excess * s.normal);
        } else if constexpr (std::is_same_v<T, Singleton>) {
          return detail::finish(xi, s.point);
        } else if constexpr (std::is_same_v<T, Polytope>) {
          return detail::project_polytope(s, xi, opt);
        } else {
          return detail::project_intersection(s, xi, opt);
        }
      },
      set.variant());
}

inline double distance_to(const ConvexSet& set, const Eigen::VectorXd& xi,
                          const ProjectOptions& opt = {}) {
  return project(set, xi, opt).distance;
}

inline bool contains(const ConvexSet& set, const Eigen::VectorXd& xi, double tol = kTauFeas,
                     const ProjectOptions& opt = {}) {
  return distance_to(set, xi, opt) <= tol;
}

/// Feasibility probe for an intersection: lands Dykstra at `start` and
/// reports the worst member distance at the landing point (≈0 iff the
/// intersection is nonempty near there).
inline double intersection_infeasibility(const Intersection& inter, const Eigen::VectorXd& start,
                                         const ProjectOptions& opt = {}) {
  const auto landing = detail::project_intersection(inter, start, opt);
  double worst = 0.0;
  for (const auto& m : inter.members)
    worst = std::max(worst, distance_to(m, landing.projection, opt));
  return worst;
}

/// The three projection identities evaluated with slack tau_ineq:
///   (omega - xi1) . xi1^p <= -|xi1^p|^2            (anchor bound)
///   (xi2 - xi1) . xi1^p <= xi2^p . xi1^p - |xi1^p|^2   (pair bound)
///   (xi2 - xi1) . (xi2^p - xi1^p) >= |xi2^p - xi1^p|^2 (residual monotonicity)
struct ProjectionInequalities {
  bool omega_bound = false;
  bool pair_bound = false;
  bool residual_monotone = false;
  bool all() const { return omega_bound && pair_bound && residual_monotone; }
};

inline ProjectionInequalities check_projection_inequalities(
    const ConvexSet& set, const Eigen::VectorXd& xi1, const Eigen::VectorXd& xi2,
    const Eigen::VectorXd& omega, double tau_ineq = kTauIneq, double tau_feas = kTauFeas,
    const ProjectOptions& opt = {}) {
  if (distance_to(set, omega, opt) > tau_feas)
    throw std::invalid_argument("check_projection_inequalities: omega is not in the set");
  const Eigen::VectorXd p1 = project(set, xi1, opt).residual;
  const Eigen::VectorXd p2 = project(set, xi2, opt).residual;
  ProjectionInequalities out;
  out.omega_bound = (omega - xi1).dot(p1) <= -p1.squaredNorm() + tau_ineq;
  out.pair_bound = (xi2 - xi1).dot(p1) <= p2.dot(p1) - p1.squaredNorm() + tau_ineq;
  out.residual_monotone = (xi2 - xi1).dot(p2 - p1) >= (p2 - p1).squaredNorm() - tau_ineq;
  return out;
}

/// Analytic gradient 2 (xi - P(xi)) of the squared distance, paired with its
/// central finite-difference estimate at step h.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> distance_squared_gradient(
    const ConvexSet& set, const Eigen::VectorXd& xi, double h, const ProjectOptions& opt = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("distance_squared_gradient: h must be positive");
  const Eigen::VectorXd analytic = 2.0 * project(set, xi, opt).residual;
  Eigen::VectorXd fd(xi.size());
  for (int i = 0; i < xi.size(); ++i) {
    Eigen::VectorXd hi = xi, lo = xi;
    hi(i) += h;
    lo(i) -= h;
    const double dhi = project(set, hi, opt).distance;
    const double dlo = project(set, lo, opt).distance;
    fd(i) = (dhi * dhi - dlo * dlo) / (2.0 * h);
  }
  return {analytic, fd};
}

}  // namespace lapflow
