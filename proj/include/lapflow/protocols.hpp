#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lapflow/convex.hpp"
#include "lapflow/dynamics.hpp"
#include "lapflow/field.hpp"
#include "lapflow/graph.hpp"

namespace lapflow {

namespace detail {

inline int segment_index(const std::vector<double>& bp, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("segment lookup: time must be nonnegative");
  auto it = std::upper_bound(bp.begin(), bp.end(), t);
  return static_cast<int>(it - bp.begin()) - 1;
}

inline void check_breakpoints(const std::vector<double>& bp, const char* who) {
  if (bp.empty() || bp.front() != 0.0)
    throw std::invalid_argument(std::string(who) + ": breakpoints must start at 0");
  for (std::size_t k = 1; k < bp.size(); ++k)
    if (!(bp[k] > bp[k - 1]))
      throw std::invalid_argument(std::string(who) + ": breakpoints must be strictly increasing");
}

/// Drift matrix of a signed coupling: off-diagonal b_ij, diagonal minus the
/// row sum of |b_ij|. For nonnegative b this is exactly -L[b].
inline Eigen::MatrixXd signed_drift(const Eigen::MatrixXd& b) {
  Eigen::MatrixXd m = b;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) s += std::abs(b(i, j));
    m(i, i) = -s;
  }
  return m;
}

}  // namespace detail

/// Piecewise-constant nonnegative per-agent gains a_i0(t).
struct GainSignal {
  std::vector<double> breakpoints;
  std::vector<Eigen::VectorXd> values;  // one n-vector per segment

  GainSignal() = default;
  GainSignal(std::vector<double> bp, std::vector<Eigen::VectorXd> vals)
      : breakpoints(std::move(bp)), values(std::move(vals)) {
    detail::check_breakpoints(breakpoints, "GainSignal");
    if (breakpoints.size() != values.size())
      throw std::invalid_argument("GainSignal: one value vector per breakpoint");
    for (const auto& v : values)
      if ((v.array() < 0.0).any() || !v.allFinite())
        throw std::invalid_argument("GainSignal: gains must be finite and nonnegative");
  }

  static GainSignal constant(Eigen::VectorXd v) { return GainSignal({0.0}, {std::move(v)}); }

  int agents() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  const Eigen::VectorXd& at(double t) const {
    return values[detail::segment_index(breakpoints, t)];
  }
  double max_gain() const {
    double m = 0.0;
    for (const auto& v : values)
      if (v.size() > 0) m = std::max(m, v.maxCoeff());
    return m;
  }
};

/// Piecewise-constant anchor points, one d-vector per agent per segment.
struct AnchorSignal {
  std::vector<double> breakpoints;
  std::vector<std::vector<Eigen::VectorXd>> points;  // [segment][agent]

  AnchorSignal() = default;
  AnchorSignal(std::vector<double> bp, std::vector<std::vector<Eigen::VectorXd>> pts)
      : breakpoints(std::move(bp)), points(std::move(pts)) {
    detail::check_breakpoints(breakpoints, "AnchorSignal");
    if (breakpoints.size() != points.size())
      throw std::invalid_argument("AnchorSignal: one point list per breakpoint");
  }

  static AnchorSignal constant(std::vector<Eigen::VectorXd> pts) {
    return AnchorSignal({0.0}, {std::move(pts)});
  }

  const std::vector<Eigen::VectorXd>& at(double t) const {
    return points[detail::segment_index(breakpoints, t)];
  }
};

/// Scalar lift x_i = 1/2 |xi_i - P(xi_i)|^2 per agent, with the exact rate
/// (xi_i - P(xi_i)) . dxi_i from the distance-squared gradient identity.
inline Lift projection_lift(ConvexSet target, int agents, int dim) {
  auto set = std::make_shared<const ConvexSet>(std::move(target));
  Lift l;
  l.value = [set, agents, dim](double, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(agents);
    for (int i = 0; i < agents; ++i) {
      const Eigen::VectorXd xi = x.segment(static_cast<Eigen::Index>(i) * dim, dim);
      out(i) = 0.5 * project(*set, xi).residual.squaredNorm();
    }
    return out;
  };
  l.rate = [set, agents, dim](double, const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
    Eigen::VectorXd out(agents);
    for (int i = 0; i < agents; ++i) {
      const Eigen::VectorXd xi = x.segment(static_cast<Eigen::Index>(i) * dim, dim);
      const Eigen::VectorXd dxi = dx.segment(static_cast<Eigen::Index>(i) * dim, dim);
      out(i) = project(*set, xi).residual.dot(dxi);
    }
    return out;
  };
  return l;
}

/// Laplacian flow dx = -L(t) x (the plain consensus protocol).
inline ProtocolField consensus_field(const GraphSignal& s) {
  ProtocolField f;
  f.kind = "consensus";
  f.agents = s.size();
  f.dim = 1;
  f.graph = s;
  f.rate_bound = std::max(1e-9, s.weight_bound() * s.size());
  f.switch_times = s.breakpoints();
  auto drift = std::make_shared<std::vector<Eigen::MatrixXd>>();
  for (const auto& seg : s.segments()) drift->push_back(detail::signed_drift(seg.weights()));
  auto bp = std::make_shared<std::vector<double>>(s.breakpoints());
  f.rhs = [drift, bp](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (*drift)[detail::segment_index(*bp, t)] * x;
  };
  f.lift = identity_lift();
  return f;
}

/// Consensus flow with a designated leader whose row is identically zero;
/// the leader's state is invariant along solutions.
inline ProtocolField leader_field(const GraphSignal& s, int leader) {
  if (leader < 0 || leader >= s.size())
    throw std::invalid_argument("leader_field: leader index out of range");
  for (const auto& seg : s.segments())
    if (seg.weights().row(leader).cwiseAbs().maxCoeff() > 0.0)
      throw std::invalid_argument("leader_field: leader row must be zero in every segment");
  ProtocolField f = consensus_field(s);
  f.kind = "leader";
  f.leader_index = leader;
  return f;
}

/// Target aggregation: consensus coupling plus attraction of informed
/// agents toward anchor points of the target set.
struct AggregationParams {
  ConvexSet target;
  GainSignal gains;
  // Fixed anchors per segment; empty selects the consensus variant
  // w_i(t) = P(xi_i(t)) computed on the fly.
  std::optional<AnchorSignal> anchors;
};

inline ProtocolField aggregation_field(const GraphSignal& s, const AggregationParams& p,
                                       double tau_feas = kTauFeas) {
  const int n = s.size();
  const int d = p.target.dim();
  if (p.gains.agents() != n)
    throw std::invalid_argument("aggregation_field: gain vector size must match the graph");

  if (p.anchors) {
    // Every anchor must lie in the target whenever its agent is informed.
    const auto merged = merge_breakpoints({&p.gains.breakpoints, &p.anchors->breakpoints});
    for (double t : merged) {
      const Eigen::VectorXd& g = p.gains.at(t);
      const auto& pts = p.anchors->at(t);
      if (static_cast<int>(pts.size()) != n)
        throw std::invalid_argument("aggregation_field: one anchor per agent required");
      for (int i = 0; i < n; ++i) {
        if (g(i) > 0.0 && distance_to(p.target, pts[i]) > tau_feas)
          throw std::invalid_argument("aggregation_field: infeasible anchor on an informed segment");
      }
    }
  }

  ProtocolField f;
  f.kind = "aggregation";
  f.agents = n;
  f.dim = d;
  f.graph = s;
  f.rate_bound = std::max(1e-9, s.weight_bound() * n + p.gains.max_gain());
  f.switch_times = p.anchors
                       ? merge_breakpoints({&s.breakpoints(), &p.gains.breakpoints,
                                            &p.anchors->breakpoints})
                       : merge_breakpoints({&s.breakpoints(), &p.gains.breakpoints});
  auto graph = std::make_shared<const GraphSignal>(s);
  auto params = std::make_shared<const AggregationParams>(p);
  f.rhs = [graph, params, n, d](double t, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd& a = graph->at(t).weights();
    const Eigen::VectorXd& g = params->gains.at(t);
    const std::vector<Eigen::VectorXd>* anchors =
        params->anchors ? &params->anchors->at(t) : nullptr;
    Eigen::VectorXd out(n * d);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.segment(static_cast<Eigen::Index>(i) * d, d);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < n; ++j) {
        if (a(i, j) != 0.0)
          acc += a(i, j) * (x.segment(static_cast<Eigen::Index>(j) * d, d) - xi);
      }
      if (g(i) > 0.0) {
        const Eigen::VectorXd omega =
            anchors ? (*anchors)[i] : project(params->target, xi).projection;
        acc += g(i) * (omega - xi);
      }
      out.segment(static_cast<Eigen::Index>(i) * d, d) = acc;
    }
    return out;
  };
  f.lift = projection_lift(p.target, n, d);
  return f;
}

/// Extended (n+1)-node signal with the target set as virtual agent 0: row 0
/// is zero (nothing influences the target) and column 0 carries the informed
/// gains a_i0(t).
inline GraphSignal extend_with_virtual_agent(const GraphSignal& s, const AggregationParams& p) {
  const int n = s.size();
  if (p.gains.agents() != n)
    throw std::invalid_argument("extend_with_virtual_agent: gain size must match the graph");
  const auto merged = merge_breakpoints({&s.breakpoints(), &p.gains.breakpoints});
  std::vector<WeightedDigraph> segments;
  segments.reserve(merged.size());
  for (double t : merged) {
    Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(n + 1, n + 1);
    ext.block(1, 1, n, n) = s.at(t).weights();
    ext.block(1, 0, n, 1) = p.gains.at(t);
    segments.emplace_back(std::move(ext));
  }
  return GraphSignal(merged, std::move(segments));
}

/// Containment control: consensus among followers plus coupling to q static
/// leader positions through time-varying leader gains.
struct ContainmentParams {
  std::vector<Eigen::VectorXd> leader_positions;  // q >= 1
  std::vector<double> gain_breakpoints;           // same convention as GraphSignal
  std::vector<Eigen::MatrixXd> leader_gains;      // one n x q matrix per segment

  int leaders() const { return static_cast<int>(leader_positions.size()); }
  const Eigen::MatrixXd& gains_at(double t) const {
    return leader_gains[detail::segment_index(gain_breakpoints, t)];
  }
};

inline void validate(const ContainmentParams& p, int n) {
  if (p.leader_positions.empty())
    throw std::invalid_argument("ContainmentParams: at least one leader required");
  const auto d = p.leader_positions.front().size();
  for (const auto& pos : p.leader_positions)
    if (pos.size() != d) throw std::invalid_argument("ContainmentParams: leader dimensions differ");
  detail::check_breakpoints(p.gain_breakpoints, "ContainmentParams");
  if (p.gain_breakpoints.size() != p.leader_gains.size())
    throw std::invalid_argument("ContainmentParams: one gain matrix per breakpoint");
  for (const auto& g : p.leader_gains) {
    if (g.rows() != n || g.cols() != p.leaders())
      throw std::invalid_argument("ContainmentParams: gain matrices must be agents x leaders");
    if ((g.array() < 0.0).any() || !g.allFinite())
      throw std::invalid_argument("ContainmentParams: leader gains must be finite and nonnegative");
  }
}

inline ProtocolField containment_field(const GraphSignal& s, const ContainmentParams& p) {
  const int n = s.size();
  validate(p, n);
  const int d = static_cast<int>(p.leader_positions.front().size());
  const int q = p.leaders();

  double gmax = 0.0;
  for (const auto& g : p.leader_gains)
    if (g.size() > 0) gmax = std::max(gmax, g.maxCoeff());

  ProtocolField f;
  f.kind = "containment";
  f.agents = n;
  f.dim = d;
  f.graph = s;
  f.rate_bound = std::max(1e-9, s.weight_bound() * n + gmax * q);
  f.switch_times = merge_breakpoints({&s.breakpoints(), &p.gain_breakpoints});
  auto graph = std::make_shared<const GraphSignal>(s);
  auto params = std::make_shared<const ContainmentParams>(p);
  f.rhs = [graph, params, n, d, q](double t, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd& a = graph->at(t).weights();
    const Eigen::MatrixXd& g = params->gains_at(t);
    Eigen::VectorXd out(n * d);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.segment(static_cast<Eigen::Index>(i) * d, d);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < n; ++j) {
        if (a(i, j) != 0.0)
          acc += a(i, j) * (x.segment(static_cast<Eigen::Index>(j) * d, d) - xi);
      }
      for (int l = 0; l < q; ++l) {
        if (g(i, l) != 0.0) acc += g(i, l) * (params->leader_positions[l] - xi);
      }
      out.segment(static_cast<Eigen::Index>(i) * d, d) = acc;
    }
    return out;
  };
  f.lift = projection_lift(ConvexSet::polytope(p.leader_positions), n, d);
  return f;
}

/// The reduction of containment to aggregation: target = hull of the
/// leaders, a_i0 = summed leader gains, anchors = the convex combination of
/// leader positions (zero point when an agent sees no leader).
inline AggregationParams containment_reduction(const ContainmentParams& p, int n) {
  validate(p, n);
  const int d = static_cast<int>(p.leader_positions.front().size());
  const int q = p.leaders();
  std::vector<Eigen::VectorXd> gain_values;
  std::vector<std::vector<Eigen::VectorXd>> anchor_points;
  for (const auto& g : p.leader_gains) {
    Eigen::VectorXd gains(n);
    std::vector<Eigen::VectorXd> anchors(n);
    for (int i = 0; i < n; ++i) {
      gains(i) = g.row(i).sum();
      if (gains(i) > 0.0) {
        Eigen::VectorXd omega = Eigen::VectorXd::Zero(d);
        for (int l = 0; l < q; ++l) omega += (g(i, l) / gains(i)) * p.leader_positions[l];
        anchors[i] = std::move(omega);
      } else {
        anchors[i] = Eigen::VectorXd::Zero(d);
      }
    }
    gain_values.push_back(std::move(gains));
    anchor_points.push_back(std::move(anchors));
  }
  return AggregationParams{
      ConvexSet::polytope(p.leader_positions),
      GainSignal(p.gain_breakpoints, std::move(gain_values)),
      AnchorSignal(p.gain_breakpoints, std::move(anchor_points)),
  };
}

/// Optimal consensus: each agent is pulled toward the projection onto its
/// own set while the coupling drives agreement; the common target is the
/// intersection of all sets.
inline ProtocolField optimal_consensus_field(const GraphSignal& s,
                                             const std::vector<ConvexSet>& sets,
                                             double tau_feas = kTauFeas) {
  const int n = s.size();
  if (static_cast<int>(sets.size()) != n)
    throw std::invalid_argument("optimal_consensus_field: one set per agent required");
  const int d = sets.front().dim();
  for (const auto& set : sets)
    if (set.dim() != d)
      throw std::invalid_argument("optimal_consensus_field: set dimensions differ");

  ProtocolField f;
  f.kind = "optimal-consensus";
  f.agents = n;
  f.dim = d;
  f.graph = s;
  f.rate_bound = std::max(1e-9, s.weight_bound() * n + 2.0);
  f.switch_times = s.breakpoints();

  Intersection inter{sets};
  const double infeas = intersection_infeasibility(inter, Eigen::VectorXd::Zero(d));
  if (infeas > 100.0 * tau_feas)
    f.warnings.push_back("optimal-consensus: intersection feasibility probe failed (distance " +
                         format_double(infeas) + "); convergence hypotheses are violated");

  auto graph = std::make_shared<const GraphSignal>(s);
  auto shared_sets = std::make_shared<const std::vector<ConvexSet>>(sets);
  f.rhs = [graph, shared_sets, n, d](double t, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd& a = graph->at(t).weights();
    Eigen::VectorXd out(n * d);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.segment(static_cast<Eigen::Index>(i) * d, d);
      Eigen::VectorXd acc = project((*shared_sets)[i], xi).projection - xi;
      for (int j = 0; j < n; ++j) {
        if (a(i, j) != 0.0)
          acc += a(i, j) * (x.segment(static_cast<Eigen::Index>(j) * d, d) - xi);
      }
      out.segment(static_cast<Eigen::Index>(i) * d, d) = acc;
    }
    return out;
  };
  f.lift = projection_lift(ConvexSet(std::move(inter)), n, d);
  return f;
}

/// Target surrounding with unimodular complex weights on the plane. W is
/// either given directly or generated from unit phases p_i as w_ij =
/// conj(p_i) p_j, which makes it consistent by construction.
struct SurroundingParams {
  ConvexSet target;
  Eigen::MatrixXcd W;
  std::optional<Eigen::VectorXcd> generators;

  static SurroundingParams direct(ConvexSet target, Eigen::MatrixXcd W) {
    return SurroundingParams{std::move(target), std::move(W), std::nullopt};
  }
  static SurroundingParams consistent(ConvexSet target, Eigen::VectorXcd p) {
    const int n = static_cast<int>(p.size());
    Eigen::MatrixXcd W(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) W(i, j) = std::conj(p(i)) * p(j);
    return SurroundingParams{std::move(target), std::move(W), std::move(p)};
  }
};

inline ProtocolField surrounding_field(const GraphSignal& s, const SurroundingParams& p) {
  const int n = s.size();
  if (p.target.dim() != 2)
    throw std::invalid_argument("surrounding_field: planar states required");
  if (p.W.rows() != n || p.W.cols() != n)
    throw std::invalid_argument("surrounding_field: W must be agents x agents");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && std::abs(std::abs(p.W(i, j)) - 1.0) > 1e-12)
        throw std::invalid_argument("surrounding_field: W must be unimodular");
  if (p.generators) {
    if (p.generators->size() != n)
      throw std::invalid_argument("surrounding_field: one generator per agent required");
    for (int i = 0; i < n; ++i)
      if (std::abs(std::abs((*p.generators)(i)) - 1.0) > 1e-12)
        throw std::invalid_argument("surrounding_field: generators must have unit modulus");
  }

  ProtocolField f;
  f.kind = "surrounding";
  f.agents = n;
  f.dim = 2;
  f.graph = s;
  f.rate_bound = std::max(1e-9, 2.0 * s.weight_bound() * n);
  f.switch_times = s.breakpoints();
  auto graph = std::make_shared<const GraphSignal>(s);
  auto target = std::make_shared<const ConvexSet>(p.target);
  auto w = std::make_shared<const Eigen::MatrixXcd>(p.W);
  f.rhs = [graph, target, w, n](double t, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd& a = graph->at(t).weights();
    Eigen::VectorXcd zp(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd res = project(*target, x.segment(2 * i, 2)).residual;
      zp(i) = std::complex<double>(res(0), res(1));
    }
    Eigen::VectorXd out(2 * n);
    for (int i = 0; i < n; ++i) {
      std::complex<double> acc{0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        if (a(i, j) != 0.0) acc += a(i, j) * ((*w)(i, j) * zp(j) - zp(i));
      }
      out(2 * i) = acc.real();
      out(2 * i + 1) = acc.imag();
    }
    return out;
  };
  f.lift = projection_lift(p.target, n, 2);
  return f;
}

/// Signed opinion coupling: positive entries attract, negative entries
/// repel toward the opposite opinion.
struct AltafiniParams {
  std::vector<double> breakpoints;
  std::vector<Eigen::MatrixXd> signed_segments;

  AltafiniParams() = default;
  AltafiniParams(std::vector<double> bp, std::vector<Eigen::MatrixXd> segs)
      : breakpoints(std::move(bp)), signed_segments(std::move(segs)) {
    detail::check_breakpoints(breakpoints, "AltafiniParams");
    if (breakpoints.size() != signed_segments.size())
      throw std::invalid_argument("AltafiniParams: one segment per breakpoint");
    const auto n = signed_segments.front().rows();
    for (const auto& b : signed_segments) {
      if (b.rows() != n || b.cols() != n)
        throw std::invalid_argument("AltafiniParams: segments must be square and consistent");
      if (!b.allFinite()) throw std::invalid_argument("AltafiniParams: weights must be finite");
      for (Eigen::Index i = 0; i < n; ++i)
        if (b(i, i) != 0.0) throw std::invalid_argument("AltafiniParams: zero diagonal required");
    }
  }

  static AltafiniParams constant(Eigen::MatrixXd b) {
    return AltafiniParams({0.0}, {std::move(b)});
  }

  int agents() const {
    return signed_segments.empty() ? 0 : static_cast<int>(signed_segments.front().rows());
  }

  /// The derived unsigned interaction signal a_ij = |b_ij|.
  GraphSignal unsigned_signal() const {
    std::vector<WeightedDigraph> segs;
    segs.reserve(signed_segments.size());
    for (const auto& b : signed_segments) segs.emplace_back(b.cwiseAbs().eval());
    return GraphSignal(breakpoints, std::move(segs));
  }
};

inline ProtocolField altafini_field(const AltafiniParams& p) {
  const int n = p.agents();
  if (n == 0) throw std::invalid_argument("altafini_field: empty parameters");

  ProtocolField f;
  f.kind = "altafini";
  f.agents = n;
  f.dim = 1;
  f.graph = p.unsigned_signal();
  f.rate_bound = std::max(1e-9, 2.0 * f.graph.weight_bound() * n);
  f.switch_times = p.breakpoints;
  auto drift = std::make_shared<std::vector<Eigen::MatrixXd>>();
  for (const auto& b : p.signed_segments) drift->push_back(detail::signed_drift(b));
  auto bp = std::make_shared<std::vector<double>>(p.breakpoints);
  f.rhs = [drift, bp](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (*drift)[detail::segment_index(*bp, t)] * x;
  };
  // The modulus lift 1/2 |xi_i|^2 solves the inequality on the unsigned graph.
  Lift lift;
  lift.value = [](double, const Eigen::VectorXd& x) {
    return (0.5 * x.array().square()).matrix().eval();
  };
  lift.rate = [](double, const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
    return (x.array() * dx.array()).matrix().eval();
  };
  f.lift = lift;
  return f;
}

}  // namespace lapflow
