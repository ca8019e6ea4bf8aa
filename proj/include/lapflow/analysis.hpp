#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "lapflow/connectivity.hpp"
#include "lapflow/convex.hpp"
#include "lapflow/dynamics.hpp"
#include "lapflow/field.hpp"

namespace lapflow {

enum class ConsensusOutcome { Consensus, BoundedNonConvergent, Unbounded };

inline const char* to_string(ConsensusOutcome o) {
  switch (o) {
    case ConsensusOutcome::Consensus: return "consensus";
    case ConsensusOutcome::BoundedNonConvergent: return "bounded-nonconvergent";
    case ConsensusOutcome::Unbounded: return "unbounded";
  }
  return "?";
}

/// Consensus verdict over the trailing tail of a scalar trajectory: holds
/// when the spread max_i x_i - min_i x_i stays below tol there.
struct ConsensusVerdict {
  ConsensusOutcome outcome = ConsensusOutcome::BoundedNonConvergent;
  double limit = 0.0;       // mean terminal value (consensus outcome only)
  double tail_spread = 0.0; // max spread over the tail window
  double tol = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;

  bool holds() const { return outcome == ConsensusOutcome::Consensus; }
};

inline ConsensusVerdict consensus_verdict(const Trajectory& traj, double tol = 1e-4,
                                          double tail_fraction = 0.25,
                                          double bound_threshold = kBoundThreshold) {
  if (traj.dim != 1) throw std::invalid_argument("consensus_verdict: scalar states required");
  ConsensusVerdict v;
  v.tol = tol;
  if (traj.samples() == 0) return v;
  v.window_end = traj.duration();
  v.window_start = v.window_end * (1.0 - tail_fraction);
  if (traj.diverged || traj.sup_norm() >= bound_threshold) {
    v.outcome = ConsensusOutcome::Unbounded;
    return v;
  }
  double spread = 0.0;
  for (int k = 0; k < traj.samples(); ++k) {
    if (traj.times[k] < v.window_start) continue;
    const double s = traj.states[k].maxCoeff() - traj.states[k].minCoeff();
    spread = std::max(spread, s);
  }
  v.tail_spread = spread;
  if (spread < tol) {
    v.outcome = ConsensusOutcome::Consensus;
    v.limit = traj.states.back().mean();
  } else {
    v.outcome = ConsensusOutcome::BoundedNonConvergent;
  }
  return v;
}

/// Least-squares slope of log e(t); quality is |Pearson correlation|.
struct RateFit {
  bool instant = false;  // distance never rose above the floor
  double rate = 0.0;     // slope of log e(t); negative = decay
  double quality = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  int points = 0;
};

/// Fits log(values) over the window where values lie in [floor, values0/10],
/// skipping the leading transient_fraction of the horizon.
inline RateFit fit_log_decay(const std::vector<double>& times, const std::vector<double>& values,
                             double floor = 1e-12, double transient_fraction = 0.1) {
  RateFit fit;
  if (times.empty()) return fit;
  const double t_skip = times.back() * transient_fraction;
  const double start_value = values.front();
  const double upper = start_value / 10.0;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  int m = 0;
  double w0 = 0, w1 = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_skip) continue;
    const double e = values[k];
    if (e < floor || e > upper) continue;
    const double x = times[k], y = std::log(e);
    if (m == 0) w0 = x;
    w1 = x;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++m;
  }
  if (m < 8) {
    double tail_max = 0.0;
    for (std::size_t k = times.size() / 2; k < times.size(); ++k)
      tail_max = std::max(tail_max, values[k]);
    fit.instant = tail_max < floor || start_value < floor;
    return fit;
  }
  const double denom = m * sxx - sx * sx;
  fit.rate = (m * sxy - sx * sy) / denom;
  const double corr_num = m * sxy - sx * sy;
  const double corr_den = std::sqrt(std::max(denom, 1e-300) * std::max(m * syy - sy * sy, 1e-300));
  fit.quality = std::abs(corr_num / corr_den);
  fit.window_start = w0;
  fit.window_end = w1;
  fit.points = m;
  return fit;
}

/// Exponential-rate fit of the sup-distance max_i |x_i(t) - reference|.
inline RateFit exponential_rate_fit(const Trajectory& traj, double reference,
                                    double floor = 1e-12) {
  if (traj.dim != 1)
    throw std::invalid_argument("exponential_rate_fit: scalar states required");
  std::vector<double> e(traj.samples());
  for (int k = 0; k < traj.samples(); ++k)
    e[k] = (traj.states[k].array() - reference).abs().maxCoeff();
  return fit_log_decay(traj.times, e, floor);
}

/// Cumulative flow/rate/residual integrals with a plateau flag per entry:
/// an integral plateaus when the last 20% of the horizon contributes less
/// than tol of the total (summability evidence).
struct SummabilityReport {
  struct Entry {
    int i = 0;
    int j = -1;  // -1 for per-agent entries
    double total = 0.0;
    double tail_contribution = 0.0;
    bool plateau = false;
  };
  std::vector<Entry> pair_flow;   // int |a_ij (x_j - x_i)| per ordered pair
  std::vector<Entry> state_rate;  // int |dx_i|
  std::vector<Entry> residual;    // int D_i
  double tol = 0.01;
  bool all_plateau = true;
};

inline SummabilityReport summability_check(const Trajectory& traj, const GraphSignal& s,
                                           double tol = 0.01) {
  if (traj.dim != 1) throw std::invalid_argument("summability_check: scalar states required");
  const int n = traj.agents;
  if (s.size() != n) throw std::invalid_argument("summability_check: signal size mismatch");
  SummabilityReport report;
  report.tol = tol;
  const int count = traj.samples();
  if (count < 2) return report;
  const double h = traj.step;
  const double tail_start = traj.duration() * 0.8;

  auto make_entry = [&](int i, int j, const std::vector<double>& integrand) {
    SummabilityReport::Entry e;
    e.i = i;
    e.j = j;
    double total = 0.0, tail = 0.0;
    for (int k = 1; k < count; ++k) {
      const double piece = 0.5 * h * (integrand[k - 1] + integrand[k]);
      total += piece;
      if (traj.times[k] > tail_start) tail += piece;
    }
    e.total = total;
    e.tail_contribution = tail;
    e.plateau = total < 1e-12 || tail < tol * total;
    report.all_plateau = report.all_plateau && e.plateau;
    return e;
  };

  std::vector<double> integrand(count);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      bool ever = false;
      for (int k = 0; k < count; ++k) {
        const double a = s.at(traj.times[k]).weight(i, j);
        integrand[k] = std::abs(a * (traj.states[k](j) - traj.states[k](i)));
        ever = ever || a != 0.0;
      }
      if (!ever) continue;
      report.pair_flow.push_back(make_entry(i, j, integrand));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < count; ++k) integrand[k] = std::abs(traj.derivatives[k](i));
    report.state_rate.push_back(make_entry(i, -1, integrand));
  }
  const auto res = residual_trace(traj, s, identity_lift());
  for (int i = 0; i < n; ++i) {
    std::vector<double> ri(res.values.size());
    for (std::size_t k = 0; k < res.values.size(); ++k) ri[k] = std::abs(res.values[k](i));
    report.residual.push_back(make_entry(i, -1, ri));
  }
  return report;
}

/// Terminal distances to the target set: the equidistance verdict holds
/// when their spread is below tol; d_* is the mean terminal distance.
struct EquidistanceVerdict {
  bool holds = false;
  double d_star = 0.0;
  Eigen::VectorXd distances;
  double spread = 0.0;
  double tol = 0.0;
};

inline EquidistanceVerdict equidistance_verdict(const Trajectory& traj, const ConvexSet& target,
                                                double tol = 1e-4) {
  EquidistanceVerdict v;
  v.tol = tol;
  if (traj.diverged || traj.samples() == 0) return v;
  const int n = traj.agents;
  v.distances.resize(n);
  for (int i = 0; i < n; ++i)
    v.distances(i) = distance_to(target, traj.states.back().segment(
                                             static_cast<Eigen::Index>(i) * traj.dim, traj.dim));
  v.d_star = v.distances.mean();
  v.spread = v.distances.maxCoeff() - v.distances.minCoeff();
  v.holds = v.spread < tol;
  return v;
}

/// Modulus consensus of a signed (Altafini) run: terminal |xi_i| spread
/// below tol. Classifies stability (common modulus ~ 0) vs polarization
/// (two sign camps at +-x_*); agents with |xi_i| < tol stay unclassified.
struct ModulusVerdict {
  bool holds = false;
  double x_star = 0.0;
  Eigen::VectorXd moduli;
  double spread = 0.0;
  double tol = 0.0;
  std::string classification;  // "stability" | "polarization" | "mixed"
  std::vector<int> positive_group;
  std::vector<int> negative_group;
};

inline ModulusVerdict modulus_consensus_verdict(const Trajectory& traj, double tol = 1e-4) {
  if (traj.dim != 1)
    throw std::invalid_argument("modulus_consensus_verdict: scalar states required");
  ModulusVerdict v;
  v.tol = tol;
  if (traj.samples() == 0) return v;
  const Eigen::VectorXd terminal = traj.states.back();
  v.moduli = terminal.cwiseAbs();
  v.x_star = v.moduli.mean();
  v.spread = v.moduli.maxCoeff() - v.moduli.minCoeff();
  v.holds = !traj.diverged && v.spread < tol;
  if (v.x_star < tol) {
    v.classification = "stability";
  } else {
    for (int i = 0; i < terminal.size(); ++i) {
      if (std::abs(terminal(i)) < tol) continue;
      (terminal(i) > 0 ? v.positive_group : v.negative_group).push_back(i);
    }
    const bool split = !v.positive_group.empty() && !v.negative_group.empty();
    const bool onesided = v.positive_group.empty() || v.negative_group.empty();
    v.classification = split ? "polarization" : (onesided ? "consensus-sign" : "mixed");
  }
  return v;
}

/// Tail of the surrounding mismatch max_{i,j} |p_i xi_i^p - p_j xi_j^p|.
struct SurroundVerdict {
  bool holds = false;
  double tail_max = 0.0;
  double tol = 0.0;
  double window_start = 0.0;
  std::vector<double> series_times;
  std::vector<double> series_values;
};

inline SurroundVerdict surround_verdict(const Trajectory& traj, const Eigen::VectorXcd& p,
                                        const ConvexSet& target, double tol = 1e-4,
                                        double tail_fraction = 0.25, int stride = 1) {
  if (traj.dim != 2) throw std::invalid_argument("surround_verdict: planar states required");
  const int n = traj.agents;
  if (p.size() != n) throw std::invalid_argument("surround_verdict: one phase per agent required");
  SurroundVerdict v;
  v.tol = tol;
  if (traj.samples() == 0) return v;
  v.window_start = traj.duration() * (1.0 - tail_fraction);
  double tail_max = 0.0;
  for (int k = 0; k < traj.samples(); k += stride) {
    std::vector<std::complex<double>> gauged(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd res = project(target, traj.states[k].segment(2 * i, 2)).residual;
      gauged[i] = p(i) * std::complex<double>(res(0), res(1));
    }
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) worst = std::max(worst, std::abs(gauged[i] - gauged[j]));
    v.series_times.push_back(traj.times[k]);
    v.series_values.push_back(worst);
    if (traj.times[k] >= v.window_start) tail_max = std::max(tail_max, worst);
  }
  v.tail_max = tail_max;
  v.holds = !traj.diverged && tail_max < tol;
  return v;
}

/// Window contraction certificate: theta = min(e^-C, delta e^-2C) with the
/// conservative row-sum bound C = T N weight_bound, checked against the
/// ordering inequality y_{m+1}(t+T) <= theta y_m(t) + (1-theta) y_N(t).
struct ContractionCertificate {
  double theta = 0.0;
  double theta1 = 0.0;  // e^-C
  double theta2 = 0.0;  // delta e^-2C
  double row_sum_bound = 0.0;
  double T = 0.0;
  double delta = 0.0;
  long long windows_checked = 0;
  long long violations = 0;
  double max_violation = 0.0;
};

inline ContractionCertificate contraction_certificate(const GraphSignal& s, double T, double delta,
                                                      const Trajectory& traj,
                                                      double tau_res = kTauRes) {
  const auto usc = certify_usc(s, T, delta, std::max(traj.duration(), T));
  if (!usc.holds())
    throw CertificateError("contraction_certificate: USC precondition not certified for (T, delta)");
  ContractionCertificate cert;
  cert.T = T;
  cert.delta = delta;
  cert.row_sum_bound = T * s.size() * s.weight_bound();
  cert.theta1 = std::exp(-cert.row_sum_bound);
  cert.theta2 = delta * std::exp(-2.0 * cert.row_sum_bound);
  cert.theta = std::min(cert.theta1, cert.theta2);

  const auto ord = ordering_trace(traj);
  const long long shift = std::llround(T / traj.step);
  if (shift < 1 || std::abs(shift * traj.step - T) > 1e-9 * std::max(1.0, T))
    throw std::invalid_argument("contraction_certificate: T must be a multiple of the step");
  const int n = traj.agents;
  for (long long k = 0; k + shift < traj.samples(); ++k) {
    const auto& now = ord.sorted[k];
    const auto& later = ord.sorted[k + shift];
    for (int m = 0; m + 1 < n; ++m) {
      const double bound = cert.theta * now(m) + (1.0 - cert.theta) * now(n - 1);
      const double excess = later(m + 1) - bound;
      ++cert.windows_checked;
      if (excess > tau_res) {
        ++cert.violations;
        cert.max_violation = std::max(cert.max_violation, excess);
      }
    }
  }
  return cert;
}

/// One classified run of a dichotomy sweep.
struct DichotomyRun {
  std::string label;
  ConsensusOutcome outcome = ConsensusOutcome::BoundedNonConvergent;
  double tail_spread = 0.0;
  bool residual_ok = true;  // crafted inequality solutions only
};

struct DichotomyReport {
  std::vector<DichotomyRun> runs;
  int consensus_count = 0;
  int bounded_nonconvergent_count = 0;
  int unbounded_count = 0;
  bool witness_attempted = false;  // crafted sin-pattern witness
  bool witness_found = false;

  void add(DichotomyRun run) {
    switch (run.outcome) {
      case ConsensusOutcome::Consensus: ++consensus_count; break;
      case ConsensusOutcome::BoundedNonConvergent: ++bounded_nonconvergent_count; break;
      case ConsensusOutcome::Unbounded: ++unbounded_count; break;
    }
    runs.push_back(std::move(run));
  }
};

/// Bounded non-convergent inequality solution for a static graph with
/// non-isolated components: one node oscillates as sin t below a plateau of
/// sources at M, everything else parked at -1. Returns nothing when the
/// components are isolated (no such witness exists).
inline std::optional<Trajectory> sin_witness_trajectory(const WeightedDigraph& g, double t_end,
                                                        double h) {
  const int n = g.size();
  int node_i = -1, node_j = -1;
  for (int i = 0; i < n && node_i < 0; ++i) {
    const auto reach = reachable_from(g, i);
    for (int j = 0; j < n; ++j) {
      if (g.weights()(i, j) > 0.0 && !reach[j]) {  // arc j -> i, no walk back
        node_i = i;
        node_j = j;
        break;
      }
    }
  }
  if (node_i < 0) return std::nullopt;

  std::vector<bool> in_s(n, false);
  for (int u = 0; u < n; ++u) {
    if (reachable_from(g, u)[node_j]) in_s[u] = true;  // walk u -> j
  }
  in_s[node_j] = true;

  double outside = 0.0;
  for (int k = 0; k < n; ++k)
    if (!in_s[k]) outside += g.weights()(node_i, k);
  const double m_level = 1.0 + (2.0 * outside + 1.0) / g.weights()(node_i, node_j) + 0.5;

  Eigen::VectorXd base(n), rate0(n);
  for (int k = 0; k < n; ++k) base(k) = in_s[k] ? m_level : -1.0;
  rate0.setZero();
  return sampled_trajectory(
      n, 1, t_end, h,
      [base, node_i](double t) {
        Eigen::VectorXd x = base;
        x(node_i) = std::sin(t);
        return x;
      },
      [rate0, node_i](double t) {
        Eigen::VectorXd dx = rate0;
        dx(node_i) = std::cos(t);
        return dx;
      });
}

/// Unbounded inequality solution x(t) = x0 - t c 1 with c large enough to
/// satisfy the inequality and cross the boundedness threshold by t_end.
inline Trajectory ray_trajectory(const WeightedDigraph& g, const Eigen::VectorXd& x0, double t_end,
                                 double h, double bound_threshold = kBoundThreshold) {
  const Eigen::VectorXd lx0 = laplacian_of(g).matrix * x0;
  const double c = std::max({1.0, lx0.maxCoeff() + 1.0,
                             1.1 * (bound_threshold + x0.cwiseAbs().maxCoeff()) / t_end});
  const Eigen::VectorXd slope = Eigen::VectorXd::Constant(x0.size(), -c);
  return sampled_trajectory(
      static_cast<int>(x0.size()), 1, t_end, h,
      [x0, c](double t) { return (x0.array() - t * c).matrix().eval(); },
      [slope](double) { return slope; });
}

struct DichotomyOptions {
  double consensus_tol = 1e-4;
  double tail_fraction = 0.25;
  double bound_threshold = kBoundThreshold;
  double tau_res = kTauRes;
  bool craft_witnesses = true;  // add ray and sin-pattern runs on static graphs
};

/// Integrates the field from every initial condition, classifies each run
/// (on the protocol's lift when it has one), and, for static graphs, adds
/// the crafted inequality solutions whose class the theorems dictate.
inline DichotomyReport dichotomy_sweep(const ProtocolField& field,
                                       const std::vector<Eigen::VectorXd>& initial_conditions,
                                       double horizon, double h, DichotomyOptions opt = {}) {
  DichotomyReport report;
  int idx = 0;
  for (const auto& x0 : initial_conditions) {
    const auto traj = integrate(field, x0, horizon, h);
    const Trajectory scalar =
        field.lift && field.dim != 1 ? lifted_trajectory(traj, *field.lift) : traj;
    const auto verdict =
        consensus_verdict(scalar, opt.consensus_tol, opt.tail_fraction, opt.bound_threshold);
    DichotomyRun run;
    run.label = "protocol-" + std::to_string(idx++);
    run.outcome = verdict.outcome;
    run.tail_spread = verdict.tail_spread;
    report.add(std::move(run));
  }

  if (opt.craft_witnesses && field.graph.segments().size() == 1) {
    const WeightedDigraph& g = field.graph.segments().front();
    {
      Eigen::VectorXd x0 = Eigen::VectorXd::Zero(g.size());
      const auto ray = ray_trajectory(g, x0, horizon, h, opt.bound_threshold);
      const auto res = residual_trace(ray, field.graph, identity_lift());
      DichotomyRun run;
      run.label = "ray";
      run.outcome = consensus_verdict(ray, opt.consensus_tol, opt.tail_fraction,
                                      opt.bound_threshold)
                        .outcome;
      run.residual_ok = res.min_value >= -opt.tau_res;
      report.add(std::move(run));
    }
    report.witness_attempted = true;
    if (auto witness = sin_witness_trajectory(g, horizon, h)) {
      const auto res = residual_trace(*witness, field.graph, identity_lift());
      const auto verdict =
          consensus_verdict(*witness, opt.consensus_tol, opt.tail_fraction, opt.bound_threshold);
      DichotomyRun run;
      run.label = "sin-witness";
      run.outcome = verdict.outcome;
      run.tail_spread = verdict.tail_spread;
      run.residual_ok = res.min_value >= -opt.tau_res;
      report.add(run);
      report.witness_found =
          run.residual_ok && run.outcome == ConsensusOutcome::BoundedNonConvergent;
    }
  }
  return report;
}

/// Structured verdict bundle one scenario run produces; every optional is
/// present exactly when the scenario requested that diagnostic.
struct DiagnosticsReport {
  bool bounded = true;
  bool diverged = false;
  double sup_norm = 0.0;
  std::optional<ConsensusVerdict> consensus;
  std::optional<RateFit> rate;
  std::optional<double> residual_min;
  std::optional<SummabilityReport> summability;
  std::optional<EquidistanceVerdict> equidistance;
  std::optional<ModulusVerdict> modulus;
  std::optional<SurroundVerdict> surround;
  std::optional<ContractionCertificate> contraction;
  std::vector<ConnectivityCertificate> certificates;
  std::vector<std::string> notes;
};

}  // namespace lapflow
