#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "lapflow/field.hpp"
#include "lapflow/graph.hpp"

namespace lapflow {

/// Uniform-grid state history of one integration run. `derivatives[k]` holds
/// the right-hand side evaluated at (t_k, x(t_k)); when a run diverges the
/// history is truncated at the offending step and the flag is set.
struct Trajectory {
  double step = 0.0;
  int agents = 0;
  int dim = 1;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> derivatives;
  bool diverged = false;
  std::optional<double> divergence_time;

  int samples() const { return static_cast<int>(times.size()); }
  double duration() const { return times.empty() ? 0.0 : times.back(); }

  Eigen::VectorXd agent_state(int k, int i) const {
    return states[k].segment(static_cast<Eigen::Index>(i) * dim, dim);
  }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& x : states) m = std::max(m, x.cwiseAbs().maxCoeff());
    return m;
  }
};

namespace detail {

inline long long step_count(double t_end, double h, const char* who) {
  const long long steps = std::llround(t_end / h);
  if (steps < 1 || std::abs(steps * h - t_end) > 1e-9 * std::max(1.0, t_end))
    throw std::invalid_argument(std::string(who) + ": horizon must be a positive multiple of the step");
  return steps;
}

}  // namespace detail

/// Classical 4th-order fixed-step integration of a protocol field. Stage
/// evaluations freeze the time argument at the step start, which snaps the
/// piecewise-constant switching skeleton onto the grid and keeps the scheme
/// exactly 4th order on every segment.
inline Trajectory integrate(const ProtocolField& field, const Eigen::VectorXd& x0, double t_end,
                            double h) {
  if (!(h > 0.0)) throw std::invalid_argument("integrate: step must be positive");
  if (h > field.max_step() * (1.0 + 1e-12))
    throw std::invalid_argument("integrate: step exceeds the stability bound for this field");
  if (x0.size() != field.state_size())
    throw std::invalid_argument("integrate: initial state has the wrong size");
  const long long steps = detail::step_count(t_end, h, "integrate");

  Trajectory traj;
  traj.step = h;
  traj.agents = field.agents;
  traj.dim = field.dim;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.derivatives.reserve(steps + 1);

  Eigen::VectorXd x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);

  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const Eigen::VectorXd k1 = field.rhs(t, x);
    traj.derivatives.push_back(k1);
    const Eigen::VectorXd k2 = field.rhs(t, x + (h / 2.0) * k1);
    const Eigen::VectorXd k3 = field.rhs(t, x + (h / 2.0) * k2);
    const Eigen::VectorXd k4 = field.rhs(t, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceThreshold) {
      traj.diverged = true;
      traj.divergence_time = static_cast<double>(k + 1) * h;
      return traj;
    }
    traj.times.push_back(static_cast<double>(k + 1) * h);
    traj.states.push_back(x);
  }
  traj.derivatives.push_back(field.rhs(t_end, x));
  return traj;
}

/// Samples a known solution (state and derivative given analytically) onto
/// the uniform grid, producing a Trajectory the diagnostics can consume.
inline Trajectory sampled_trajectory(int agents, int dim, double t_end, double h,
                                     const std::function<Eigen::VectorXd(double)>& state_fn,
                                     const std::function<Eigen::VectorXd(double)>& deriv_fn) {
  if (!(h > 0.0)) throw std::invalid_argument("sampled_trajectory: step must be positive");
  const long long steps = detail::step_count(t_end, h, "sampled_trajectory");
  Trajectory traj;
  traj.step = h;
  traj.agents = agents;
  traj.dim = dim;
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    traj.times.push_back(t);
    traj.states.push_back(state_fn(t));
    traj.derivatives.push_back(deriv_fn(t));
  }
  return traj;
}

/// Numerical Cauchy transition matrix of the flow dx = -L(t) x over
/// [t0, t1]. Rows sum to one up to roundoff: each stage maps constant
/// vectors to zero, so the scheme preserves row sums exactly.
inline Eigen::MatrixXd transition_matrix(const GraphSignal& s, double t0, double t1, double h) {
  if (!(t0 >= 0.0) || !(t1 >= t0)) throw std::invalid_argument("transition_matrix: bad interval");
  const int n = s.size();
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
  if (t1 == t0) return phi;
  if (!(h > 0.0)) throw std::invalid_argument("transition_matrix: step must be positive");
  const double h_max = 0.5 / std::max(s.weight_bound() * n, 1e-9);
  if (h > h_max * (1.0 + 1e-12))
    throw std::invalid_argument("transition_matrix: step exceeds the stability bound");
  const long long steps = detail::step_count(t1 - t0, h, "transition_matrix");

  int seg = -1;
  Eigen::MatrixXd minus_l;
  for (long long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    const int now = s.segment_index(t);
    if (now != seg) {
      seg = now;
      minus_l = -laplacian_of(s.segments()[seg]).matrix;
    }
    const Eigen::MatrixXd k1 = minus_l * phi;
    const Eigen::MatrixXd k2 = minus_l * (phi + (h / 2.0) * k1);
    const Eigen::MatrixXd k3 = minus_l * (phi + (h / 2.0) * k2);
    const Eigen::MatrixXd k4 = minus_l * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

/// Per-time ascending ordering of scalar agent states: sorted values y,
/// the sorting permutation (stable, ties by original index) and the
/// envelope M(t) = y_N, m(t) = y_1.
struct OrderingTrace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> sorted;
  std::vector<std::vector<int>> permutation;  // permutation[k][rank] = agent
  std::vector<double> max_value;              // M(t)
  std::vector<double> min_value;              // m(t)
};

inline OrderingTrace ordering_trace(const Trajectory& traj) {
  if (traj.dim != 1)
    throw std::invalid_argument("ordering_trace: requires scalar agent states");
  OrderingTrace out;
  const int n = traj.agents;
  out.times = traj.times;
  out.sorted.reserve(traj.samples());
  out.permutation.reserve(traj.samples());
  for (int k = 0; k < traj.samples(); ++k) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const Eigen::VectorXd& x = traj.states[k];
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return x(a) < x(b); });
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) y(r) = x(perm[r]);
    out.max_value.push_back(y(n - 1));
    out.min_value.push_back(y(0));
    out.sorted.push_back(std::move(y));
    out.permutation.push_back(std::move(perm));
  }
  return out;
}

/// Residual D(t) = -L(t) x(t) - dx(t) of a lifted trajectory against the
/// inequality's graph signal. Nonnegative residuals certify that the lift
/// solves the differential inequality at the sampled points.
struct ResidualTrace {
  double step = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  double min_value = 0.0;

  /// Componentwise sliding integrals over windows [t_k, t_k + tau]
  /// (trapezoid rule); entry k aligns with times[k].
  std::vector<Eigen::VectorXd> window_integrals(double tau) const {
    const long long m = detail::step_count(tau, step, "window_integrals");
    const int count = static_cast<int>(values.size());
    std::vector<Eigen::VectorXd> prefix(count);
    if (count == 0) return {};
    prefix[0] = Eigen::VectorXd::Zero(values[0].size());
    for (int k = 1; k < count; ++k)
      prefix[k] = prefix[k - 1] + (step / 2.0) * (values[k - 1] + values[k]);
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k + m < count; ++k) out.push_back(prefix[k + m] - prefix[k]);
    return out;
  }
};

/// Computes the residual of lift(x) along a trajectory. The lift's exact
/// rate is used when available; otherwise central differences on the grid
/// with the two boundary samples dropped.
inline ResidualTrace residual_trace(const Trajectory& traj, const GraphSignal& s,
                                    const Lift& lift) {
  ResidualTrace out;
  out.step = traj.step;
  const int count = traj.samples();
  if (count == 0) return out;

  std::vector<Eigen::VectorXd> lifted(count);
  for (int k = 0; k < count; ++k) lifted[k] = lift.value(traj.times[k], traj.states[k]);
  if (static_cast<int>(lifted.front().size()) != s.size())
    throw std::invalid_argument("residual_trace: lift size does not match the signal");

  const bool analytic = static_cast<bool>(lift.rate);
  const int lo = analytic ? 0 : 1;
  const int hi = analytic ? count : count - 1;

  int seg = -1;
  Eigen::MatrixXd lap;
  out.min_value = std::numeric_limits<double>::infinity();
  for (int k = lo; k < hi; ++k) {
    const double t = traj.times[k];
    const int now = s.segment_index(t);
    if (now != seg) {
      seg = now;
      lap = laplacian_of(s.segments()[seg]).matrix;
    }
    Eigen::VectorXd rate;
    if (analytic) {
      rate = lift.rate(t, traj.states[k], traj.derivatives[k]);
    } else {
      rate = (lifted[k + 1] - lifted[k - 1]) / (2.0 * traj.step);
    }
    Eigen::VectorXd d = -lap * lifted[k] - rate;
    out.min_value = std::min(out.min_value, d.minCoeff());
    out.times.push_back(t);
    out.values.push_back(std::move(d));
  }
  if (out.values.empty()) out.min_value = 0.0;
  return out;
}

/// Keeps every `every`-th sample; the step scales accordingly. Used to thin
/// trajectories before diagnostics whose lifts are expensive per sample.
inline Trajectory downsample(const Trajectory& traj, int every) {
  if (every <= 1) return traj;
  Trajectory out;
  out.step = traj.step * every;
  out.agents = traj.agents;
  out.dim = traj.dim;
  out.diverged = traj.diverged;
  out.divergence_time = traj.divergence_time;
  for (int k = 0; k < traj.samples(); k += every) {
    out.times.push_back(traj.times[k]);
    out.states.push_back(traj.states[k]);
    out.derivatives.push_back(traj.derivatives[k]);
  }
  return out;
}

/// Scalar trajectory of lift values along a run (states = lift, derivatives
/// = exact rates when available, central differences otherwise).
inline Trajectory lifted_trajectory(const Trajectory& traj, const Lift& lift) {
  Trajectory out;
  out.step = traj.step;
  out.dim = 1;
  out.diverged = traj.diverged;
  out.divergence_time = traj.divergence_time;
  out.times = traj.times;
  const int count = traj.samples();
  out.states.resize(count);
  for (int k = 0; k < count; ++k) out.states[k] = lift.value(traj.times[k], traj.states[k]);
  out.agents = count > 0 ? static_cast<int>(out.states.front().size()) : 0;
  out.derivatives.resize(count);
  for (int k = 0; k < count; ++k) {
    if (lift.rate) {
      out.derivatives[k] = lift.rate(traj.times[k], traj.states[k], traj.derivatives[k]);
    } else if (k > 0 && k + 1 < count) {
      out.derivatives[k] = (out.states[k + 1] - out.states[k - 1]) / (2.0 * traj.step);
    } else {
      out.derivatives[k] = Eigen::VectorXd::Zero(out.agents);
    }
  }
  return out;
}

}  // namespace lapflow
