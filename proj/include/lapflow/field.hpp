#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lapflow/graph.hpp"

namespace lapflow {

/// Scalar reduction of a protocol state used by the inequality diagnostics.
/// value() maps the stacked state to one scalar per agent; rate() is its
/// exact time derivative given the recorded state derivative (chain rule
/// through the projection gradient). rate may be left empty, in which case
/// consumers fall back to central differences on the grid.
struct Lift {
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& state)> value;
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& state,
                                const Eigen::VectorXd& deriv)>
      rate;
};

inline Lift identity_lift() {
  Lift l;
  l.value = [](double, const Eigen::VectorXd& x) { return x; };
  l.rate = [](double, const Eigen::VectorXd&, const Eigen::VectorXd& dx) { return dx; };
  return l;
}

/// Prepends the constant 0 entry of the virtual agent to a lift, matching
/// the extended (n+1)-node signal.
inline Lift extend_lift(Lift base) {
  Lift l;
  l.value = [base](double t, const Eigen::VectorXd& x) {
    const Eigen::VectorXd inner = base.value(t, x);
    Eigen::VectorXd out(inner.size() + 1);
    out(0) = 0.0;
    out.tail(inner.size()) = inner;
    return out;
  };
  if (base.rate) {
    l.rate = [base](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
      const Eigen::VectorXd inner = base.rate(t, x, dx);
      Eigen::VectorXd out(inner.size() + 1);
      out(0) = 0.0;
      out.tail(inner.size()) = inner;
      return out;
    };
  }
  return l;
}

/// Right-hand side of one coordination protocol over a stacked state of
/// `agents` blocks of size `dim`. Evaluators are pure in (t, state); every
/// source of time dependence is piecewise-constant, so integrators freeze t
/// per step, which aligns switching instants with the step grid.
struct ProtocolField {
  std::string kind;
  int agents = 0;
  int dim = 1;
  GraphSignal graph;       // inter-agent signal (certificates, residuals)
  double rate_bound = 1.0; // coarse Lipschitz bound; drives max_step()
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> rhs;
  std::vector<double> switch_times;  // merged breakpoints of all embedded signals
  std::optional<Lift> lift;          // protocol's scalar reduction, paired with `graph`
  int leader_index = -1;             // leader protocols only
  std::vector<std::string> warnings;

  int state_size() const { return agents * dim; }

  /// Largest step the explicit scheme accepts for this field.
  double max_step() const { return 0.5 / std::max(rate_bound, 1e-9); }
};

/// Sorted union of breakpoint lists (exact duplicates collapsed).
inline std::vector<double> merge_breakpoints(std::initializer_list<const std::vector<double>*> lists) {
  std::vector<double> merged;
  for (const auto* lst : lists) merged.insert(merged.end(), lst->begin(), lst->end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return merged;
}

}  // namespace lapflow
