#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "lapflow/common.hpp"

namespace lapflow {

/// Weighted digraph on nodes 0..n-1. Entry weights(i, j) = a_ij > 0 encodes
/// the arc j -> i: node j's state enters node i's dynamics. Weights are
/// nonnegative and the diagonal is zero (no self-loops).
class WeightedDigraph {
 public:
  WeightedDigraph() = default;

  explicit WeightedDigraph(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
    if (weights_.rows() != weights_.cols())
      throw std::invalid_argument("WeightedDigraph: weight matrix must be square");
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      if (weights_(i, i) != 0.0)
        throw std::invalid_argument("WeightedDigraph: self-loops are not allowed");
      for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
        if (!(weights_(i, j) >= 0.0) || !std::isfinite(weights_(i, j)))
          throw std::invalid_argument("WeightedDigraph: weights must be finite and nonnegative");
      }
    }
  }

  static WeightedDigraph zero(int n) {
    return WeightedDigraph(Eigen::MatrixXd::Zero(n, n));
  }

  int size() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double weight(int i, int j) const { return weights_(i, j); }
  double max_weight() const { return weights_.size() == 0 ? 0.0 : weights_.maxCoeff(); }

  /// Arc u -> v present, i.e. a_vu > 0.
  bool has_arc(int u, int v) const { return weights_(v, u) > 0.0; }

 private:
  Eigen::MatrixXd weights_;
};

/// Laplacian of a weighted digraph: l_ij = -a_ij off the diagonal and
/// l_ii = sum of row i's weights, so every row sums to zero.
struct LaplacianMatrix {
  Eigen::MatrixXd matrix;
};

inline LaplacianMatrix laplacian_of(const WeightedDigraph& g) {
  const int n = g.size();
  Eigen::MatrixXd l = -g.weights();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) s += g.weight(i, j);
    }
    l(i, i) = s;
  }
  return LaplacianMatrix{std::move(l)};
}

/// Row-sum defect of a Laplacian, accumulating the off-diagonal entries in
/// index order before adding the diagonal. Exactly zero for matrices built
/// by laplacian_of, since the diagonal is the same sum with flipped sign.
inline Eigen::VectorXd laplacian_row_defect(const LaplacianMatrix& lap) {
  const Eigen::MatrixXd& l = lap.matrix;
  const int n = static_cast<int>(l.rows());
  Eigen::VectorXd defect(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) s += l(i, j);
    }
    defect(i) = s + l(i, i);
  }
  return defect;
}

/// Truncation A^delta: keeps entries >= delta, zeroes the rest.
inline WeightedDigraph truncate(const WeightedDigraph& g, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("truncate: delta must be positive");
  Eigen::MatrixXd w = (g.weights().array() >= delta).select(g.weights(), 0.0);
  return WeightedDigraph(std::move(w));
}

/// Piecewise-constant time-varying graph A(t). Segment k is active on
/// [breakpoints[k], breakpoints[k+1]); the last segment extends to +inf.
class GraphSignal {
 public:
  GraphSignal() = default;

  GraphSignal(std::vector<double> breakpoints, std::vector<WeightedDigraph> segments)
      : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)) {
    if (breakpoints_.empty() || segments_.empty())
      throw std::invalid_argument("GraphSignal: needs at least one segment");
    if (breakpoints_.size() != segments_.size())
      throw std::invalid_argument("GraphSignal: one segment per breakpoint");
    if (breakpoints_.front() != 0.0)
      throw std::invalid_argument("GraphSignal: breakpoints must start at 0");
    for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
      if (!(breakpoints_[k] > breakpoints_[k - 1]))
        throw std::invalid_argument("GraphSignal: breakpoints must be strictly increasing");
    }
    n_ = segments_.front().size();
    weight_bound_ = 0.0;
    for (const auto& seg : segments_) {
      if (seg.size() != n_)
        throw std::invalid_argument("GraphSignal: all segments must share the node count");
      weight_bound_ = std::max(weight_bound_, seg.max_weight());
    }
  }

  static GraphSignal constant(WeightedDigraph g) {
    return GraphSignal({0.0}, {std::move(g)});
  }

  int size() const { return n_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<WeightedDigraph>& segments() const { return segments_; }

  /// Supremum of all weights over all segments (Assumption: bounded a_ij).
  double weight_bound() const { return weight_bound_; }

  int segment_index(double t) const {
    if (!(t >= 0.0)) throw std::invalid_argument("GraphSignal: time must be nonnegative");
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return static_cast<int>(it - breakpoints_.begin()) - 1;
  }

  const WeightedDigraph& at(double t) const { return segments_[segment_index(t)]; }

 private:
  std::vector<double> breakpoints_;
  std::vector<WeightedDigraph> segments_;
  int n_ = 0;
  double weight_bound_ = 0.0;
};

/// Duration-weighted integral of the signal over [t0, t1]; exact for
/// piecewise-constant signals. This realizes the graph union over a window.
inline WeightedDigraph union_over(const GraphSignal& s, double t0, double t1) {
  if (!(t0 >= 0.0) || !(t1 > t0))
    throw std::invalid_argument("union_over: need 0 <= t0 < t1");
  const auto& bp = s.breakpoints();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(s.size(), s.size());
  for (std::size_t k = 0; k < bp.size(); ++k) {
    const double lo = std::max(t0, bp[k]);
    const double hi = (k + 1 < bp.size()) ? std::min(t1, bp[k + 1]) : t1;
    if (hi > lo) acc += (hi - lo) * s.segments()[k].weights();
  }
  return WeightedDigraph(std::move(acc));
}

}  // namespace lapflow
