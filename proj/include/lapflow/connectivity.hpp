#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lapflow/graph.hpp"

namespace lapflow {

/// Nodes reachable from `start` along arcs (iterative DFS; arc u -> v means
/// a_vu > 0).
inline std::vector<bool> reachable_from(const WeightedDigraph& g, int start) {
  const int n = g.size();
  std::vector<bool> seen(n, false);
  if (start < 0 || start >= n) throw std::invalid_argument("reachable_from: bad start node");
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < n; ++v) {
      if (!seen[v] && g.weights()(v, u) > 0.0) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

/// True iff every node reaches every node along positive-weight arcs.
inline bool strongly_connected(const WeightedDigraph& g) {
  const int n = g.size();
  if (n <= 1) return true;
  const auto fwd = reachable_from(g, 0);
  if (std::find(fwd.begin(), fwd.end(), false) != fwd.end()) return false;
  // Reverse reachability from node 0: follow arcs v -> 0 transitively.
  std::vector<bool> seen(n, false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < n; ++v) {
      if (!seen[v] && g.weights()(u, v) > 0.0) {  // arc v -> u
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return std::find(seen.begin(), seen.end(), false) == seen.end();
}

/// True iff some root node reaches all nodes (directed spanning tree).
inline bool quasi_strongly_connected(const WeightedDigraph& g) {
  const int n = g.size();
  if (n <= 1) return true;
  for (int r = 0; r < n; ++r) {
    const auto seen = reachable_from(g, r);
    if (std::find(seen.begin(), seen.end(), false) == seen.end()) return true;
  }
  return false;
}

/// Strongly connected components plus closed-component flags. A component is
/// closed when it has no incoming arcs from outside.
struct SccDecomposition {
  std::vector<int> component_of;            // node -> component id
  std::vector<std::vector<int>> components; // nodes per component, ascending
  std::vector<bool> closed;                 // per component
  std::vector<int> closed_components() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < closed.size(); ++c)
      if (closed[c]) out.push_back(static_cast<int>(c));
    return out;
  }
};

/// Two-pass (Kosaraju) condensation with iterative DFS; components come out
/// in topological order of the condensation, ties broken by node index.
inline SccDecomposition scc_decomposition(const WeightedDigraph& g) {
  const int n = g.size();
  std::vector<int> order;
  order.reserve(n);
  {
    std::vector<bool> seen(n, false);
    std::vector<std::pair<int, int>> stack;  // (node, next neighbor to try)
    for (int s = 0; s < n; ++s) {
      if (seen[s]) continue;
      seen[s] = true;
      stack.emplace_back(s, 0);
      while (!stack.empty()) {
        auto& [u, next] = stack.back();
        bool descended = false;
        for (int v = next; v < n; ++v) {
          if (!seen[v] && g.weights()(v, u) > 0.0) {  // arc u -> v
            stack.back().second = v + 1;
            seen[v] = true;
            stack.emplace_back(v, 0);
            descended = true;
            break;
          }
        }
        if (!descended) {
          order.push_back(u);
          stack.pop_back();
        }
      }
    }
  }

  SccDecomposition out;
  out.component_of.assign(n, -1);
  for (int idx = n - 1; idx >= 0; --idx) {
    const int root = order[idx];
    if (out.component_of[root] != -1) continue;
    const int cid = static_cast<int>(out.components.size());
    std::vector<int> comp;
    std::vector<int> stack{root};
    out.component_of[root] = cid;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      comp.push_back(u);
      for (int v = 0; v < n; ++v) {
        // reverse arc u -> v in the transpose graph means original arc v -> u
        if (out.component_of[v] == -1 && g.weights()(u, v) > 0.0) {
          out.component_of[v] = cid;
          stack.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.components.push_back(std::move(comp));
  }

  out.closed.assign(out.components.size(), true);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (g.weights()(v, u) > 0.0 && out.component_of[u] != out.component_of[v])
        out.closed[out.component_of[v]] = false;  // arc u -> v enters v's component
    }
  }
  return out;
}

/// True when no arcs connect distinct components in either direction
/// (the dichotomy hypothesis for static graphs).
inline bool components_isolated(const WeightedDigraph& g) {
  const auto scc = scc_decomposition(g);
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g.weights()(i, j) > 0.0 && scc.component_of[i] != scc.component_of[j]) return false;
  return true;
}

enum class CertKind {
  Strong,
  QuasiStrong,
  DeltaStrong,
  DeltaQuasiStrong,
  Usc,
  IscProxy,
  CutBalance,
};

enum class CertVerdict { Holds, Fails, Inconclusive };

inline const char* to_string(CertKind k) {
  switch (k) {
    case CertKind::Strong: return "strong";
    case CertKind::QuasiStrong: return "quasi-strong";
    case CertKind::DeltaStrong: return "delta-strong";
    case CertKind::DeltaQuasiStrong: return "delta-quasi-strong";
    case CertKind::Usc: return "usc";
    case CertKind::IscProxy: return "isc-proxy";
    case CertKind::CutBalance: return "cut-balance";
  }
  return "?";
}

inline const char* to_string(CertVerdict v) {
  switch (v) {
    case CertVerdict::Holds: return "holds";
    case CertVerdict::Fails: return "fails";
    case CertVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

/// Outcome of one connectivity check, with enough context to reproduce it.
/// For windowed (USC) checks a failing window is reported as witness; for
/// cut-balance the offending node subset.
struct ConnectivityCertificate {
  CertKind kind = CertKind::Strong;
  CertVerdict verdict = CertVerdict::Inconclusive;
  double T = 0.0;
  double delta = 0.0;
  double K = 0.0;
  double horizon = 0.0;
  double mass_threshold = 0.0;
  double stride = 0.0;
  bool quasi = false;  // USC checked in quasi-strong mode (UQSC)
  std::vector<int> witness_nodes;
  std::optional<std::pair<double, double>> witness_window;
  std::string note;

  bool holds() const { return verdict == CertVerdict::Holds; }
};

/// One-shot certificate for a static graph, optionally after truncation.
inline ConnectivityCertificate certify_static(const WeightedDigraph& g, bool quasi,
                                              double delta = 0.0) {
  ConnectivityCertificate cert;
  cert.delta = delta;
  const WeightedDigraph checked = delta > 0.0 ? truncate(g, delta) : g;
  const bool ok = quasi ? quasi_strongly_connected(checked) : strongly_connected(checked);
  cert.kind = delta > 0.0 ? (quasi ? CertKind::DeltaQuasiStrong : CertKind::DeltaStrong)
                          : (quasi ? CertKind::QuasiStrong : CertKind::Strong);
  cert.verdict = ok ? CertVerdict::Holds : CertVerdict::Fails;
  if (!ok) {
    const auto scc = scc_decomposition(checked);
    for (int c : scc.closed_components()) {
      if (static_cast<int>(scc.components[c].size()) < checked.size()) {
        cert.witness_nodes = scc.components[c];
        break;
      }
    }
  }
  return cert;
}

struct UscOptions {
  double stride = -1.0;  // <= 0 selects the default T/10
  bool quasi = false;    // check quasi-strong delta-connectivity instead (UQSC)
};

/// Uniform (quasi-)strong connectivity over a finite horizon: every window
/// [t, t+T] must have a strongly delta-connected union. Window starts are
/// the segment breakpoints, the breakpoints shifted by -T (the kinks of the
/// window mass function) and a stride grid, so the verdict is sound up to
/// the stride resolution.
inline ConnectivityCertificate certify_usc(const GraphSignal& s, double T, double delta,
                                           double horizon, UscOptions opt = {}) {
  if (!(T > 0.0)) throw std::invalid_argument("certify_usc: T must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("certify_usc: delta must be positive");
  if (!(horizon >= T)) throw std::invalid_argument("certify_usc: horizon must be >= T");

  const double stride = opt.stride > 0.0 ? opt.stride : T / 10.0;
  const double last_start = horizon - T;

  std::vector<double> starts{0.0, last_start};
  for (double b : s.breakpoints()) {
    if (b > 0.0 && b < last_start) starts.push_back(b);
    const double shifted = b - T;
    if (shifted > 0.0 && shifted < last_start) starts.push_back(shifted);
  }
  for (double t = stride; t < last_start; t += stride) starts.push_back(t);
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               starts.end());

  ConnectivityCertificate cert;
  cert.kind = CertKind::Usc;
  cert.T = T;
  cert.delta = delta;
  cert.horizon = horizon;
  cert.stride = stride;
  cert.quasi = opt.quasi;
  cert.note = "window grid: breakpoints, breakpoints - T and stride; sound up to the stride "
              "resolution; mass threshold applied with a 1e-9 roundoff slack";

  // Window masses are sums of segment overlaps; a relative slack on the
  // threshold keeps windows whose exact mass equals delta from flipping on
  // one-ulp quadrature noise.
  const double delta_eff = std::max(delta - 1e-9 * std::max(1.0, delta), delta * 0.5);

  for (double t : starts) {
    const WeightedDigraph u = truncate(union_over(s, t, t + T), delta_eff);
    const bool ok = opt.quasi ? quasi_strongly_connected(u) : strongly_connected(u);
    if (!ok) {
      cert.verdict = CertVerdict::Fails;
      cert.witness_window = std::make_pair(t, t + T);
      const auto scc = scc_decomposition(u);
      for (int c : scc.closed_components()) {
        if (static_cast<int>(scc.components[c].size()) < u.size()) {
          cert.witness_nodes = scc.components[c];
          break;
        }
      }
      return cert;
    }
  }
  cert.verdict = CertVerdict::Holds;
  return cert;
}

/// ISC proxy over a finite horizon: arcs whose integrated weight reaches
/// mass_threshold form the candidate persistent graph. Finite data can
/// support ISC (verdict holds) but never refute it, hence "inconclusive".
inline ConnectivityCertificate certify_isc_proxy(const GraphSignal& s, double horizon,
                                                 double mass_threshold = 1.0) {
  if (!(horizon > 0.0)) throw std::invalid_argument("certify_isc_proxy: horizon must be positive");
  if (!(mass_threshold > 0.0))
    throw std::invalid_argument("certify_isc_proxy: mass threshold must be positive");
  ConnectivityCertificate cert;
  cert.kind = CertKind::IscProxy;
  cert.horizon = horizon;
  cert.mass_threshold = mass_threshold;
  const WeightedDigraph persistent = truncate(union_over(s, 0.0, horizon), mass_threshold);
  if (strongly_connected(persistent)) {
    cert.verdict = CertVerdict::Holds;
  } else {
    cert.verdict = CertVerdict::Inconclusive;
    cert.note = "persistent-arc graph not strongly connected at this horizon/threshold";
  }
  return cert;
}

namespace detail {
// Relative slack for the cut-balance comparisons; absorbs the one-ulp
// asymmetry of weights generated as products/ratios.
inline constexpr double kCutSlack = 1e-12;

inline bool cut_balanced_once(const WeightedDigraph& g, double K, std::vector<int>* witness) {
  const int n = g.size();
  const auto& w = g.weights();
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
    double inflow = 0.0;   // arcs entering S:  a_jk with j in S, k not in S
    double outflow = 0.0;  // arcs leaving S:   a_kj with j in S, k not in S
    for (int j = 0; j < n; ++j) {
      if (!((mask >> j) & 1)) continue;
      for (int k = 0; k < n; ++k) {
        if ((mask >> k) & 1) continue;
        inflow += w(j, k);
        outflow += w(k, j);
      }
    }
    const double slack = kCutSlack * std::max(1.0, std::max(inflow, outflow));
    if (outflow > K * inflow + slack || inflow > K * outflow + slack) {
      if (witness) {
        witness->clear();
        for (int j = 0; j < n; ++j)
          if ((mask >> j) & 1) witness->push_back(j);
      }
      return false;
    }
  }
  return true;
}
}  // namespace detail

/// Exhaustive cut-balance check: every directed cut's inflow and outflow
/// agree within the factor K. Capped at n = 20 (2^n subsets); larger graphs
/// must use the type-symmetry sufficient condition.
inline ConnectivityCertificate certify_cut_balance(const WeightedDigraph& g, double K) {
  if (!(K >= 1.0)) throw std::invalid_argument("certify_cut_balance: K must be >= 1");
  if (g.size() > 20)
    throw std::invalid_argument(
        "certify_cut_balance: exhaustive check capped at n = 20; use certify_type_symmetry");
  ConnectivityCertificate cert;
  cert.kind = CertKind::CutBalance;
  cert.K = K;
  std::vector<int> witness;
  if (detail::cut_balanced_once(g, K, &witness)) {
    cert.verdict = CertVerdict::Holds;
  } else {
    cert.verdict = CertVerdict::Fails;
    cert.witness_nodes = witness;
  }
  return cert;
}

/// Signal variant: certified by checking every segment.
inline ConnectivityCertificate certify_cut_balance(const GraphSignal& s, double K) {
  if (!(K >= 1.0)) throw std::invalid_argument("certify_cut_balance: K must be >= 1");
  if (s.size() > 20)
    throw std::invalid_argument(
        "certify_cut_balance: exhaustive check capped at n = 20; use certify_type_symmetry");
  ConnectivityCertificate cert;
  cert.kind = CertKind::CutBalance;
  cert.K = K;
  for (std::size_t k = 0; k < s.segments().size(); ++k) {
    std::vector<int> witness;
    if (!detail::cut_balanced_once(s.segments()[k], K, &witness)) {
      cert.verdict = CertVerdict::Fails;
      cert.witness_nodes = witness;
      const double lo = s.breakpoints()[k];
      const double hi = (k + 1 < s.breakpoints().size())
                            ? s.breakpoints()[k + 1]
                            : std::numeric_limits<double>::infinity();
      cert.witness_window = std::make_pair(lo, hi);
      return cert;
    }
  }
  cert.verdict = CertVerdict::Holds;
  return cert;
}

/// Pairwise ratio check K^-1 a_ji <= a_ij <= K a_ji; sufficient for
/// cut-balance with the same K.
inline bool certify_type_symmetry(const WeightedDigraph& g, double K) {
  if (!(K >= 1.0)) throw std::invalid_argument("certify_type_symmetry: K must be >= 1");
  const int n = g.size();
  const auto& w = g.weights();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double slack = detail::kCutSlack * std::max(1.0, std::max(w(i, j), w(j, i)));
      if (w(i, j) > K * w(j, i) + slack) return false;
      if (w(j, i) > K * w(i, j) + slack) return false;
    }
  }
  return true;
}

inline bool certify_type_symmetry(const GraphSignal& s, double K) {
  for (const auto& seg : s.segments())
    if (!certify_type_symmetry(seg, K)) return false;
  return true;
}

}  // namespace lapflow
