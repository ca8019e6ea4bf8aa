#pragma once

#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapflow/analysis.hpp"
#include "lapflow/connectivity.hpp"
#include "lapflow/convex.hpp"
#include "lapflow/dynamics.hpp"
#include "lapflow/graph.hpp"

namespace lapflow {

/// Strict-schema guard: every key must be known, every required key present.
inline void require_keys(const nlohmann::json& obj, const std::vector<std::string>& required,
                         const std::vector<std::string>& optional, const std::string& context) {
  if (!obj.is_object()) throw SchemaError(context + ": expected an object");
  for (const auto& key : required)
    if (!obj.contains(key)) throw SchemaError(context + ": missing required key '" + key + "'");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const bool known =
        std::find(required.begin(), required.end(), key) != required.end() ||
        std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw SchemaError(context + ": unknown key '" + key + "'");
  }
}

namespace detail {

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) throw SchemaError(context + ": expected a nonempty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(context + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace detail

// ---- graph signals: {"n": int, "breakpoints": [...], "segments": [[row-major]...]} ----

inline nlohmann::json to_json(const GraphSignal& s) {
  nlohmann::json j;
  j["n"] = s.size();
  j["breakpoints"] = s.breakpoints();
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& seg : s.segments()) {
    nlohmann::json flat = nlohmann::json::array();
    for (int i = 0; i < s.size(); ++i)
      for (int k = 0; k < s.size(); ++k) flat.push_back(seg.weight(i, k));
    segments.push_back(std::move(flat));
  }
  j["segments"] = std::move(segments);
  return j;
}

inline GraphSignal graph_signal_from_json(const nlohmann::json& j) {
  require_keys(j, {"n", "breakpoints", "segments"}, {}, "graph signal");
  if (!j["n"].is_number_integer() || j["n"].get<int>() < 1)
    throw SchemaError("graph signal: n must be a positive integer");
  const int n = j["n"].get<int>();
  if (!j["breakpoints"].is_array() || !j["segments"].is_array())
    throw SchemaError("graph signal: breakpoints and segments must be arrays");
  std::vector<double> bp;
  for (const auto& t : j["breakpoints"]) {
    if (!t.is_number()) throw SchemaError("graph signal: breakpoints must be numbers");
    bp.push_back(t.get<double>());
  }
  std::vector<WeightedDigraph> segs;
  for (const auto& flat : j["segments"]) {
    if (!flat.is_array() || static_cast<int>(flat.size()) != n * n)
      throw SchemaError("graph signal: each segment needs n*n row-major weights");
    Eigen::MatrixXd w(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const auto& cell = flat[static_cast<std::size_t>(i) * n + k];
        if (!cell.is_number()) throw SchemaError("graph signal: weights must be numbers");
        w(i, k) = cell.get<double>();
      }
    try {
      segs.emplace_back(std::move(w));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("graph signal: ") + e.what());
    }
  }
  try {
    return GraphSignal(std::move(bp), std::move(segs));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("graph signal: ") + e.what());
  }
}

// ---- convex sets: tagged union on "type" ----

inline nlohmann::json to_json(const ConvexSet& set) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        nlohmann::json j;
        if constexpr (std::is_same_v<T, Ball>) {
          j["type"] = "ball";
          j["center"] = detail::vector_to_json(s.center);
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          j["type"] = "box";
          j["lower"] = detail::vector_to_json(s.lower);
          j["upper"] = detail::vector_to_json(s.upper);
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          j["type"] = "halfspace";
          j["normal"] = detail::vector_to_json(s.normal);
          j["offset"] = s.offset;
        } else if constexpr (std::is_same_v<T, Singleton>) {
          j["type"] = "singleton";
          j["point"] = detail::vector_to_json(s.point);
        } else if constexpr (std::is_same_v<T, Polytope>) {
          j["type"] = "polytope";
          nlohmann::json verts = nlohmann::json::array();
          for (const auto& v : s.vertices) verts.push_back(detail::vector_to_json(v));
          j["vertices"] = std::move(verts);
        } else {
          j["type"] = "intersection";
          nlohmann::json members = nlohmann::json::array();
          for (const auto& m : s.members) members.push_back(to_json(m));
          j["members"] = std::move(members);
        }
        return j;
      },
      set.variant());
}

inline ConvexSet convex_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw SchemaError("convex set: expected an object with a 'type' tag");
  const std::string type = j["type"].get<std::string>();
  try {
    if (type == "ball") {
      require_keys(j, {"type", "center", "radius"}, {}, "ball");
      if (!j["radius"].is_number()) throw SchemaError("ball: radius must be a number");
      return ConvexSet::ball(detail::vector_from_json(j["center"], "ball center"),
                             j["radius"].get<double>());
    }
    if (type == "box") {
      require_keys(j, {"type", "lower", "upper"}, {}, "box");
      return ConvexSet::box(detail::vector_from_json(j["lower"], "box lower"),
                            detail::vector_from_json(j["upper"], "box upper"));
    }
    if (type == "halfspace") {
      require_keys(j, {"type", "normal", "offset"}, {}, "halfspace");
      if (!j["offset"].is_number()) throw SchemaError("halfspace: offset must be a number");
      return ConvexSet::halfspace(detail::vector_from_json(j["normal"], "halfspace normal"),
                                  j["offset"].get<double>());
    }
    if (type == "singleton") {
      require_keys(j, {"type", "point"}, {}, "singleton");
      return ConvexSet::singleton(detail::vector_from_json(j["point"], "singleton point"));
    }
    if (type == "polytope") {
      require_keys(j, {"type", "vertices"}, {}, "polytope");
      if (!j["vertices"].is_array()) throw SchemaError("polytope: vertices must be an array");
      std::vector<Eigen::VectorXd> verts;
      for (const auto& v : j["vertices"])
        verts.push_back(detail::vector_from_json(v, "polytope vertex"));
      return ConvexSet::polytope(std::move(verts));
    }
    if (type == "intersection") {
      require_keys(j, {"type", "members"}, {}, "intersection");
      if (!j["members"].is_array()) throw SchemaError("intersection: members must be an array");
      std::vector<ConvexSet> members;
      for (const auto& m : j["members"]) members.push_back(convex_set_from_json(m));
      return ConvexSet::intersection(std::move(members));
    }
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("convex set: ") + e.what());
  }
  throw SchemaError("convex set: unknown type '" + type + "'");
}

// ---- certificates and reports ----

inline nlohmann::json to_json(const ConnectivityCertificate& cert) {
  nlohmann::json j;
  j["kind"] = to_string(cert.kind);
  j["verdict"] = to_string(cert.verdict);
  if (cert.T > 0) j["T"] = cert.T;
  if (cert.delta > 0) j["delta"] = cert.delta;
  if (cert.K > 0) j["K"] = cert.K;
  if (cert.horizon > 0) j["horizon"] = cert.horizon;
  if (cert.mass_threshold > 0) j["mass_threshold"] = cert.mass_threshold;
  if (cert.stride > 0) j["stride"] = cert.stride;
  if (cert.kind == CertKind::Usc) j["quasi"] = cert.quasi;
  if (!cert.witness_nodes.empty()) j["witness_nodes"] = cert.witness_nodes;
  if (cert.witness_window)
    j["witness_window"] = {cert.witness_window->first, cert.witness_window->second};
  if (!cert.note.empty()) j["note"] = cert.note;
  return j;
}

inline nlohmann::json to_json(const ConsensusVerdict& v) {
  nlohmann::json j;
  j["outcome"] = to_string(v.outcome);
  j["tail_spread"] = v.tail_spread;
  j["tol"] = v.tol;
  j["window"] = {v.window_start, v.window_end};
  if (v.outcome == ConsensusOutcome::Consensus) j["limit"] = v.limit;
  return j;
}

inline nlohmann::json to_json(const RateFit& f) {
  nlohmann::json j;
  j["instant"] = f.instant;
  if (!f.instant) {
    j["rate"] = f.rate;
    j["quality"] = f.quality;
    j["window"] = {f.window_start, f.window_end};
    j["points"] = f.points;
  }
  return j;
}

inline nlohmann::json to_json(const SummabilityReport& r) {
  nlohmann::json j;
  j["tol"] = r.tol;
  j["all_plateau"] = r.all_plateau;
  auto entries = [](const std::vector<SummabilityReport::Entry>& es) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : es) {
      nlohmann::json one;
      one["i"] = e.i;
      if (e.j >= 0) one["j"] = e.j;
      one["total"] = e.total;
      one["tail_contribution"] = e.tail_contribution;
      one["plateau"] = e.plateau;
      arr.push_back(std::move(one));
    }
    return arr;
  };
  j["pair_flow"] = entries(r.pair_flow);
  j["state_rate"] = entries(r.state_rate);
  j["residual"] = entries(r.residual);
  return j;
}

inline nlohmann::json to_json(const EquidistanceVerdict& v) {
  nlohmann::json j;
  j["holds"] = v.holds;
  j["d_star"] = v.d_star;
  j["spread"] = v.spread;
  j["tol"] = v.tol;
  j["distances"] = detail::vector_to_json(v.distances);
  return j;
}

inline nlohmann::json to_json(const ModulusVerdict& v) {
  nlohmann::json j;
  j["holds"] = v.holds;
  j["x_star"] = v.x_star;
  j["spread"] = v.spread;
  j["tol"] = v.tol;
  j["classification"] = v.classification;
  j["positive_group"] = v.positive_group;
  j["negative_group"] = v.negative_group;
  return j;
}

inline nlohmann::json to_json(const SurroundVerdict& v) {
  nlohmann::json j;
  j["holds"] = v.holds;
  j["tail_max"] = v.tail_max;
  j["tol"] = v.tol;
  j["window_start"] = v.window_start;
  return j;
}

inline nlohmann::json to_json(const ContractionCertificate& c) {
  nlohmann::json j;
  j["theta"] = c.theta;
  j["theta1"] = c.theta1;
  j["theta2"] = c.theta2;
  j["row_sum_bound"] = c.row_sum_bound;
  j["T"] = c.T;
  j["delta"] = c.delta;
  j["windows_checked"] = c.windows_checked;
  j["violations"] = c.violations;
  j["max_violation"] = c.max_violation;
  return j;
}

inline nlohmann::json to_json(const DichotomyReport& r) {
  nlohmann::json j;
  j["consensus"] = r.consensus_count;
  j["bounded_nonconvergent"] = r.bounded_nonconvergent_count;
  j["unbounded"] = r.unbounded_count;
  j["witness_attempted"] = r.witness_attempted;
  j["witness_found"] = r.witness_found;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json one;
    one["label"] = run.label;
    one["outcome"] = to_string(run.outcome);
    one["tail_spread"] = run.tail_spread;
    one["residual_ok"] = run.residual_ok;
    runs.push_back(std::move(one));
  }
  j["runs"] = std::move(runs);
  return j;
}

inline nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["boundedness"] = r.diverged ? "diverged" : (r.bounded ? "bounded" : "diverged");
  j["sup_norm"] = r.sup_norm;
  if (r.consensus) j["consensus"] = to_json(*r.consensus);
  if (r.rate) j["rate"] = to_json(*r.rate);
  if (r.residual_min) j["residual_min"] = *r.residual_min;
  if (r.summability) j["summability"] = to_json(*r.summability);
  if (r.equidistance) j["equidistance"] = to_json(*r.equidistance);
  if (r.modulus) j["modulus"] = to_json(*r.modulus);
  if (r.surround) j["surround"] = to_json(*r.surround);
  if (r.contraction) j["contraction"] = to_json(*r.contraction);
  if (!r.certificates.empty()) {
    nlohmann::json certs = nlohmann::json::array();
    for (const auto& c : r.certificates) certs.push_back(to_json(c));
    j["certificates"] = std::move(certs);
  }
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

// ---- CSV exports (17-significant-digit round-trip formatting) ----

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int stride = 1) {
  os << "t,agent,coord,value\n";
  for (int k = 0; k < traj.samples(); k += std::max(stride, 1)) {
    const std::string t = format_double(traj.times[k]);
    for (int i = 0; i < traj.agents; ++i)
      for (int c = 0; c < traj.dim; ++c)
        os << t << ',' << i << ',' << c << ','
           << format_double(traj.states[k](static_cast<Eigen::Index>(i) * traj.dim + c)) << '\n';
  }
}

inline void write_residual_csv(std::ostream& os, const ResidualTrace& res, int stride = 1) {
  os << "t,agent,value\n";
  for (std::size_t k = 0; k < res.values.size(); k += static_cast<std::size_t>(std::max(stride, 1))) {
    const std::string t = format_double(res.times[k]);
    for (Eigen::Index i = 0; i < res.values[k].size(); ++i)
      os << t << ',' << i << ',' << format_double(res.values[k](i)) << '\n';
  }
}

inline void write_ordering_csv(std::ostream& os, const OrderingTrace& ord, int stride = 1) {
  os << "t,rank,agent,value\n";
  for (std::size_t k = 0; k < ord.times.size(); k += static_cast<std::size_t>(std::max(stride, 1))) {
    const std::string t = format_double(ord.times[k]);
    for (Eigen::Index r = 0; r < ord.sorted[k].size(); ++r)
      os << t << ',' << r << ',' << ord.permutation[k][static_cast<std::size_t>(r)] << ','
         << format_double(ord.sorted[k](r)) << '\n';
  }
}

}  // namespace lapflow
