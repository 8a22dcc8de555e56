#pragma once

#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "fullerkit/continuation.hpp"
#include "fullerkit/correspondence.hpp"
#include "fullerkit/index.hpp"
#include "fullerkit/orbits.hpp"
#include "fullerkit/rational.hpp"
#include "fullerkit/reeb.hpp"

namespace fullerkit {

inline nlohmann::json vec_json(const Vec& v) {
  auto a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || j.size() > 4) throw Error(ErrorCode::SchemaViolation, "point must be an array of 1..4 numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

inline nlohmann::json to_json(const PeriodicOrbit& o) {
  return {{"base", vec_json(o.base)},
          {"period", o.period},
          {"t", o.param_t},
          {"least_period", o.least_period},
          {"multiplicity", o.multiplicity},
          {"class", o.class_tag},
          {"residual", o.residual},
          {"det_i_minus_a", o.det_i_minus_a},
          {"morse_bott_suspect", o.morse_bott_suspect}};
}

inline PeriodicOrbit orbit_from_json(const nlohmann::json& j) {
  PeriodicOrbit o;
  o.base = vec_from_json(j.at("base"));
  o.period = j.at("period").get<double>();
  o.param_t = j.value("t", 0.0);
  o.least_period = j.value("least_period", o.period);
  o.multiplicity = j.value("multiplicity", 1);
  o.class_tag = j.value("class", std::vector<int>{});
  o.residual = j.value("residual", 0.0);
  o.det_i_minus_a = j.value("det_i_minus_a", 0.0);
  o.morse_bott_suspect = j.value("morse_bott_suspect", false);
  return o;
}

inline nlohmann::json to_json(const OrbitSet& s, const EmbeddedManifold& m) {
  auto orbits = nlohmann::json::array();
  for (const auto& o : s.orbits) orbits.push_back(to_json(o));
  return {{"manifold", m.name()},
          {"t", s.param_t},
          {"cap", s.period_cap},
          {"dedup_eps", s.dedup_eps},
          {"attempts", s.attempts},
          {"failures", s.failures},
          {"morse_bott_suspect", s.morse_bott_suspect},
          {"orbits", orbits}};
}

inline nlohmann::json to_json(const IndexReport& r) {
  nlohmann::json j = {{"orbit", to_json(r.orbit)},
                      {"fp_index", r.fp_index},
                      {"method", to_string(r.method)},
                      {"nondegenerate", r.nondegenerate},
                      {"det_i_minus_a", r.det_i_minus_a}};
  j["cz_index"] = r.cz_index ? nlohmann::json(*r.cz_index) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const FullerIndexValue& v) {
  auto levels = nlohmann::json::array();
  for (const auto& l : v.levels) {
    auto reps = nlohmann::json::array();
    for (const auto& r : l.reports) reps.push_back(to_json(r));
    levels.push_back({{"cap", l.cap}, {"partial_sum", l.partial_sum}, {"orbits", reps}});
  }
  nlohmann::json j = {{"kind", to_string(v.kind)}, {"levels", levels}};
  if (v.kind == FullerKind::Finite)
    j["value"] = v.value;
  else
    j["E"] = v.E;
  return j;
}

inline nlohmann::json to_json(const OrbitBranch& b) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : b.nodes) {
    nlohmann::json nj = {{"x", vec_json(n.x)}, {"p", n.p}, {"t", n.t}, {"multiplicity", n.multiplicity}};
    nj["fp_index"] = n.fp_index ? nlohmann::json(*n.fp_index) : nlohmann::json(nullptr);
    nodes.push_back(std::move(nj));
  }
  return {{"label", b.label},
          {"status", to_string(b.status)},
          {"component", b.component_id},
          {"step_cap", b.step_cap},
          {"arclength", b.arclength},
          {"nodes", nodes}};
}

inline BranchStatus branch_status_from_string(const std::string& s) {
  for (auto st : {BranchStatus::ReachedT0, BranchStatus::ReachedT1, BranchStatus::PeriodCapHit, BranchStatus::FoldExhausted,
                  BranchStatus::NewtonLost})
    if (s == to_string(st)) return st;
  throw Error(ErrorCode::SchemaViolation, "unknown branch status '" + s + "'");
}

inline OrbitBranch branch_from_json(const nlohmann::json& j) {
  try {
    OrbitBranch b;
    b.label = j.value("label", std::string{});
    b.status = branch_status_from_string(j.at("status").get<std::string>());
    b.component_id = j.value("component", -1);
    b.step_cap = j.value("step_cap", 0.0);
    b.arclength = j.value("arclength", std::vector<double>{});
    for (const auto& nj : j.at("nodes")) {
      BranchNode n;
      n.x = vec_from_json(nj.at("x"));
      n.p = nj.at("p").get<double>();
      n.t = nj.at("t").get<double>();
      n.multiplicity = nj.value("multiplicity", 1);
      if (nj.contains("fp_index") && !nj.at("fp_index").is_null()) n.fp_index = nj.at("fp_index").get<int>();
      b.nodes.push_back(std::move(n));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("branch: ") + e.what());
  }
}

inline nlohmann::json to_json(const AdmissibilityReport& r) {
  auto branches = nlohmann::json::array();
  for (const auto& b : r.branches) branches.push_back(to_json(b));
  auto comps = nlohmann::json::array();
  for (const auto& c : r.components)
    comps.push_back({{"id", c.id}, {"branches", c.branches}, {"closed", c.closed}, {"non_branching", c.non_branching}});
  return {{"homotopy", r.homotopy_label},
          {"p_max", r.p_max},
          {"verdict", to_string(r.verdict)},
          {"both_ends", r.both_ends},
          {"sky_witnesses", r.sky_witnesses},
          {"components", comps},
          {"branches", branches}};
}

inline nlohmann::json to_json(const GrowthBoundReport& g) {
  return {{"K", g.K},
          {"L", g.L},
          {"bound", g.bound},
          {"measured", g.measured},
          {"ratio", g.ratio},
          {"worst_pair", g.worst_pair},
          {"pairwise_ok", g.pairwise_ok},
          {"pass", g.pass},
          {"net_size", g.net_size}};
}

inline nlohmann::json to_json(const CorrespondenceReport& r) {
  auto pts = nlohmann::json::array();
  for (const auto& p : r.lifted.tuple.points) pts.push_back(vec_json(p));
  return {{"index_match", r.index_match},
          {"period_ratio", r.period_ratio},
          {"mult_match", r.mult_match},
          {"original_index", r.original_index},
          {"lifted_index", r.lifted_index},
          {"det_original", r.det_original},
          {"det_lifted", r.det_lifted},
          {"mu", r.mu},
          {"lifted_multiplicity", r.lifted_multiplicity},
          {"lifted", {{"k", r.lifted.tuple.k}, {"period", r.lifted.period}, {"points", pts}}}};
}

inline nlohmann::json to_json(const PerturbationSystem& s) {
  auto levels = nlohmann::json::array();
  for (const auto& l : s.levels)
    levels.push_back({{"E", l.E},
                      {"mu", l.mu},
                      {"halvings", l.halvings},
                      {"validated", l.validated},
                      {"degenerate", l.degenerate},
                      {"orbit_count", l.orbit_count},
                      {"min_abs_det", l.min_abs_det}});
  return {{"base", s.base.label}, {"levels", levels}};
}

/// One row per node: node_index,t,p,x1,...,xn.
inline void write_branch_csv(std::ostream& os, const OrbitBranch& b) {
  const int n = b.nodes.empty() ? 0 : static_cast<int>(b.nodes.front().x.size());
  os << "node_index,t,p";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < b.nodes.size(); ++k) {
    const auto& nd = b.nodes[k];
    os << k << ',' << nd.t << ',' << nd.p;
    for (int i = 0; i < nd.x.size(); ++i) os << ',' << nd.x(i);
    os << '\n';
  }
}

}  // namespace fullerkit
