#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fullerkit/error.hpp"
#include "fullerkit/gallery.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/index.hpp"
#include "fullerkit/reeb.hpp"

namespace fullerkit {

/// One expected outcome of a scenario. `origin` says where the value comes
/// from: "theory" (the index theory being exercised), "trivial" (identity or
/// precondition), or "derived" (closed form; `oracle` names it).
struct Expectation {
  std::string key;
  nlohmann::json value;
  std::string origin;
  std::string oracle;
};

struct Scenario {
  std::string id;
  std::string description;
  std::string builtin;
  nlohmann::json params;
  VectorFieldFamily field;
  std::optional<ContactFormFamily> contact;
  std::optional<PerturbationSystem> psys;
  int seeds = 16;
  std::vector<double> caps;
  double sample_cap = 0.0;
  double p_max = 0.0;
  bool sample_t1 = true;
  double nonsingular_t_max = 1.0;
  std::optional<std::vector<int>> class_filter;
  std::vector<Expectation> expected;
  nlohmann::json source;

  std::vector<Vec> seed_points() const { return field.manifold.sample_net(seeds); }

  const Expectation* expectation(const std::string& key) const {
    for (const auto& e : expected)
      if (e.key == key) return &e;
    return nullptr;
  }

  /// X^a per cap: the perturbation level for hopf-perturbed, the t = 0 field otherwise.
  CappedFieldProvider provider() const {
    if (psys) return provider_for(*psys, seed_points());
    return provider_for(frozen(field, 0.0), seed_points(), 0.0, class_filter);
  }

  SkyOptions sky_options() const { return {sample_cap, p_max, sample_t1, class_filter}; }
};

namespace detail {

inline const std::map<std::string, std::string>& builtin_sources() {
  static const std::map<std::string, std::string> src = {
      {"hopf-s3", R"json({
  "v": 1,
  "id": "hopf-s3",
  "description": "Round S^3 with the Hopf field; every orbit is a fiber of period 2 pi (Morse-Bott baseline).",
  "family": {"builtin": "hopf", "params": {}},
  "seeds": 16,
  "caps": [7],
  "sample_cap": 7,
  "expected": [
    {"key": "orbit_period", "value": 6.283185307179586, "origin": "derived", "oracle": "closed-form linear flow exp(sJ)"},
    {"key": "morse_bott_suspect", "value": true, "origin": "derived", "oracle": "all fibers share the period 2 pi"},
    {"key": "monodromy_identity", "value": true, "origin": "derived", "oracle": "rotation by 2 pi in each coordinate 2-plane"}
  ]
})json"},
      {"hopf-perturbed", R"json({
  "v": 1,
  "id": "hopf-perturbed",
  "description": "Bourgeois perturbation (1 + mu f) lambda_std with f the height on CP^1; levels 2 pi (n + 1/2), n = 1..3.",
  "family": {"builtin": "hopf-perturbed", "params": {"mu0": 0.005, "levels": 3}},
  "seeds": 16,
  "caps": [7, 13, 19],
  "sample_cap": 7,
  "expected": [
    {"key": "orbits_per_level", "value": 2, "origin": "theory"},
    {"key": "index_signs_equal", "value": true, "origin": "theory"},
    {"key": "cz_gap", "value": 2, "origin": "theory"},
    {"key": "definite_type", "value": "PlusInfinity", "origin": "theory"}
  ]
})json"},
      {"hopf-rescale", R"json({
  "v": 1,
  "id": "hopf-rescale",
  "description": "Contact rescaling lambda_t = (1 + 0.1 t) lambda_std; Reeb field H / (1 + 0.1 t).",
  "family": {"builtin": "hopf-rescale", "params": {"eps": 0.1}},
  "seeds": 8,
  "caps": [7],
  "sample_cap": 8,
  "p_max": 1000,
  "sample_t1": true,
  "expected": [
    {"key": "verdict", "value": "Admissible", "origin": "derived", "oracle": "periods 2 pi (1 + 0.1 t) stay below 2 pi max f"},
    {"key": "period_ratio", "value": 1.1, "origin": "derived", "oracle": "closed-form conformal rescaling"},
    {"key": "growth_K", "value": 0.11, "origin": "derived", "oracle": "max |df/dt| * max f for f = 1 + 0.1 t"},
    {"key": "growth_pass", "value": true, "origin": "theory"}
  ]
})json"},
      {"blue-sky-torus", R"json({
  "v": 1,
  "id": "blue-sky-torus",
  "description": "Solid torus; the sink circle keeps period 2 pi / (1 - t) while the field stays non-singular for t < 1.",
  "family": {"builtin": "blue-sky-torus", "params": {"kappa": 1.0, "rho0": 0.5, "omega0": 1.0, "eps": 0.2, "c": 2.0, "w": 0.3}},
  "seeds": 8,
  "caps": [7, 9, 11],
  "sample_cap": 8,
  "p_max": 1000,
  "sample_t1": false,
  "nonsingular_t_max": 0.999,
  "class_filter": [0],
  "expected": [
    {"key": "verdict", "value": "SkyFlagged", "origin": "derived", "oracle": "closed-form branch p(t) = 2 pi / (1 - t)"},
    {"key": "sky_witnesses", "value": 1, "origin": "derived", "oracle": "only the sink circle has a slow factor vanishing at t = 1"},
    {"key": "sink_period_t0", "value": 6.283185307179586, "origin": "derived", "oracle": "unit angular speed on the invariant circle"},
    {"key": "definite_type", "value": {"kind": "Finite", "num": 0, "den": 1}, "origin": "trivial"}
  ]
})json"},
      {"torus-linear", R"json({
  "v": 1,
  "id": "torus-linear",
  "description": "Constant field (1, alpha) on T^2; rational slope 1/2 closes after time 4 pi in class (2, 1).",
  "family": {"builtin": "torus-linear", "params": {"alpha": 0.5}},
  "seeds": 8,
  "caps": [13],
  "sample_cap": 13,
  "expected": [
    {"key": "orbit_period", "value": 12.566370614359172, "origin": "derived", "oracle": "closed-form linear flow"},
    {"key": "class_tag", "value": [2, 1], "origin": "derived", "oracle": "winding of the linear flow over one period"},
    {"key": "morse_bott_suspect", "value": true, "origin": "derived", "oracle": "every point lies on a closed orbit"}
  ]
})json"},
      {"hopf-c0-near", R"json({
  "v": 1,
  "id": "hopf-c0-near",
  "description": "Hopf field plus delta B x with B a fixed generic skew matrix.",
  "family": {"builtin": "hopf-c0-near", "params": {"delta": 0.001, "delta_ladder": [0.01, 0.001, 0.0001]}},
  "seeds": 8,
  "caps": [7],
  "sample_cap": 7,
  "expected": [
    {"key": "hausdorff_monotone", "value": true, "origin": "theory"}
  ]
})json"},
  };
  return src;
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw Error(ErrorCode::SchemaViolation, "unknown key '" + k + "' in " + where);
}

template <class T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, where + "." + key + ": " + e.what());
  }
}

inline double param(const nlohmann::json& p, const char* key, double dflt) {
  if (!p.contains(key)) return dflt;
  if (!p.at(key).is_number()) throw Error(ErrorCode::SchemaViolation, std::string("param ") + key + " must be numeric");
  return p.at(key).get<double>();
}

}  // namespace detail

inline std::vector<std::string> builtin_scenario_ids() {
  std::vector<std::string> ids;
  for (const auto& [k, v] : detail::builtin_sources()) ids.push_back(k);
  return ids;
}

/// Builds and validates a scenario from its JSON description.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_as;
  check_keys(j, {"v", "id", "description", "family", "seeds", "caps", "sample_cap", "p_max", "sample_t1",
                 "nonsingular_t_max", "class_filter", "expected"},
             "scenario");
  for (const char* req : {"v", "id", "family", "expected"})
    if (!j.contains(req)) throw Error(ErrorCode::SchemaViolation, std::string("missing key '") + req + "'");
  if (get_as<int>(j, "v", "scenario") != 1) throw Error(ErrorCode::SchemaViolation, "unsupported schema version");

  Scenario s{.id = get_as<std::string>(j, "id", "scenario"),
             .description = j.value("description", std::string{}),
             .builtin = {},
             .params = nlohmann::json::object(),
             .field = gallery::hopf_field()};
  s.source = j;
  const auto& fam = j.at("family");
  check_keys(fam, {"builtin", "params"}, "family");
  s.builtin = get_as<std::string>(fam, "builtin", "family");
  if (fam.contains("params")) s.params = fam.at("params");
  check_keys(s.params, {"mu0", "levels", "eps", "kappa", "rho0", "omega0", "c", "w", "alpha", "delta", "delta_ladder"},
             "family.params");

  const auto& p = s.params;
  auto only = [&](std::set<std::string> allowed) { check_keys(p, allowed, "family.params of " + s.builtin); };
  if (s.builtin == "hopf") {
    only({});
    s.field = gallery::hopf_field();
    s.contact = gallery::standard_contact();
  } else if (s.builtin == "hopf-perturbed") {
    only({"mu0", "levels"});
    const double mu0 = detail::param(p, "mu0", 0.005);
    const int levels = static_cast<int>(detail::param(p, "levels", 3));
    if (!(mu0 >= 0) || levels < 1) throw Error(ErrorCode::SchemaViolation, "need mu0 >= 0 and levels >= 1");
    s.psys = gallery::hopf_perturbed_system(levels, mu0);
    s.field = s.psys->field(0);
    s.field.label = "hopf-perturbed";
    s.contact = s.psys->contact(0);
  } else if (s.builtin == "hopf-rescale") {
    only({"eps"});
    const double eps = detail::param(p, "eps", 0.1);
    if (!(eps > -1.0)) throw Error(ErrorCode::SchemaViolation, "eps must exceed -1");
    s.contact = gallery::hopf_rescale_contact(eps);
    s.field = reeb_family(*s.contact, "hopf-rescale");
  } else if (s.builtin == "blue-sky-torus") {
    only({"kappa", "rho0", "omega0", "eps", "c", "w"});
    gallery::BlueSkyParams q;
    q.kappa = detail::param(p, "kappa", q.kappa);
    q.rho0 = detail::param(p, "rho0", q.rho0);
    q.omega0 = detail::param(p, "omega0", q.omega0);
    q.eps = detail::param(p, "eps", q.eps);
    q.c = detail::param(p, "c", q.c);
    q.w = detail::param(p, "w", q.w);
    if (!(q.rho0 > 0 && q.rho0 < 1 && q.w > 0 && q.kappa > 0))
      throw Error(ErrorCode::SchemaViolation, "blue-sky-torus needs 0 < rho0 < 1, w > 0, kappa > 0");
    s.field = gallery::blue_sky_torus(q);
  } else if (s.builtin == "torus-linear") {
    only({"alpha"});
    s.field = gallery::torus_linear(detail::param(p, "alpha", 0.5));
  } else if (s.builtin == "hopf-c0-near") {
    only({"delta", "delta_ladder"});
    if (p.contains("delta_ladder")) {
      const auto& l = p.at("delta_ladder");
      if (!l.is_array()) throw Error(ErrorCode::SchemaViolation, "delta_ladder must be an array");
      for (const auto& v : l)
        if (!v.is_number()) throw Error(ErrorCode::SchemaViolation, "delta_ladder entries must be numeric");
    }
    s.field = gallery::hopf_c0_near(detail::param(p, "delta", 1e-3));
  } else {
    throw Error(ErrorCode::SchemaViolation, "unknown family builtin '" + s.builtin + "'");
  }

  if (j.contains("seeds")) s.seeds = get_as<int>(j, "seeds", "scenario");
  if (s.seeds < 1) throw Error(ErrorCode::SchemaViolation, "seeds must be positive");
  if (j.contains("caps")) s.caps = get_as<std::vector<double>>(j, "caps", "scenario");
  for (std::size_t i = 0; i < s.caps.size(); ++i)
    if (!(s.caps[i] > 0) || (i > 0 && !(s.caps[i] > s.caps[i - 1])))
      throw Error(ErrorCode::SchemaViolation, "caps must be positive and increasing");
  s.sample_cap = j.contains("sample_cap") ? get_as<double>(j, "sample_cap", "scenario")
                                          : (s.caps.empty() ? 7.0 : s.caps.front());
  s.p_max = j.contains("p_max") ? get_as<double>(j, "p_max", "scenario") : 1000.0;
  if (j.contains("sample_t1")) s.sample_t1 = get_as<bool>(j, "sample_t1", "scenario");
  if (j.contains("nonsingular_t_max")) s.nonsingular_t_max = get_as<double>(j, "nonsingular_t_max", "scenario");
  if (j.contains("class_filter")) s.class_filter = get_as<std::vector<int>>(j, "class_filter", "scenario");

  const auto& ex = j.at("expected");
  if (!ex.is_array()) throw Error(ErrorCode::SchemaViolation, "expected must be an array");
  for (const auto& e : ex) {
    check_keys(e, {"key", "value", "origin", "oracle"}, "expected entry");
    for (const char* req : {"key", "value", "origin"})
      if (!e.contains(req)) throw Error(ErrorCode::SchemaViolation, std::string("expected entry missing '") + req + "'");
    Expectation x{get_as<std::string>(e, "key", "expected"), e.at("value"), get_as<std::string>(e, "origin", "expected"),
                  e.value("oracle", std::string{})};
    if (x.origin != "theory" && x.origin != "trivial" && x.origin != "derived")
      throw Error(ErrorCode::SchemaViolation, "origin must be theory, trivial or derived (got '" + x.origin + "')");
    if (x.origin == "derived" && x.oracle.empty())
      throw Error(ErrorCode::SchemaViolation, "derived expectation '" + x.key + "' must name its oracle");
    s.expected.push_back(std::move(x));
  }
  return s;
}

inline nlohmann::json builtin_scenario_json(const std::string& id) {
  const auto& src = detail::builtin_sources();
  const auto it = src.find(id);
  if (it == src.end()) throw Error(ErrorCode::UnknownBuiltin, "no built-in scenario '" + id + "'");
  return nlohmann::json::parse(it->second);
}

/// A path to a scenario file, or a built-in id.
inline Scenario load_scenario(const std::string& path_or_id) {
  if (std::filesystem::is_regular_file(path_or_id)) {
    std::ifstream in(path_or_id);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, path_or_id + ": " + e.what());
    }
    return scenario_from_json(j);
  }
  return scenario_from_json(builtin_scenario_json(path_or_id));
}

struct ValidityReport {
  double min_norm = 0.0;
  Vec witness_x;
  double witness_t = 0.0;
  double tangency_defect = 0.0;
  std::optional<double> reeb_defect;
  double seconds = 0.0;
  bool ok = false;
};

/// Non-singularity and tangency over a space-time net (and the Reeb defect
/// when the scenario carries a contact form).
inline ValidityReport check_validity(const Scenario& s, int points = 10'000, int t_levels = 5) {
  const auto t0 = std::chrono::steady_clock::now();
  ValidityReport r;
  const auto net = space_time_net(s.field.manifold, points, t_levels, s.nonsingular_t_max);
  const auto cert = check_nonsingular(s.field, net);
  r.min_norm = cert.min_norm;
  r.witness_x = cert.witness_x;
  r.witness_t = cert.witness_t;
  const auto& m = s.field.manifold;
  for (const auto& [x, t] : net) {
    const Vec v = s.field.field(x, t);
    r.tangency_defect = std::max(r.tangency_defect, (v - m.tangent_projector(x) * v).norm());
    if (s.contact) {
      const auto d = reeb_defect(*s.contact, x, v, t);
      r.reeb_defect = std::max(r.reeb_defect.value_or(0.0), std::max(d.normalization, d.kernel));
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.ok = r.min_norm > 0 && r.tangency_defect <= 1e-10 && (!r.reeb_defect || *r.reeb_defect <= 1e-8);
  return r;
}

}  // namespace fullerkit
