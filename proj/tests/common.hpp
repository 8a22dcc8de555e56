#pragma once

#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fullerkit/fullerkit.hpp"

namespace fktest {

using namespace fullerkit;

inline const std::vector<std::string>& scenario_ids() {
  static const auto ids = builtin_scenario_ids();
  return ids;
}

inline const Scenario& scenario(const std::string& id) {
  static std::map<std::string, Scenario> cache;
  auto it = cache.find(id);
  if (it == cache.end()) it = cache.emplace(id, load_scenario(id)).first;
  return it->second;
}

inline Vec v4(double a, double b, double c, double d) {
  Vec v(4);
  v << a, b, c, d;
  return v;
}

inline Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

/// Max entrywise difference.
inline double maxdiff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Nondegenerate orbits used for index-level checks: both perturbed-Hopf
/// orbits at level 1, and the blue-sky sink and saddle at t = 0.
struct NamedOrbit {
  std::string name;
  VectorFieldFamily fam;
  PeriodicOrbit orbit;
};

inline const std::vector<NamedOrbit>& reference_orbits() {
  static const std::vector<NamedOrbit> out = [] {
    std::vector<NamedOrbit> v;
    Config cfg;
    const auto& hp = scenario("hopf-perturbed");
    const auto f1 = hp.psys->field(0);
    const auto set = sample_orbit_space(f1, 0.0, 7.0, hp.seed_points(), cfg);
    for (std::size_t i = 0; i < set.orbits.size(); ++i)
      v.push_back({"hopf-perturbed#" + std::to_string(i), f1, set.orbits[i]});
    const auto bs = gallery::blue_sky_torus();
    v.push_back({"blue-sky-sink", bs, find_orbit(bs, gallery::blue_sky_sink_point(), 6.0, 0.0, cfg)});
    v.push_back({"blue-sky-saddle", bs, find_orbit(bs, gallery::blue_sky_saddle_point(), 6.0, 0.0, cfg)});
    return v;
  }();
  return out;
}

}  // namespace fktest
