#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "fullerkit/error.hpp"

namespace fullerkit {

/// Every numeric default used anywhere in the pipeline. The CLI echoes this
/// block verbatim into its reports, so a run is reproducible from its output.
struct Config {
  // geometry
  double metric_tol = 1e-9;

  // flow
  double rtol = 1e-10;
  double atol = 1e-12;
  double loose_rtol = 1e-7;     // early Newton iterates only
  double jacobian_fd_step = 1e-6;
  double param_fd_step = 1e-6;
  long max_steps = 2'000'000;

  // orbits
  int newton_max_iter = 50;
  double newton_tol = 1e-8;
  double least_period_tol = 1e-7;
  int max_multiplicity = 12;
  double degeneracy_threshold = 1e-6;
  double dedup_rel = 1e-4;      // times the manifold diameter
  double period_match_rel = 1e-6;
  int seeds = 256;
  double ladder_ratio = 1.5;
  double ladder_floor = 0.125;  // lowest guess as a fraction of the cap
  int image_samples = 64;

  // index
  double degree_radius = 1e-3;
  int degree_samples = 720;
  double degree_zero_tol = 1e-9;
  int infinite_type_min_caps = 3;

  // continuation
  double step_initial = 0.05;
  double step_min = 1e-8;
  double step_max = 25.0;
  double step_growth = 1.3;
  int corrector_max_iter = 8;
  int corrector_fast_iter = 3;
  int max_branch_nodes = 5000;
  double reconnect_tol = 1e-4;

  // correspondence
  double sep_rel = 1e-6;        // times the manifold diameter
  double shift_tol = 1e-7;

  // reeb
  double mu0 = 0.005;
  int mu_retries = 8;
  int growth_net = 10'000;
  double growth_slack = 0.05;

  int threads = 1;
};

inline nlohmann::json to_json(const Config& c) {
  return {
      {"metric_tol", c.metric_tol},
      {"rtol", c.rtol},
      {"atol", c.atol},
      {"loose_rtol", c.loose_rtol},
      {"jacobian_fd_step", c.jacobian_fd_step},
      {"param_fd_step", c.param_fd_step},
      {"max_steps", c.max_steps},
      {"newton_max_iter", c.newton_max_iter},
      {"newton_tol", c.newton_tol},
      {"least_period_tol", c.least_period_tol},
      {"max_multiplicity", c.max_multiplicity},
      {"degeneracy_threshold", c.degeneracy_threshold},
      {"dedup_rel", c.dedup_rel},
      {"period_match_rel", c.period_match_rel},
      {"seeds", c.seeds},
      {"ladder_ratio", c.ladder_ratio},
      {"ladder_floor", c.ladder_floor},
      {"image_samples", c.image_samples},
      {"degree_radius", c.degree_radius},
      {"degree_samples", c.degree_samples},
      {"degree_zero_tol", c.degree_zero_tol},
      {"infinite_type_min_caps", c.infinite_type_min_caps},
      {"step_initial", c.step_initial},
      {"step_min", c.step_min},
      {"step_max", c.step_max},
      {"step_growth", c.step_growth},
      {"corrector_max_iter", c.corrector_max_iter},
      {"corrector_fast_iter", c.corrector_fast_iter},
      {"max_branch_nodes", c.max_branch_nodes},
      {"reconnect_tol", c.reconnect_tol},
      {"sep_rel", c.sep_rel},
      {"shift_tol", c.shift_tol},
      {"mu0", c.mu0},
      {"mu_retries", c.mu_retries},
      {"growth_net", c.growth_net},
      {"growth_slack", c.growth_slack},
      {"threads", c.threads},
  };
}

/// Overlays `j` onto `base`. Unknown keys are rejected so that a typo in a
/// config file cannot silently fall back to a default.
inline Config config_from_json(const nlohmann::json& j, Config base = {}) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "config must be a JSON object");
  const nlohmann::json known = to_json(base);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::SchemaViolation, "unknown config key '" + key + "'");
    if (!value.is_number()) throw Error(ErrorCode::SchemaViolation, "config key '" + key + "' must be numeric");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  Config c = base;
  get("metric_tol", c.metric_tol);
  get("rtol", c.rtol);
  get("atol", c.atol);
  get("loose_rtol", c.loose_rtol);
  get("jacobian_fd_step", c.jacobian_fd_step);
  get("param_fd_step", c.param_fd_step);
  get("max_steps", c.max_steps);
  get("newton_max_iter", c.newton_max_iter);
  get("newton_tol", c.newton_tol);
  get("least_period_tol", c.least_period_tol);
  get("max_multiplicity", c.max_multiplicity);
  get("degeneracy_threshold", c.degeneracy_threshold);
  get("dedup_rel", c.dedup_rel);
  get("period_match_rel", c.period_match_rel);
  get("seeds", c.seeds);
  get("ladder_ratio", c.ladder_ratio);
  get("ladder_floor", c.ladder_floor);
  get("image_samples", c.image_samples);
  get("degree_radius", c.degree_radius);
  get("degree_samples", c.degree_samples);
  get("degree_zero_tol", c.degree_zero_tol);
  get("infinite_type_min_caps", c.infinite_type_min_caps);
  get("step_initial", c.step_initial);
  get("step_min", c.step_min);
  get("step_max", c.step_max);
  get("step_growth", c.step_growth);
  get("corrector_max_iter", c.corrector_max_iter);
  get("corrector_fast_iter", c.corrector_fast_iter);
  get("max_branch_nodes", c.max_branch_nodes);
  get("reconnect_tol", c.reconnect_tol);
  get("sep_rel", c.sep_rel);
  get("shift_tol", c.shift_tol);
  get("mu0", c.mu0);
  get("mu_retries", c.mu_retries);
  get("growth_net", c.growth_net);
  get("growth_slack", c.growth_slack);
  get("threads", c.threads);
  return c;
}

}  // namespace fullerkit
