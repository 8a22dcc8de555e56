#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fullerkit/fullerkit.hpp"

namespace fk = fullerkit;
using nlohmann::json;

namespace {

constexpr int kExitDomain = 2;
constexpr int kExitUsage = 3;

struct Common {
  std::string scenario;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  bool no_meta = false;
  int threads = 0;
  int seeds = 0;
  double t = 0.0;
};

struct Options {
  Common c;
  double cap = 0.0;
  std::vector<double> caps;
  double pmax = 0.0;
  double t_target = 1.0;
  int orbit_id = 0;
  int k = 3;
  int levels = 3;
  double mu0 = -1.0;
  double k_scale = 1.0;
  std::string branch_file;
  std::string csv;
  std::string csv_dir;
  std::string path;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FULLERKIT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fk::Error(fk::ErrorCode::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw fk::Error(fk::ErrorCode::ParseError, path + ": " + e.what());
  }
}

fk::Config build_config(const Common& c, bool& seeds_given) {
  fk::Config cfg;
  if (!c.config_path.empty()) {
    const auto file = read_json_file(c.config_path);
    seeds_given = file.is_object() && file.contains("seeds");
    cfg = fk::config_from_json(file, cfg);
  }
  json overrides = json::object();
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fk::Error(fk::ErrorCode::SchemaViolation, "--set expects key=value, got " + kv);
    try {
      overrides[kv.substr(0, eq)] = json::parse(kv.substr(eq + 1));
    } catch (const json::parse_error&) {
      throw fk::Error(fk::ErrorCode::SchemaViolation, "--set value is not a number: " + kv);
    }
  }
  seeds_given = seeds_given || overrides.contains("seeds");
  cfg = fk::config_from_json(overrides, cfg);
  cfg.threads = resolve_threads(c.threads);
  return cfg;
}

/// Seed count actually used: --seeds, then seeds from --config / --set, then
/// the scenario's own, then the default.
int effective_seeds(const Common& c, const fk::Config& cfg, bool seeds_given) {
  if (c.seeds > 0) return c.seeds;
  if (seeds_given) return cfg.seeds;
  if (!c.scenario.empty()) {
    const auto s = fk::load_scenario(c.scenario);
    if (s.source.contains("seeds")) return s.seeds;
  }
  return cfg.seeds;
}

fk::Scenario load(const Common& c, const fk::Config& cfg) {
  auto s = fk::load_scenario(c.scenario);
  s.seeds = cfg.seeds;
  return s;
}

/// Level field and contact form in force below `cap`.
std::pair<fk::VectorFieldFamily, std::optional<fk::ContactFormFamily>> field_at_cap(const fk::Scenario& s, double cap) {
  if (s.psys) {
    const auto lvl = s.psys->level_for_cap(cap);
    return {s.psys->field(lvl), s.psys->contact(lvl)};
  }
  return {s.field, s.contact};
}

fk::OrbitSet sample(const fk::Scenario& s, const fk::VectorFieldFamily& fam, double t, double cap, const fk::Config& cfg) {
  auto set = fk::sample_orbit_space(fam, t, cap, s.seed_points(), cfg);
  if (s.class_filter) {
    std::erase_if(set.orbits, [&](const fk::PeriodicOrbit& o) { return o.class_tag != *s.class_filter; });
  }
  return set;
}

const fk::PeriodicOrbit& pick(const fk::OrbitSet& set, int id) {
  if (id < 0 || id >= static_cast<int>(set.orbits.size()))
    throw fk::Error(fk::ErrorCode::InvalidArgument, "orbit id " + std::to_string(id) + " out of range (found " +
                                                        std::to_string(set.orbits.size()) + " orbits)");
  return set.orbits[static_cast<std::size_t>(id)];
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw fk::Error(fk::ErrorCode::InvalidArgument, "cannot write " + path);
  f << text;
}

void dump_branch_csv(const std::string& path, const fk::OrbitBranch& b) {
  std::ofstream f(path);
  if (!f) throw fk::Error(fk::ErrorCode::InvalidArgument, "cannot write " + path);
  fk::write_branch_csv(f, b);
}

json run_find_orbits(const Options& o, const fk::Config& cfg, json& warnings) {
  const auto s = load(o.c, cfg);
  const double cap = o.cap > 0 ? o.cap : s.sample_cap;
  const auto [fam, contact] = field_at_cap(s, cap);
  const auto set = sample(s, fam, o.c.t, cap, cfg);
  if (set.morse_bott_suspect) warnings.push_back("orbit set looks Morse-Bott; indices are not defined");
  if (!o.csv_dir.empty()) {
    std::filesystem::create_directories(o.csv_dir);
    for (std::size_t i = 0; i < set.orbits.size(); ++i) {
      const auto& orb = set.orbits[i];
      const auto fr = fk::flow_map(fam, orb.base, orb.period, orb.param_t, cfg, true);
      std::ofstream f(o.csv_dir + "/orbit_" + std::to_string(i) + ".csv");
      f.precision(17);
      fk::write_trajectory_csv(f, *fr.trajectory);
    }
  }
  return fk::to_json(set, fam.manifold);
}

json run_index(const Options& o, const fk::Config& cfg, json& warnings) {
  const auto s = load(o.c, cfg);
  const double cap = o.cap > 0 ? o.cap : s.sample_cap;
  const auto [fam, contact] = field_at_cap(s, cap);
  const auto set = sample(s, fam, o.c.t, cap, cfg);
  json reports = json::array();
  for (const auto& orb : set.orbits) {
    try {
      const auto r = contact ? fk::index_with_cz(fam, orb, *contact, cfg) : fk::fixed_point_index(fam, orb, cfg);
      reports.push_back(fk::to_json(r));
    } catch (const fk::Error& e) {
      if (e.code() != fk::ErrorCode::DegenerateUnresolved) throw;
      warnings.push_back("orbit at period " + std::to_string(orb.period) + ": " + e.what());
    }
  }
  return {{"cap", cap}, {"t", o.c.t}, {"reports", reports}};
}

json run_classify(const Options& o, const fk::Config& cfg, json&) {
  const auto s = load(o.c, cfg);
  const auto caps = o.caps.empty() ? s.caps : o.caps;
  if (caps.empty()) throw fk::Error(fk::ErrorCode::InvalidArgument, "no caps given");
  return fk::to_json(fk::classify_definite_type(s.provider(), caps, cfg));
}

json run_continue(const Options& o, const fk::Config& cfg, json&) {
  const auto s = load(o.c, cfg);
  const double pmax = o.pmax > 0 ? o.pmax : s.p_max;
  const auto set = sample(s, s.field, o.c.t, s.sample_cap, cfg);
  const auto br = fk::continue_branch(s.field, pick(set, o.orbit_id), o.t_target, pmax, cfg);
  if (!o.csv.empty()) dump_branch_csv(o.csv, br);
  return {{"orbit_id", o.orbit_id}, {"p_max", pmax}, {"branch", fk::to_json(br)}};
}

json run_detect_sky(const Options& o, const fk::Config& cfg, json&) {
  const auto s = load(o.c, cfg);
  auto opt = s.sky_options();
  if (o.pmax > 0) opt.p_max = o.pmax;
  const auto rep = fk::detect_sky(s.field, s.seed_points(), opt, cfg);
  if (!o.csv_dir.empty()) {
    std::filesystem::create_directories(o.csv_dir);
    for (std::size_t i = 0; i < rep.branches.size(); ++i)
      dump_branch_csv(o.csv_dir + "/branch_" + std::to_string(i) + ".csv", rep.branches[i]);
  }
  return fk::to_json(rep);
}

json run_correspond(const Options& o, const fk::Config& cfg, json&) {
  const auto s = load(o.c, cfg);
  const double cap = o.cap > 0 ? o.cap : s.sample_cap;
  const auto [fam, contact] = field_at_cap(s, cap);
  const auto set = sample(s, fam, o.c.t, cap, cfg);
  const auto rep = fk::verify_correspondence(fam, pick(set, o.orbit_id), o.k, cfg);
  json j = fk::to_json(rep);
  j["source"] = {{"orbit_id", o.orbit_id}, {"orbit", fk::to_json(pick(set, o.orbit_id))}};
  return j;
}

json run_build_psys(const Options& o, const fk::Config& cfg, json&) {
  if (o.levels < 1) throw fk::Error(fk::ErrorCode::InvalidArgument, "--levels must be >= 1");
  const double mu0 = o.mu0 >= 0 ? o.mu0 : cfg.mu0;
  const int n = cfg.seeds;
  const auto sys = fk::build_perturbation_system(fk::gallery::standard_contact(), o.levels, fk::hopf_height_function(),
                                                 [mu0](int) { return mu0; },
                                                 fk::EmbeddedManifold::sphere3().sample_net(n), cfg, true);
  return fk::to_json(sys);
}

json run_reeb_bound(const Options& o, const fk::Config& cfg, json&) {
  const auto s = load(o.c, cfg);
  if (!s.contact) throw fk::Error(fk::ErrorCode::NotReebBranch, "scenario " + s.id + " has no contact form");
  fk::OrbitBranch br;
  if (!o.branch_file.empty()) {
    const auto j = read_json_file(o.branch_file);
    if (j.contains("results") && j["results"].contains("branch"))
      br = fk::branch_from_json(j["results"]["branch"]);
    else if (j.contains("branch"))
      br = fk::branch_from_json(j["branch"]);
    else
      br = fk::branch_from_json(j);
  } else {
    const auto set = sample(s, s.field, 0.0, s.sample_cap, cfg);
    br = fk::continue_branch(s.field, pick(set, o.orbit_id), 1.0, s.p_max, cfg);
  }
  return fk::to_json(fk::growth_bound_check(br, s.field, *s.contact, cfg, o.k_scale));
}

json run_list(const Options&, const fk::Config&, json&) {
  json out = json::array();
  for (const auto& id : fk::builtin_scenario_ids()) {
    const auto j = fk::builtin_scenario_json(id);
    out.push_back({{"id", id}, {"description", j.value("description", "")}});
  }
  return out;
}

json run_validate(const Options& o, const fk::Config&, json&) {
  const auto s = fk::load_scenario(o.path);
  const auto r = fk::check_validity(s);
  json j = {{"id", s.id},
            {"schema_ok", true},
            {"min_field_norm", r.min_norm},
            {"witness", {{"x", fk::vec_json(r.witness_x)}, {"t", r.witness_t}}},
            {"tangency_defect", r.tangency_defect},
            {"ok", r.ok}};
  j["reeb_defect"] = r.reeb_defect ? json(*r.reeb_defect) : json(nullptr);
  if (!r.ok) throw fk::Error(fk::ErrorCode::InvalidArgument, "scenario failed its validity checks", j);
  return j;
}

bool usage_error(fk::ErrorCode c) {
  return c == fk::ErrorCode::UnknownBuiltin || c == fk::ErrorCode::ParseError || c == fk::ErrorCode::SchemaViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic-orbit counting toolkit: orbits, indices, continuation, sky detection."};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool scenario = true) {
    if (scenario) sub->add_option("--scenario", o.c.scenario, "built-in id or scenario file")->required();
    sub->add_option("--config", o.c.config_path, "JSON file overriding numeric defaults");
    sub->add_option("--set", o.c.sets, "override one config key (key=value)");
    sub->add_option("--out", o.c.out, "write the report here instead of stdout");
    sub->add_flag("--no-meta", o.c.no_meta, "omit timings and thread count");
    sub->add_option("--threads", o.c.threads, "worker threads (FULLERKIT_THREADS, else all cores)");
    sub->add_option("--seeds", o.c.seeds, "number of seed points");
  };

  auto* find = app.add_subcommand("find-orbits", "sample periodic orbits below a period cap");
  common(find);
  find->add_option("--cap", o.cap);
  find->add_option("--t", o.c.t);
  find->add_option("--csv-dir", o.csv_dir, "dense trajectory per orbit");

  auto* index = app.add_subcommand("index", "fixed-point and Conley-Zehnder indices below a cap");
  common(index);
  index->add_option("--cap", o.cap);
  index->add_option("--t", o.c.t);

  auto* classify = app.add_subcommand("classify-type", "finite / infinite type from capped sums");
  common(classify);
  classify->add_option("--caps", o.caps);

  auto* cont = app.add_subcommand("continue", "continue one orbit along the homotopy");
  common(cont);
  cont->add_option("--orbit-id", o.orbit_id);
  cont->add_option("--t-target", o.t_target);
  cont->add_option("--pmax", o.pmax);
  cont->add_option("--t", o.c.t);
  cont->add_option("--csv", o.csv, "branch nodes as CSV");

  auto* sky = app.add_subcommand("detect-sky", "continue every sampled orbit and look for unbounded periods");
  common(sky);
  sky->add_option("--pmax", o.pmax);
  sky->add_option("--csv-dir", o.csv_dir, "one CSV per branch");

  auto* corr = app.add_subcommand("correspond", "lift an orbit to the cyclic configuration space");
  common(corr);
  corr->add_option("--k", o.k);
  corr->add_option("--orbit-id", o.orbit_id);
  corr->add_option("--cap", o.cap);
  corr->add_option("--t", o.c.t);

  auto* psys = app.add_subcommand("build-psys", "build and validate Hopf perturbation levels");
  common(psys, false);
  psys->add_option("--levels", o.levels);
  psys->add_option("--mu0", o.mu0);

  auto* bound = app.add_subcommand("reeb-bound", "period growth bound along a Reeb branch");
  common(bound);
  bound->add_option("--branch-file", o.branch_file, "branch JSON (a continue report works)");
  bound->add_option("--orbit-id", o.orbit_id);
  bound->add_option("--k-scale", o.k_scale);

  auto* list = app.add_subcommand("list-scenarios", "list built-in scenarios");
  common(list, false);

  auto* validate = app.add_subcommand("validate-scenario", "schema and validity checks");
  common(validate, false);
  validate->add_option("path", o.path, "scenario file or built-in id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  json report = {{"command", cmd}, {"scenario", o.c.scenario.empty() ? json(nullptr) : json(o.c.scenario)}};
  json warnings = json::array();
  int rc = 0;
  const auto t0 = std::chrono::steady_clock::now();
  fk::Config cfg;
  try {
    bool seeds_given = false;
    cfg = build_config(o.c, seeds_given);
    cfg.seeds = cmd == "build-psys" && o.c.seeds <= 0 && !seeds_given ? 16 : effective_seeds(o.c, cfg, seeds_given);
    json results;
    if (cmd == "find-orbits") results = run_find_orbits(o, cfg, warnings);
    else if (cmd == "index") results = run_index(o, cfg, warnings);
    else if (cmd == "classify-type") results = run_classify(o, cfg, warnings);
    else if (cmd == "continue") results = run_continue(o, cfg, warnings);
    else if (cmd == "detect-sky") results = run_detect_sky(o, cfg, warnings);
    else if (cmd == "correspond") results = run_correspond(o, cfg, warnings);
    else if (cmd == "build-psys") results = run_build_psys(o, cfg, warnings);
    else if (cmd == "reeb-bound") results = run_reeb_bound(o, cfg, warnings);
    else if (cmd == "list-scenarios") results = run_list(o, cfg, warnings);
    else results = run_validate(o, cfg, warnings);
    report["results"] = std::move(results);
  } catch (const fk::Error& e) {
    rc = usage_error(e.code()) ? kExitUsage : kExitDomain;
    report["error"] = {{"code", std::string(fk::to_string(e.code()))}, {"message", e.what()}, {"details", e.details()}};
  } catch (const std::exception& e) {
    rc = kExitDomain;
    report["error"] = {{"code", "Internal"}, {"message", e.what()}};
  }
  report["config"] = fk::to_json(cfg);
  report["config"].erase("threads");
  report["warnings"] = warnings;
  if (!o.c.no_meta) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report["meta"] = {{"seconds", secs}, {"threads", cfg.threads}};
  }

  const std::string text = report.dump(2) + "\n";
  if (o.c.out.empty()) {
    std::cout << text;
  } else {
    try {
      write_text(o.c.out, text);
    } catch (const fk::Error& e) {
      std::cerr << e.what() << '\n';
      return kExitUsage;
    }
  }
  if (rc != 0) std::cerr << cmd << ": " << report["error"]["message"].get<std::string>() << '\n';
  return rc;
}
