#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

using nlohmann::json;

struct Run {
  int code = -1;
  std::string out;
  json report() const { return json::parse(out); }
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" FK_CLI_PATH "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Cli, UnknownScenarioIsUsageError) {
  const auto r = run("find-orbits --scenario no-such-thing");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.report()["error"]["code"], "UnknownBuiltin");
}

TEST(Cli, BadFlagIsUsageError) {
  EXPECT_EQ(run("find-orbits --scenario hopf-s3 --frobnicate").code, 3);
  EXPECT_EQ(run("no-such-command").code, 3);
  EXPECT_EQ(run("").code, 3);
  EXPECT_EQ(run("find-orbits").code, 3);
}

TEST(Cli, BadConfigKeyIsUsageError) {
  const auto r = run("find-orbits --scenario hopf-s3 --set no_such_key=1");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.report()["error"]["code"], "SchemaViolation");
}

TEST(Cli, DomainErrorExitsTwo) {
  const auto r = run("correspond --scenario hopf-perturbed --k 4 --no-meta");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.report()["error"]["code"], "InvalidArgument");
}

TEST(Cli, ListScenarios) {
  const auto r = run("list-scenarios");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.report()["results"].size(), 6u);
}

TEST(Cli, FindOrbitsOnHopf) {
  const auto r = run("find-orbits --scenario hopf-s3 --no-meta");
  ASSERT_EQ(r.code, 0);
  const auto j = r.report();
  EXPECT_FALSE(j["results"]["orbits"].empty());
  for (const auto& o : j["results"]["orbits"]) EXPECT_NEAR(o["period"].get<double>(), 6.283185307179586, 1e-8);
  EXPECT_TRUE(j["results"]["morse_bott_suspect"].get<bool>());
  EXPECT_FALSE(j["warnings"].empty());
  EXPECT_FALSE(j.contains("meta"));
}

TEST(Cli, DetectSkyFlagsBlueSky) {
  const auto r = run("detect-sky --scenario blue-sky-torus --pmax 1000");
  ASSERT_EQ(r.code, 0);
  const auto j = r.report();
  EXPECT_EQ(j["results"]["verdict"], "SkyFlagged");
  EXPECT_EQ(j["results"]["sky_witnesses"].size(), 1u);
  EXPECT_TRUE(j.contains("meta"));
}

TEST(Cli, IndexSignsEqualOnPerturbedHopf) {
  const auto r = run("index --scenario hopf-perturbed --cap 7 --no-meta");
  ASSERT_EQ(r.code, 0);
  const auto reps = r.report()["results"]["reports"];
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_EQ(reps[0]["fp_index"], reps[1]["fp_index"]);
  EXPECT_FALSE(reps[0]["cz_index"].is_null());
}

TEST(Cli, NoMetaOutputIsReproducible) {
  const auto a = run("find-orbits --scenario torus-linear --no-meta");
  const auto b = run("find-orbits --scenario torus-linear --no-meta");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, ThreadCountDoesNotChangeResults) {
  const auto a = run("index --scenario hopf-perturbed --cap 7 --no-meta --threads 1");
  const auto b = run("index --scenario hopf-perturbed --cap 7 --no-meta --threads 2");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, EnvironmentSetsThreads) {
  const auto r = run("list-scenarios", "FULLERKIT_THREADS=3");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.report()["meta"]["threads"], 3);
  EXPECT_EQ(run("list-scenarios --threads 2", "FULLERKIT_THREADS=3").report()["meta"]["threads"], 2);
}

TEST(Cli, ConfigAndSetAreEchoed) {
  const auto path = tmp("fullerkit_cli_config.json");
  {
    std::ofstream f(path);
    f << R"({"newton_tol": 1e-11, "dedup_rel": 0.002})";
  }
  const auto r = run("list-scenarios --no-meta --config '" + path.string() + "' --set dedup_rel=0.003");
  ASSERT_EQ(r.code, 0);
  const auto cfg = r.report()["config"];
  EXPECT_EQ(cfg["newton_tol"].get<double>(), 1e-11);
  EXPECT_EQ(cfg["dedup_rel"].get<double>(), 0.003);
  EXPECT_FALSE(cfg.contains("threads"));
  std::filesystem::remove(path);
}

TEST(Cli, SeedCountIsEchoed) {
  EXPECT_EQ(run("find-orbits --scenario hopf-s3 --no-meta").report()["config"]["seeds"], 16);
  const auto r = run("find-orbits --scenario hopf-s3 --no-meta --seeds 4");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.report()["config"]["seeds"], 4);
  EXPECT_LE(r.report()["results"]["orbits"].size(), 4u);
  EXPECT_EQ(run("list-scenarios --no-meta").report()["config"]["seeds"], 256);
}

TEST(Cli, EchoedConfigReproducesRun) {
  const auto first = run("find-orbits --scenario hopf-s3 --no-meta --seeds 5 --set dedup_rel=0.0002");
  ASSERT_EQ(first.code, 0);
  const auto path = tmp("fullerkit_cli_echo.json");
  {
    std::ofstream f(path);
    f << first.report()["config"].dump();
  }
  const auto again = run("find-orbits --scenario hopf-s3 --no-meta --config '" + path.string() + "'");
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(again.out, first.out);
  std::filesystem::remove(path);
}

TEST(Cli, OutWritesFile) {
  const auto path = tmp("fullerkit_cli_out.json");
  const auto r = run("list-scenarios --no-meta --out '" + path.string() + "'");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(path);
  EXPECT_EQ(json::parse(f)["command"], "list-scenarios");
  std::filesystem::remove(path);
}

TEST(Cli, ValidateScenario) {
  const auto ok = run("validate-scenario " FK_SCENARIO_DIR "/hopf-s3.json");
  ASSERT_EQ(ok.code, 0);
  EXPECT_TRUE(ok.report()["results"]["ok"].get<bool>());

  const auto path = tmp("fullerkit_cli_bad.json");
  {
    std::ofstream f(path);
    f << R"({"v": 1, "id": "x", "family": {"builtin": "hopf"}, "expected": [], "oops": 1})";
  }
  const auto bad = run("validate-scenario '" + path.string() + "'");
  EXPECT_EQ(bad.code, 3);
  EXPECT_EQ(bad.report()["error"]["code"], "SchemaViolation");
  std::filesystem::remove(path);
}

TEST(Cli, ContinueThenReebBound) {
  const auto branch = tmp("fullerkit_cli_branch.json");
  const auto csv = tmp("fullerkit_cli_branch.csv");
  const auto c = run("continue --scenario hopf-rescale --orbit-id 0 --t-target 1 --no-meta --out '" + branch.string() +
                     "' --csv '" + csv.string() + "'");
  ASSERT_EQ(c.code, 0);
  {
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "node_index,t,p,x1,x2,x3,x4");
  }
  const auto r = run("reeb-bound --scenario hopf-rescale --no-meta --branch-file '" + branch.string() + "'");
  ASSERT_EQ(r.code, 0);
  const auto g = r.report()["results"];
  EXPECT_NEAR(g["K"].get<double>() / 0.11, 1.0, 0.01);
  EXPECT_TRUE(g["pass"].get<bool>());

  const auto bad = run("reeb-bound --scenario hopf-rescale --no-meta --k-scale 0.1 --branch-file '" + branch.string() + "'");
  ASSERT_EQ(bad.code, 0);
  EXPECT_FALSE(bad.report()["results"]["pass"].get<bool>());
  std::filesystem::remove(branch);
  std::filesystem::remove(csv);
}

TEST(Cli, ClassifyPerturbedHopf) {
  const auto r = run("classify-type --scenario hopf-perturbed --caps 7 13 19 --no-meta");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.report()["results"]["kind"], "PlusInfinity");
}

TEST(Cli, CorrespondLiftsOrbit) {
  const auto r = run("correspond --scenario hopf-perturbed --k 3 --orbit-id 0 --cap 7 --no-meta");
  ASSERT_EQ(r.code, 0);
  const auto j = r.report()["results"];
  EXPECT_TRUE(j["index_match"].get<bool>());
  EXPECT_NEAR(j["period_ratio"].get<double>(), 1.0, 1e-8);
  EXPECT_EQ(j["mu"], 1);
}

TEST(Cli, BuildPsysReportsLevels) {
  const auto r = run("build-psys --levels 1 --no-meta");
  ASSERT_EQ(r.code, 0);
  const auto lv = r.report()["results"]["levels"];
  ASSERT_EQ(lv.size(), 1u);
  EXPECT_TRUE(lv[0]["validated"].get<bool>());
}
