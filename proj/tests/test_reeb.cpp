#include <cmath>
#include <numbers>

#include "common.hpp"

using namespace fktest;
constexpr double kPi = std::numbers::pi;

namespace {

const PerturbationSystem& validated_system() {
  static const PerturbationSystem sys = build_perturbation_system(
      gallery::standard_contact(), 3, hopf_height_function(), [](int) { return 0.005; },
      EmbeddedManifold::sphere3().sample_net(16));
  return sys;
}

const OrbitBranch& rescale_branch() {
  static const OrbitBranch b = [] {
    const auto& s = scenario("hopf-rescale");
    const auto set = sample_orbit_space(s.field, 0.0, s.sample_cap, s.seed_points(), Config{});
    return continue_branch(s.field, set.orbits.front(), 1.0, s.p_max);
  }();
  return b;
}

}  // namespace

TEST(Reeb, StandardFormGivesHopf) {
  const auto c = gallery::standard_contact();
  const auto h = gallery::hopf_field();
  for (const auto& x : c.manifold.sample_net(300))
    for (double t : {0.0, 0.7}) EXPECT_LE((reeb_vector(c, x, t) - h.eval(x, t)).norm(), 1e-8);
}

TEST(Reeb, ConstantRescalingDividesField) {
  const auto c = gallery::hopf_rescale_contact(0.1);
  const auto h = gallery::hopf_field();
  for (const auto& x : c.manifold.sample_net(200))
    for (double t : {0.0, 0.5, 1.0}) EXPECT_LE((reeb_vector(c, x, t) - h.eval(x, t) / (1 + 0.1 * t)).norm(), 1e-8);
}

TEST(Reeb, ZeroMuIsBaseField) {
  const auto sys = build_perturbation_system(gallery::standard_contact(), 1, hopf_height_function(),
                                             [](int) { return 0.0; }, {}, {}, false);
  const auto f = sys.field(0);
  const auto base = reeb_family(gallery::standard_contact());
  for (const auto& x : f.manifold.sample_net(100)) EXPECT_EQ(f.eval(x, 0.3), base.eval(x, 0.3));
}

TEST(Reeb, DefectOnEveryContactBuiltin) {
  for (const auto& id : scenario_ids()) {
    const auto& s = scenario(id);
    if (!s.contact) continue;
    for (const auto& [x, t] : space_time_net(s.field.manifold, 2000, 5)) {
      const auto d = reeb_defect(*s.contact, x, s.field.eval(x, t), t);
      EXPECT_LE(d.normalization, 1e-8) << id;
      EXPECT_LE(d.kernel, 1e-8) << id;
    }
  }
}

TEST(Reeb, FactorPositive) {
  for (const auto& id : scenario_ids()) {
    const auto& s = scenario(id);
    if (!s.contact) continue;
    for (const auto& [x, t] : space_time_net(s.field.manifold, 2000, 5)) EXPECT_GT(s.contact->factor(x, t), 0.0) << id;
  }
}

TEST(Action, HopfOrbitIsTwoPi) {
  const auto h = gallery::hopf_field();
  const auto o = find_orbit(h, v4(0.6, 0, 0.8, 0), 6.0, 0.0);
  EXPECT_NEAR(action(h, o, gallery::standard_contact()), 2 * kPi, 1e-7);
}

TEST(Action, EqualsPeriodOnReebOrbitsAndDoubles) {
  const auto& s = scenario("hopf-perturbed");
  for (const auto& r : reference_orbits()) {
    if (r.fam.manifold.kind() != EmbeddedManifold::Kind::Sphere) continue;
    const auto c = s.psys->contact(0);
    const double a = action(r.fam, r.orbit, c);
    EXPECT_LE(std::abs(a - r.orbit.period), 1e-7 * r.orbit.period) << r.name;
    auto twice = r.orbit;
    twice.period *= 2;
    EXPECT_NEAR(action(r.fam, twice, c), 2 * a, 1e-7 * twice.period);
  }
}

TEST(PerturbationSystem, ThreeLevelsValidate) {
  const auto& sys = validated_system();
  ASSERT_EQ(sys.levels.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(sys.levels[i].validated);
    EXPECT_FALSE(sys.levels[i].degenerate);
    EXPECT_EQ(sys.levels[i].orbit_count, 2 * static_cast<int>(i + 1));
    EXPECT_GT(sys.levels[i].min_abs_det, 1e-6);
    EXPECT_NEAR(sys.levels[i].E, 2 * kPi * (i + 1.5), 1e-12);
    if (i > 0) EXPECT_LE(sys.levels[i].mu, sys.levels[i - 1].mu);
  }
}

TEST(PerturbationSystem, TwoNewOrbitsPerLevel) {
  const auto& sys = validated_system();
  const auto seeds = EmbeddedManifold::sphere3().sample_net(16);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto set = sample_orbit_space(sys.field(i), 0.0, sys.levels[i].E, seeds, Config{});
    const double lo = i == 0 ? 0.0 : sys.levels[i - 1].E;
    int fresh = 0;
    for (const auto& o : set.orbits) fresh += o.period > lo;
    EXPECT_EQ(fresh, 2) << "level " << i + 1;
  }
}

TEST(PerturbationSystem, ZeroMuIsFlaggedDegenerate) {
  const auto sys = build_perturbation_system(gallery::standard_contact(), 1, hopf_height_function(),
                                             [](int) { return 0.0; }, EmbeddedManifold::sphere3().sample_net(8));
  EXPECT_TRUE(sys.levels[0].degenerate);
  EXPECT_FALSE(sys.levels[0].validated);
}

TEST(PerturbationSystem, OversizedMuGivesUp) {
  Config cfg;
  cfg.mu_retries = 0;
  try {
    build_perturbation_system(gallery::standard_contact(), 1, hopf_height_function(), [](int) { return 0.9; },
                              EmbeddedManifold::sphere3().sample_net(8), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MuTooLarge);
  }
}

TEST(PerturbationSystem, IncreasingScheduleRejected) {
  EXPECT_THROW(build_perturbation_system(gallery::standard_contact(), 2, hopf_height_function(),
                                         [](int n) { return 0.001 * n; }, {}, {}, false),
               Error);
}

TEST(PerturbationSystem, LevelsAgreeBelowFirstCap) {
  const auto& sys = validated_system();
  const auto seeds = EmbeddedManifold::sphere3().sample_net(16);
  const Config cfg;
  const double E1 = sys.levels[0].E;
  const auto a = sample_orbit_space(sys.field(0), 0.0, E1, seeds, cfg);
  const auto b = sample_orbit_space(sys.field(1), 0.0, E1, seeds, cfg);
  ASSERT_EQ(a.orbits.size(), b.orbits.size());
  for (std::size_t i = 0; i < a.orbits.size(); ++i) {
    EXPECT_NEAR(a.orbits[i].period, b.orbits[i].period, 1e-6 * a.orbits[i].period);
    EXPECT_EQ(a.orbits[i].multiplicity, b.orbits[i].multiplicity);
    EXPECT_EQ(fixed_point_index(sys.field(0), a.orbits[i]).fp_index, fixed_point_index(sys.field(1), b.orbits[i]).fp_index);
  }
}

TEST(PerturbationSystem, StructureHomotopyIsThroughReeb) {
  const auto& sys = validated_system();
  const auto h = sys.structure_homotopy(1);
  const auto fam = reeb_family(h);
  for (const auto& [x, t] : space_time_net(h.manifold, 500, 5)) {
    const auto d = reeb_defect(h, x, fam.eval(x, t), t);
    EXPECT_LE(std::max(d.normalization, d.kernel), 1e-8);
  }
  const auto end = reeb_family(gallery::standard_contact());
  for (const auto& x : h.manifold.sample_net(50)) EXPECT_LE((fam.eval(x, 1.0) - end.eval(x, 1.0)).norm(), 1e-12);
}

TEST(GrowthBound, RescaleReproducesClosedForm) {
  const auto& s = scenario("hopf-rescale");
  const auto r = growth_bound_check(rescale_branch(), s.field, *s.contact);
  EXPECT_NEAR(r.K / 0.11, 1.0, 0.01);
  EXPECT_NEAR(r.L, 1.0, 1e-12);
  EXPECT_NEAR(r.bound / std::exp(0.11), 1.0, 0.01);
  EXPECT_NEAR(r.measured, 0.1 / 1.1, 1e-6);
  EXPECT_LT(r.ratio, 1.0);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.K, 0.0);
  EXPECT_GE(r.measured, 0.0);
}

TEST(GrowthBound, CorruptedKFails) {
  const auto& s = scenario("hopf-rescale");
  const auto r = growth_bound_check(rescale_branch(), s.field, *s.contact, Config{}, 0.1);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.pairwise_ok);
}

TEST(GrowthBound, TimeIndependentFormIsFlat) {
  const auto& s = scenario("hopf-perturbed");
  const auto fam = s.psys->field(0);
  const auto b = continue_branch(fam, reference_orbits().front().orbit, 1.0, 100.0);
  const auto r = growth_bound_check(b, fam, s.psys->contact(0));
  EXPECT_NEAR(r.measured, 0.0, 1e-9);
  EXPECT_TRUE(r.pass);
}

TEST(GrowthBound, NonReebBranchRejected) {
  const auto fam = gallery::hopf_c0_near(0.01);
  const auto o = find_orbit(fam, v4(1, 0, 0, 0), 6.2, 0.0);
  OrbitBranch b;
  b.nodes.push_back({o.base, o.period, 0.0, std::nullopt, 1});
  try {
    growth_bound_check(b, fam, gallery::standard_contact());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotReebBranch);
  }
}

TEST(GrowthBound, HoldsOnEveryRescaleBranch) {
  const auto& s = scenario("hopf-rescale");
  const auto r = detect_sky(s.field, s.seed_points(), s.sky_options());
  ASSERT_FALSE(r.branches.empty());
  for (const auto& b : r.branches) EXPECT_TRUE(growth_bound_check(b, s.field, *s.contact).pass);
}
