#include <numbers>

#include "common.hpp"

using namespace fktest;

namespace {

double tuple_hausdorff(const EmbeddedManifold& m, const CyclicTuple& a, const CyclicTuple& b) {
  double h = 0.0;
  for (const auto& x : a.points) {
    double best = 1e300;
    for (const auto& y : b.points) best = std::min(best, m.distance(x, y));
    h = std::max(h, best);
  }
  return h;
}

}  // namespace

TEST(CyclicTuple, CanonicalIsIdempotentAndMinimal) {
  const auto m = EmbeddedManifold::sphere3();
  const auto pts = m.sample_net(5);
  for (int r = 0; r < 5; ++r) {
    std::vector<Vec> rot;
    for (int j = 0; j < 5; ++j) rot.push_back(pts[static_cast<std::size_t>((j + r) % 5)]);
    const auto c = canonical(CyclicTuple{rot, 5});
    const auto cc = canonical(c);
    for (int j = 0; j < 5; ++j) EXPECT_EQ(c.points[static_cast<std::size_t>(j)], cc.points[static_cast<std::size_t>(j)]);
    for (int s = 1; s < 5; ++s) EXPECT_GE(detail::compare_rotations(c.points, s, 0, 1e-9), 0);
    const auto c0 = canonical(CyclicTuple{pts, 5});
    for (int j = 0; j < 5; ++j) EXPECT_EQ(c.points[static_cast<std::size_t>(j)], c0.points[static_cast<std::size_t>(j)]);
  }
}

TEST(CyclicTuple, CoincidentPointsRejected) {
  const auto m = EmbeddedManifold::sphere3();
  const auto pts = m.sample_net(2);
  EXPECT_THROW(make_cyclic_tuple(m, {pts[0], pts[1], pts[0]}, 1e-6), Error);
}

TEST(CyclicTuple, LiftFieldIsComponentwiseAndEquivariant) {
  const auto h = gallery::hopf_field();
  const auto pts = h.manifold.sample_net(3);
  const CyclicTuple t{pts, 3};
  const auto v = lift_field(h, t, 0.0);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(v[static_cast<std::size_t>(j)], h.eval(pts[static_cast<std::size_t>(j)], 0.0));
  const CyclicTuple shifted{{pts[1], pts[2], pts[0]}, 3};
  const auto w = lift_field(h, shifted, 0.0);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(w[static_cast<std::size_t>(j)], v[static_cast<std::size_t>((j + 1) % 3)]);
}

TEST(FullerMap, PerturbedHopfSimpleOrbit) {
  const auto& r = reference_orbits().front();
  const auto lift = fuller_map(r.fam, r.orbit, 3);
  EXPECT_EQ(lift.mu, 1);
  EXPECT_EQ(lift.tuple.k, 3);
  EXPECT_NEAR(lift.period, r.orbit.period / 3, 1e-10 * r.orbit.period);
  for (int s = 1; s < 3; ++s) EXPECT_GE(detail::compare_rotations(lift.tuple.points, s, 0, 1e-9), 0);
}

TEST(FullerMap, MuIsOneEverywhere) {
  for (const auto& r : reference_orbits())
    for (int k : {2, 3, 5}) EXPECT_EQ(fuller_map(r.fam, r.orbit, k).mu, 1) << r.name << " k=" << k;
}

TEST(FullerMap, PreconditionsOnK) {
  const auto& r = reference_orbits().front();
  EXPECT_THROW(fuller_map(r.fam, r.orbit, 1), Error);
  EXPECT_THROW(fuller_map(r.fam, r.orbit, 4), Error);
  const auto cover = find_orbit(r.fam, r.orbit.base, 2 * r.orbit.period, 0.0);
  ASSERT_EQ(cover.multiplicity, 2);
  try {
    fuller_map(r.fam, cover, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MultiplicityTooHigh);
  }
}

TEST(FullerMap, DoubleCoverKeepsMultiplicity) {
  const auto& r = reference_orbits().front();
  const auto cover = find_orbit(r.fam, r.orbit.base, 2 * r.orbit.period, 0.0);
  const auto lift = fuller_map(r.fam, cover, 3);
  EXPECT_EQ(lift.multiplicity, 2);
  EXPECT_EQ(lift.mu, 1);
}

TEST(FullerMap, IndependentOfBasePoint) {
  for (const auto& r : reference_orbits()) {
    const auto a = fuller_map(r.fam, r.orbit, 3);
    PeriodicOrbit moved = r.orbit;
    moved.base = r.fam.manifold.wrap(r.fam.manifold.retract(flow_map(r.fam, r.orbit.base, 0.37 * r.orbit.period, 0.0).endpoint));
    const auto b = fuller_map(r.fam, moved, 3);
    EXPECT_NEAR(a.period, b.period, 1e-8) << r.name;
    EXPECT_LE(tuple_hausdorff(r.fam.manifold, a.tuple, b.tuple), 1e-6) << r.name;
    for (int j = 0; j < 3; ++j)
      EXPECT_LE(r.fam.manifold.distance(a.tuple.points[static_cast<std::size_t>(j)], b.tuple.points[static_cast<std::size_t>(j)]),
                1e-6)
          << r.name;
  }
}

TEST(FullerMap, FlowingTupleShiftsByOne) {
  const Config cfg;
  for (const auto& r : reference_orbits()) {
    const auto lift = fuller_map(r.fam, r.orbit, 3);
    std::vector<Vec> moved;
    for (const auto& x : lift.tuple.points) moved.push_back(flow_map(r.fam, x, lift.period, 0.0).endpoint);
    const auto s = detail::detect_shift(r.fam.manifold, lift.tuple.points, moved, 1e-7);
    ASSERT_TRUE(s.has_value()) << r.name;
    EXPECT_EQ(*s, 1);
  }
}

TEST(Correspondence, IndexPeriodMultiplicityPreserved) {
  for (const auto& r : reference_orbits()) {
    for (int k : {2, 3}) {
      const auto rep = verify_correspondence(r.fam, r.orbit, k);
      EXPECT_TRUE(rep.index_match) << r.name << " k=" << k;
      EXPECT_NEAR(rep.period_ratio, 1.0, 1e-8);
      EXPECT_TRUE(rep.mult_match);
      EXPECT_EQ(rep.mu, 1);
    }
  }
}

TEST(Correspondence, HyperbolicSaddleKeepsNegativeIndex) {
  for (const auto& r : reference_orbits())
    if (r.name == "blue-sky-saddle") {
      const auto rep = verify_correspondence(r.fam, r.orbit, 2);
      EXPECT_EQ(rep.original_index, -1);
      EXPECT_EQ(rep.lifted_index, -1);
    }
}
