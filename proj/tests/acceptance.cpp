// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fullerkit/fullerkit.hpp"

using namespace fullerkit;

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects failed conditions; the criterion passes when none failed.
struct Check {
  std::vector<std::string> failed;
  std::ostringstream info;
  void require(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
};

int failures = 0;

void criterion(int n, const std::string& title, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const Error& e) {
    c.failed.push_back("error " + std::string(to_string(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    c.failed.push_back(std::string("exception: ") + e.what());
  }
  const bool ok = c.failed.empty();
  failures += !ok;
  std::printf("criterion %2d %s  %s  (%.1f s)", n, ok ? "PASS" : "FAIL", title.c_str(), since(t0));
  const auto extra = c.info.str();
  if (!extra.empty()) std::printf("  [%s]", extra.c_str());
  for (const auto& f : c.failed) std::printf("\n    failed: %s", f.c_str());
  std::printf("\n");
  std::fflush(stdout);
}

struct Named {
  std::string name;
  VectorFieldFamily fam;
  PeriodicOrbit orbit;
};

std::vector<Named> reference_orbits(const Scenario& hp) {
  std::vector<Named> v;
  const auto f1 = hp.psys->field(0);
  const auto set = sample_orbit_space(f1, 0.0, 7.0, hp.seed_points());
  for (std::size_t i = 0; i < set.orbits.size(); ++i) v.push_back({"perturbed#" + std::to_string(i), f1, set.orbits[i]});
  const auto bs = gallery::blue_sky_torus();
  v.push_back({"sink", bs, find_orbit(bs, gallery::blue_sky_sink_point(), 6.0, 0.0)});
  v.push_back({"saddle", bs, find_orbit(bs, gallery::blue_sky_saddle_point(), 6.0, 0.0)});
  return v;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const auto hopf = load_scenario("hopf-s3");
  const auto hp = load_scenario("hopf-perturbed");
  const auto rescale = load_scenario("hopf-rescale");
  const auto blue = load_scenario("blue-sky-torus");
  const auto near = load_scenario("hopf-c0-near");

  criterion(1, "Hopf orbits have period 2 pi and identity monodromy", [&](Check& c) {
    const auto t0 = Clock::now();
    const auto set = sample_orbit_space(hopf.field, 0.0, 7.0, EmbeddedManifold::sphere3().sample_net(16));
    double worst_p = 0.0, worst_m = 0.0;
    for (const auto& o : set.orbits) {
      worst_p = std::max(worst_p, std::abs(o.period - 2 * kPi));
      const Mat V = monodromy(hopf.field, o).matrix;
      worst_m = std::max(worst_m, (V - Mat::Identity(V.rows(), V.cols())).cwiseAbs().maxCoeff());
    }
    const double secs = since(t0);
    c.info << set.orbits.size() << " orbits, |p - 2pi| " << worst_p << ", |M - I| " << worst_m << ", " << secs << " s";
    c.require(!set.orbits.empty(), "no orbit found");
    c.require(worst_p <= 1e-8, "period off by more than 1e-8");
    c.require(worst_m <= 1e-6, "monodromy off identity by more than 1e-6");
    c.require(set.morse_bott_suspect, "Morse-Bott flag not raised");
    c.require(secs < 5.0, "slower than 5 s");
  });

  criterion(2, "fixed-point index equals (-1)^(CZ - 1) below 19", [&](Check& c) {
    int checked = 0;
    const double cap = hp.caps.back();
    const auto lvl = hp.psys->level_for_cap(cap);
    const auto fam = hp.psys->field(lvl);
    const auto ctc = hp.psys->contact(lvl);
    for (const auto& o : sample_orbit_space(fam, 0.0, cap, hp.seed_points()).orbits) {
      const auto rep = index_with_cz(fam, o, ctc);
      c.require(rep.nondegenerate && rep.cz_index.has_value(), "degenerate orbit at p = " + std::to_string(o.period));
      if (!rep.cz_index) continue;
      const int expected = ((*rep.cz_index - 1) % 2 == 0) ? 1 : -1;
      c.require(rep.fp_index == expected, "parity mismatch at p = " + std::to_string(o.period));
      ++checked;
    }
    c.info << checked << " orbits";
    c.require(checked >= 6, "fewer than 6 orbits checked");
  });

  criterion(3, "perturbed Hopf is +infinity type; mixed-sign control is indeterminate", [&](Check& c) {
    const auto v = classify_definite_type(hp.provider(), hp.caps);
    c.require(v.kind == FullerKind::PlusInfinity, std::string("kind ") + to_string(v.kind));
    for (std::size_t i = 1; i < v.levels.size(); ++i)
      c.require(v.levels[i - 1].partial_sum < v.levels[i].partial_sum, "partial sums not strictly increasing");
    c.info << "sums";
    for (const auto& l : v.levels) c.info << ' ' << l.partial_sum.num() << '/' << l.partial_sum.den();

    auto seeds = blue.seed_points();
    seeds.push_back(gallery::blue_sky_sink_point());
    seeds.push_back(gallery::blue_sky_saddle_point());
    bool indeterminate = false;
    try {
      classify_definite_type(provider_for(blue.field, seeds, 0.0), {7, 13, 19});
    } catch (const Error& e) {
      indeterminate = e.code() == ErrorCode::Indeterminate;
    }
    c.require(indeterminate, "mixed-sign control was classified");
  });

  criterion(4, "double cover weighs 1/2; sums are order independent", [&](Check& c) {
    const auto simple = sample_orbit_space(hp.psys->field(0), 0.0, 7.0, hp.seed_points()).orbits.at(0);
    const auto fam = hp.psys->field(1);
    const auto cover = find_orbit(fam, simple.base, 2 * simple.period, 0.0);
    c.require(cover.multiplicity == 2, "cover multiplicity " + std::to_string(cover.multiplicity));
    const auto rep = fixed_point_index(fam, cover);
    std::vector<IndexReport> one{rep};
    const Rational w = fuller_index_local(std::span<const IndexReport>(one));
    c.require(w == Rational(rep.fp_index, 2), "weight is not i/2");
    c.info << "weight " << w.num() << '/' << w.den();

    const auto fam3 = hp.psys->field(2);
    std::vector<IndexReport> reps;
    for (const auto& o : sample_orbit_space(fam3, 0.0, 19.0, hp.seed_points()).orbits)
      reps.push_back(fixed_point_index(fam3, o));
    c.require(reps.size() >= 6, "fewer than 6 orbits below 19");
    std::vector<std::size_t> perm(reps.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    const Rational ref = fuller_index_local(std::span<const IndexReport>(reps));
    int perms = 0;
    do {
      std::vector<IndexReport> p;
      for (auto i : perm) p.push_back(reps[i]);
      const Rational s = fuller_index_local(std::span<const IndexReport>(p));
      c.require(s.num() == ref.num() && s.den() == ref.den(), "permutation changed the sum");
      ++perms;
    } while (std::next_permutation(perm.begin(), perm.end()));
    c.info << ", " << perms << " permutations, sum " << ref.num() << '/' << ref.den();
  });

  criterion(5, "k = 3 lift keeps index, period, shift and multiplicity", [&](Check& c) {
    int n = 0;
    for (const auto& r : reference_orbits(hp)) {
      const auto rep = verify_correspondence(r.fam, r.orbit, 3);
      c.require(rep.index_match, r.name + ": index mismatch");
      c.require(std::abs(rep.period_ratio - 1.0) <= 1e-8, r.name + ": period ratio off");
      c.require(rep.mu == 1, r.name + ": shift " + std::to_string(rep.mu));
      c.require(rep.mult_match, r.name + ": multiplicity mismatch");
      ++n;
    }
    c.info << n << " orbits";
    c.require(n >= 3, "fewer than 3 orbits");
  });

  criterion(6, "blue sky flagged with a 2 pi / (1 - t) witness; rescaled Hopf admissible", [&](Check& c) {
    auto t0 = Clock::now();
    auto opt = blue.sky_options();
    opt.p_max = 1000.0;
    const auto r = detect_sky(blue.field, blue.seed_points(), opt);
    const double t_blue = since(t0);
    c.require(r.verdict == Verdict::SkyFlagged, std::string("blue-sky verdict ") + to_string(r.verdict));
    c.require(!r.sky_witnesses.empty(), "no witness");
    double worst = 0.0;
    for (int w : r.sky_witnesses) {
      const auto& b = r.branches.at(static_cast<std::size_t>(w));
      const double p0 = b.nodes.front().p;
      for (const auto& nd : b.nodes) worst = std::max(worst, std::abs(nd.p * (1.0 - nd.t) / p0 - 1.0));
      c.require(b.nodes.back().p >= 1000.0, "witness stops below P_max");
    }
    c.require(worst <= 0.02, "witness deviates from p0 / (1 - t) by more than 2%");
    c.require(t_blue < 60.0, "blue-sky run slower than 60 s");

    t0 = Clock::now();
    auto ropt = rescale.sky_options();
    ropt.p_max = 1000.0;
    const auto a = detect_sky(rescale.field, rescale.seed_points(), ropt);
    const double t_res = since(t0);
    c.require(a.verdict == Verdict::Admissible, std::string("rescale verdict ") + to_string(a.verdict));
    c.require(a.sky_witnesses.empty(), "rescale has witnesses");
    c.require(t_res < 60.0, "rescale run slower than 60 s");
    c.info << r.sky_witnesses.size() << " witness, fit " << worst << ", " << t_blue << " s / " << t_res << " s";
  });

  criterion(7, "growth bound holds on rescaled Hopf and fails with a shrunken K", [&](Check& c) {
    const auto set = sample_orbit_space(rescale.field, 0.0, rescale.sample_cap, rescale.seed_points());
    const auto b = continue_branch(rescale.field, set.orbits.at(0), 1.0, rescale.p_max);
    const auto g = growth_bound_check(b, rescale.field, *rescale.contact);
    c.info << "K " << g.K << ", bound " << g.bound << ", ratio " << g.ratio;
    c.require(g.ratio < 1.0 && g.pass, "bound violated");
    c.require(std::abs(g.K / 0.11 - 1.0) <= 0.01, "K not within 1% of 0.11");
    c.require(std::abs(g.bound / std::exp(0.11) - 1.0) <= 0.01, "bound not within 1% of e^0.11");
    const auto bad = growth_bound_check(b, rescale.field, *rescale.contact, Config{}, 0.1);
    c.require(!bad.pass, "corrupted K still passes");
  });

  criterion(8, "levels 1 and 2 agree below E_1", [&](Check& c) {
    const double E1 = hp.psys->levels.at(0).E;
    const auto a = sample_orbit_space(hp.psys->field(0), 0.0, E1, hp.seed_points());
    const auto b = sample_orbit_space(hp.psys->field(1), 0.0, E1, hp.seed_points());
    c.require(a.orbits.size() == b.orbits.size() && !a.orbits.empty(), "orbit counts differ");
    for (std::size_t i = 0; i < std::min(a.orbits.size(), b.orbits.size()); ++i) {
      const auto& x = a.orbits[i];
      const auto& y = b.orbits[i];
      c.require(std::abs(x.period - y.period) <= 1e-6 * x.period, "period mismatch");
      c.require(x.multiplicity == y.multiplicity, "multiplicity mismatch");
      c.require(fixed_point_index(hp.psys->field(0), x).fp_index == fixed_point_index(hp.psys->field(1), y).fp_index,
                "index mismatch");
    }
    c.info << a.orbits.size() << " orbits";
  });

  criterion(9, "C^0-near orbits approach Hopf fibers as delta shrinks", [&](Check& c) {
    auto ladder = near.params.at("delta_ladder").get<std::vector<double>>();
    std::sort(ladder.rbegin(), ladder.rend());
    std::vector<double> d;
    for (double delta : ladder) {
      const auto fam = gallery::hopf_c0_near(delta);
      const auto set = sample_orbit_space(fam, 0.0, near.sample_cap, near.seed_points());
      c.require(!set.orbits.empty(), "no orbit at delta " + std::to_string(delta));
      double worst = 0.0;
      for (const auto& o : set.orbits) worst = std::max(worst, gallery::hopf_fiber_distance(orbit_image(fam, o, 64)));
      d.push_back(worst);
    }
    c.info << "distances";
    for (double x : d) c.info << ' ' << x;
    for (std::size_t i = 1; i < d.size(); ++i) c.require(d[i] < d[i - 1], "distance did not shrink");
  });

  criterion(10, "flow hygiene on every built-in and total runtime", [&](Check& c) {
    int checks = 0;
    for (const auto& id : builtin_scenario_ids()) {
      const auto s = load_scenario(id);
      const auto& m = s.field.manifold;
      const double t = 0.5 * s.nonsingular_t_max;
      for (const auto& x : m.sample_net(4)) {
        const Vec a = flow_map(s.field, flow_map(s.field, x, 3.1, t).endpoint, 4.7, t).endpoint;
        c.require(m.distance(a, flow_map(s.field, x, 7.8, t).endpoint) <= 1e-7, id + ": group law");
        const auto y = flow_map(s.field, x, 2.3, t).endpoint;
        const Mat whole = monodromy(s.field, x, 8.2, t).matrix;
        const Mat parts = monodromy(s.field, y, 5.9, t).matrix * monodromy(s.field, x, 2.3, t).matrix;
        c.require((whole - parts).cwiseAbs().maxCoeff() <= 1e-6, id + ": chain rule");
        const Mat V = monodromy(s.field, x, 3.7, t).matrix;
        const Mat T = m.tangent_basis(x);
        const double h = 1e-5;
        for (int j = 0; j < T.cols(); ++j) {
          const Vec fp = flow_map(s.field, m.retract(x + h * T.col(j)), 3.7, t).endpoint;
          const Vec fm = flow_map(s.field, m.retract(x - h * T.col(j)), 3.7, t).endpoint;
          c.require((m.displacement(fm, fp) / (2 * h) - V * T.col(j)).cwiseAbs().maxCoeff() <= 1e-4,
                    id + ": finite-difference Jacobian");
        }
        checks += 3;
      }
    }
    for (const auto& r : reference_orbits(hp)) {
      const int a = fixed_point_index(r.fam, r.orbit).fp_index;
      for (double tilt : {0.2, 0.5})
        c.require(fixed_point_index(r.fam, r.orbit, Config{}, tilted_normal(r.fam, r.orbit, tilt)).fp_index == a,
                  r.name + ": section dependence");
      ++checks;
    }
    const double total = since(start);
    c.info << checks << " checks, acceptance wall time " << total << " s";
    c.require(total < 600.0, "acceptance run exceeds 10 minutes");
  });

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
