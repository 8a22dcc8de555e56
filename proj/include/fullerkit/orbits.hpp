#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fullerkit/config.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/parallel.hpp"

namespace fullerkit {

/// Periodic orbit (o, p) of X_t, stored through its base point on the section
/// orthogonal to the field. multiplicity = p / least_period.
struct PeriodicOrbit {
  Vec base;
  double period = 0.0;
  double param_t = 0.0;
  double least_period = 0.0;
  int multiplicity = 1;
  std::vector<int> class_tag;   // winding over [0, period] of each angle coordinate
  double residual = 0.0;
  double det_i_minus_a = 0.0;   // det(I - A) of the restricted monodromy at `period`
  bool morse_bott_suspect = false;
};

struct OrbitSet {
  std::vector<PeriodicOrbit> orbits;
  double period_cap = 0.0;
  double param_t = 0.0;
  double dedup_eps = 0.0;
  int attempts = 0;
  int failures = 0;
  bool morse_bott_suspect = false;
};

/// Orthonormal basis (columns) of T_xM intersected with the hyperplane normal^perp.
inline Mat section_basis(const EmbeddedManifold& m, const Vec& x, const Vec& normal) {
  const Mat T = m.tangent_basis(x);
  const Vec c = T.transpose() * normal;
  if (c.norm() < 1e-12) throw Error(ErrorCode::DegenerateSection, "section normal is orthogonal to T_xM");
  const int d = static_cast<int>(T.cols());
  Eigen::HouseholderQR<Mat> qr{Mat(c)};
  const Mat full = qr.householderQ() * Mat::Identity(d, d);
  return T * full.rightCols(d - 1);
}

/// Linearized return map of the section through x with the given normal,
/// from the ambient flow derivative V = dF_p(x) and the return point y.
inline Mat restricted_return_map(const VectorFieldFamily& fam, const Vec& x, const Vec& y, const Mat& V,
                                 const Vec& normal, double t) {
  const Mat Q = section_basis(fam.manifold, x, normal);
  const Vec vy = fam.field(y, t);
  const double along = normal.dot(vy);
  if (std::abs(along) < 1e-6 * vy.norm())
    throw Error(ErrorCode::DegenerateSection, "field nearly tangent to the section at the return point");
  const int n = static_cast<int>(x.size());
  const Mat P = Mat::Identity(n, n) - vy * normal.transpose() / along;
  return Q.transpose() * P * V * Q;
}

inline Vec field_normal(const VectorFieldFamily& fam, const Vec& x, double t) {
  const Vec v = fam.field(x, t);
  const double nv = v.norm();
  if (nv == 0.0) throw Error(ErrorCode::DegenerateSection, "field vanishes at the base point");
  return v / nv;
}

/// Full and section-restricted monodromy of a periodic orbit.
inline Monodromy monodromy(const VectorFieldFamily& fam, const PeriodicOrbit& o, const Config& cfg = {}) {
  const auto var = variational(fam, o.base, o.period, o.param_t, FlowTolerances::from(cfg));
  const Vec nrm = field_normal(fam, o.base, o.param_t);
  return {var.V, restricted_return_map(fam, o.base, var.endpoint, var.V, nrm, o.param_t)};
}

namespace detail {

inline void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::ParamOutOfRange, "t=" + std::to_string(t) + " outside [0,1]");
}

/// Return residuals |F_{p/j}(x) - x| for j = 1..jmax from a single pass.
inline std::vector<double> divisor_residuals(const VectorFieldFamily& fam, const Vec& x, double p, double t,
                                             int jmax, const FlowTolerances& tol) {
  std::vector<double> times;
  for (int j = jmax; j >= 1; --j) times.push_back(p / j);
  const auto pts = flow_samples(fam, x, times, t, tol);
  std::vector<double> res(static_cast<std::size_t>(jmax) + 1, std::numeric_limits<double>::infinity());
  for (int j = jmax, k = 0; j >= 1; --j, ++k)
    res[static_cast<std::size_t>(j)] = fam.manifold.distance(x, pts[static_cast<std::size_t>(k)]);
  return res;
}

}  // namespace detail

/// Least period by scanning p/j from the largest admissible j down.
inline std::pair<double, int> least_period(const VectorFieldFamily& fam, const Vec& x, double p, double t,
                                           const Config& cfg) {
  const auto res = detail::divisor_residuals(fam, x, p, t, cfg.max_multiplicity, FlowTolerances::from(cfg));
  for (int j = cfg.max_multiplicity; j >= 1; --j)
    if (res[static_cast<std::size_t>(j)] <= cfg.least_period_tol) return {p / j, j};
  return {p, 1};
}

/// Newton shooting for F_{t,p}(x) = x with x confined to the section through
/// the current iterate orthogonal to the field.
inline PeriodicOrbit find_orbit(const VectorFieldFamily& fam, const Vec& seed, double p_guess, double t,
                                const Config& cfg = {}) {
  if (!(p_guess > 0.0) || !std::isfinite(p_guess))
    throw Error(ErrorCode::InvalidArgument, "period guess must be positive");
  detail::check_t(t);
  const auto& m = fam.manifold;
  m.require_on(seed);

  const auto tight = FlowTolerances::from(cfg);
  const auto loose = tight.with_rtol(std::max(cfg.loose_rtol, cfg.rtol));
  const int d = m.dim();
  const int n = m.ambient_dim();

  Vec x = m.wrap(seed);
  double p = p_guess;
  double res = std::numeric_limits<double>::infinity();
  double best = res;
  int stall = 0;
  for (int iter = 0; iter < cfg.newton_max_iter; ++iter) {
    const bool coarse = res > 1e-4;
    const auto var = variational(fam, x, p, t, coarse ? loose : tight);
    const Vec r = m.displacement(x, var.endpoint);
    res = r.norm();
    if (!coarse && res <= cfg.newton_tol) {
      PeriodicOrbit o;
      o.base = x;
      o.period = p;
      o.param_t = t;
      o.residual = res;
      o.class_tag = m.winding(x, var.endpoint);
      const Vec nrm = field_normal(fam, x, t);
      const Mat A = restricted_return_map(fam, x, var.endpoint, var.V, nrm, t);
      o.det_i_minus_a = (Mat::Identity(d - 1, d - 1) - A).determinant();
      o.morse_bott_suspect = std::abs(o.det_i_minus_a) < cfg.degeneracy_threshold;
      std::tie(o.least_period, o.multiplicity) = least_period(fam, x, p, t, cfg);
      return o;
    }
    if (coarse && res <= 1e-4) continue;  // redo the same iterate at full accuracy
    if (res < 0.5 * best) {
      best = res;
      stall = 0;
    } else if (++stall >= 6) {
      throw Error(ErrorCode::NoConvergence, "Newton stagnated at residual " + std::to_string(res));
    }

    const Vec nrm = field_normal(fam, x, t);
    const Vec vy = fam.field(var.endpoint, t);
    if (std::abs(nrm.dot(vy)) < 1e-6 * vy.norm())
      throw Error(ErrorCode::DegenerateSection, "field nearly tangent to the section");
    const Mat Q = section_basis(m, x, nrm);
    const Mat T = m.tangent_basis(x);
    Mat J(d, d);
    J.leftCols(d - 1) = T.transpose() * (var.V - Mat::Identity(n, n)) * Q;
    J.col(d - 1) = T.transpose() * vy;
    const Vec rhs = -(T.transpose() * r);
    // min-norm solve; drops directions along Morse-Bott families
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(d, d);
    cod.setThreshold(1e-7);
    cod.compute(J);
    const Vec sol = cod.solve(rhs);
    Vec dx = Q * sol.head(d - 1);
    double dp = sol(d - 1);
    double scale = 1.0;
    if (dx.norm() > 0.25 * m.diameter()) scale = std::min(scale, 0.25 * m.diameter() / dx.norm());
    if (std::abs(dp) > 0.5 * p) scale = std::min(scale, 0.5 * p / std::abs(dp));
    x = m.wrap(m.retract(x + scale * dx));
    p += scale * dp;
    if (!(p > 0.0) || !x.allFinite()) throw Error(ErrorCode::NoConvergence, "Newton left the admissible region");
    // p -> 0 solves F_p(x) = x trivially
    if (p < 0.01 * p_guess) throw Error(ErrorCode::NoConvergence, "period collapsed toward 0");
  }
  throw Error(ErrorCode::NoConvergence, "no convergence after " + std::to_string(cfg.newton_max_iter) + " steps");
}

/// Points of the orbit at `count` equally spaced times over one least period.
inline std::vector<Vec> orbit_image(const VectorFieldFamily& fam, const PeriodicOrbit& o, int count,
                                    const Config& cfg = {}) {
  std::vector<double> times;
  for (int i = 0; i < count; ++i) times.push_back(o.least_period * i / count);
  return flow_samples(fam, o.base, times, o.param_t, FlowTolerances::from(cfg));
}

/// Distance from `a` to the orbit through `image` (samples over one least
/// period); the nearest sample is refined by Gauss-Newton along the flow.
inline double distance_to_orbit(const VectorFieldFamily& fam, const Vec& a, const std::vector<Vec>& image,
                                 double t, const Config& cfg = {}, double coarse_cutoff = 0.0) {
  const auto& m = fam.manifold;
  std::size_t best = 0;
  double dmin = std::numeric_limits<double>::infinity();
  double spacing = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double di = m.distance(a, image[i]);
    if (di < dmin) {
      dmin = di;
      best = i;
    }
    spacing = std::max(spacing, m.distance(image[i], image[(i + 1) % image.size()]));
  }
  if (coarse_cutoff > 0.0 && dmin > spacing + coarse_cutoff) return dmin;
  const auto tol = FlowTolerances::from(cfg);
  Vec y = image[best];
  double tau = 0.0;
  for (int it = 0; it < 6; ++it) {
    const Vec v = fam.field(y, t);
    const double step = m.displacement(y, a).dot(v) / v.squaredNorm();
    if (std::abs(step) < 1e-14) break;
    tau += step;
    y = flow_map(fam, image[best], tau, t, tol).endpoint;
  }
  return std::min(dmin, m.distance(a, y));
}

/// Symmetric sampled Hausdorff distance between two orbit images.
inline double orbit_hausdorff(const VectorFieldFamily& fam, const PeriodicOrbit& a, const PeriodicOrbit& b,
                              int samples, const Config& cfg = {}) {
  const auto ia = orbit_image(fam, a, samples, cfg);
  const auto ib = orbit_image(fam, b, samples, cfg);
  double h = 0.0;
  for (const auto& p : ia) h = std::max(h, distance_to_orbit(fam, p, ib, b.param_t, cfg));
  for (const auto& p : ib) h = std::max(h, distance_to_orbit(fam, p, ia, a.param_t, cfg));
  return h;
}

/// Geometric ladder of period guesses cap, cap/r, ... >= floor * cap.
inline std::vector<double> period_ladder(double cap, const Config& cfg) {
  std::vector<double> g;
  for (double p = cap; p >= cap * cfg.ladder_floor * (1 - 1e-12); p /= cfg.ladder_ratio) g.push_back(p);
  return g;
}

inline bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

/// Numerical proxy for S(X_t, a): Newton shooting from seeds x ladder,
/// deduplicated by period and image, sorted by (period, base).
inline OrbitSet sample_orbit_space(const VectorFieldFamily& fam, double t, double cap, const std::vector<Vec>& seeds,
                                   const Config& cfg = {}) {
  if (!(cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "period cap must be positive");
  detail::check_t(t);
  const auto ladder = period_ladder(cap, cfg);
  const std::size_t tasks = seeds.size() * ladder.size();
  std::vector<std::optional<PeriodicOrbit>> found(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t i) {
    try {
      found[i] = find_orbit(fam, seeds[i / ladder.size()], ladder[i % ladder.size()], t, cfg);
    } catch (const Error&) {
    }
  });

  // covers of what the ladder found; a ladder rung near k p is not guaranteed
  std::vector<std::pair<Vec, double>> covers;
  for (const auto& f : found) {
    if (!f) continue;
    for (int k = 2; k <= cfg.max_multiplicity && k * f->least_period <= cap * (1 + 1e-12); ++k)
      covers.emplace_back(f->base, k * f->least_period);
  }
  std::vector<std::optional<PeriodicOrbit>> extra(covers.size());
  parallel_for(covers.size(), cfg.threads, [&](std::size_t i) {
    try {
      extra[i] = find_orbit(fam, covers[i].first, covers[i].second, t, cfg);
    } catch (const Error&) {
    }
  });
  for (auto& e : extra) found.push_back(std::move(e));

  OrbitSet out;
  out.period_cap = cap;
  out.param_t = t;
  out.dedup_eps = cfg.dedup_rel * fam.manifold.diameter();
  out.attempts = static_cast<int>(tasks + covers.size());
  std::vector<std::vector<Vec>> images;
  for (auto& f : found) {
    if (!f) {
      ++out.failures;
      continue;
    }
    if (f->period > cap * (1 + 1e-12)) continue;
    bool duplicate = false;
    for (std::size_t k = 0; k < out.orbits.size() && !duplicate; ++k) {
      const auto& g = out.orbits[k];
      if (std::abs(g.period - f->period) >= cfg.period_match_rel * std::max(g.period, f->period)) continue;
      duplicate = distance_to_orbit(fam, f->base, images[k], t, cfg, out.dedup_eps) < out.dedup_eps;
    }
    if (duplicate) continue;
    images.push_back(orbit_image(fam, *f, cfg.image_samples, cfg));
    out.orbits.push_back(std::move(*f));
  }
  for (const auto& o : out.orbits) out.morse_bott_suspect = out.morse_bott_suspect || o.morse_bott_suspect;
  std::stable_sort(out.orbits.begin(), out.orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
    if (a.period != b.period) return a.period < b.period;
    return lex_less(a.base, b.base);
  });
  return out;
}

}  // namespace fullerkit
