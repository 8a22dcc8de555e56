#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fullerkit/config.hpp"
#include "fullerkit/continuation.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/index.hpp"
#include "fullerkit/orbits.hpp"

namespace fullerkit {

/// k points of M with pairwise distinct entries, stored as the
/// lexicographically smallest cyclic rotation.
struct CyclicTuple {
  std::vector<Vec> points;
  int k = 0;
};

namespace detail {

/// Lexicographic comparison of two rotations; coordinates within tol count as equal.
inline int compare_rotations(const std::vector<Vec>& pts, int r1, int r2, double tol) {
  const int k = static_cast<int>(pts.size());
  for (int j = 0; j < k; ++j) {
    const Vec& a = pts[static_cast<std::size_t>((j + r1) % k)];
    const Vec& b = pts[static_cast<std::size_t>((j + r2) % k)];
    for (int i = 0; i < a.size(); ++i) {
      if (a(i) < b(i) - tol) return -1;
      if (a(i) > b(i) + tol) return 1;
    }
  }
  return 0;
}

}  // namespace detail

inline CyclicTuple canonical(const CyclicTuple& in, double tol = 1e-9) {
  const int k = static_cast<int>(in.points.size());
  int best = 0;
  for (int r = 1; r < k; ++r)
    if (detail::compare_rotations(in.points, r, best, tol) < 0) best = r;
  CyclicTuple out{{}, k};
  for (int j = 0; j < k; ++j) out.points.push_back(in.points[static_cast<std::size_t>((j + best) % k)]);
  return out;
}

inline CyclicTuple make_cyclic_tuple(const EmbeddedManifold& m, std::vector<Vec> points, double sep_tol) {
  const int k = static_cast<int>(points.size());
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "tuple needs at least two points");
  for (const auto& p : points) m.require_on(p);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (m.distance(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]) <= sep_tol)
        throw Error(ErrorCode::InvalidArgument, "tuple entries " + std::to_string(i) + " and " + std::to_string(j) +
                                                    " are not separated");
  for (auto& p : points) p = m.wrap(p);
  return canonical(CyclicTuple{std::move(points), k});
}

/// Componentwise field on the configuration space.
inline std::vector<Vec> lift_field(const VectorFieldFamily& fam, const CyclicTuple& tuple, double t) {
  std::vector<Vec> out;
  out.reserve(tuple.points.size());
  for (const auto& x : tuple.points) out.push_back(fam.eval(x, t));
  return out;
}

struct LiftedOrbit {
  CyclicTuple tuple;
  double period = 0.0;  // p / k
  PeriodicOrbit source;
  int mu = 0;
  int multiplicity = 1;
};

/// Re-bases an orbit at the minimum of a fixed generic linear functional, so
/// that the lift does not depend on where the orbit was first found.
inline PeriodicOrbit canonical_phase(const VectorFieldFamily& fam, const PeriodicOrbit& o, const Config& cfg = {}) {
  const auto& m = fam.manifold;
  Vec c(m.ambient_dim());
  for (int i = 0; i < c.size(); ++i) c(i) = 1.0 / (1.0 + 0.7 * i);
  c.normalize();
  const int ns = 256;
  std::vector<double> times;
  for (int i = 0; i < ns; ++i) times.push_back(o.least_period * i / ns);
  const auto tol = FlowTolerances::from(cfg);
  const auto pts = flow_samples(fam, o.base, times, o.param_t, tol);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (c.dot(pts[i]) < c.dot(pts[best])) best = i;
  double tau = times[best];
  Vec x = m.retract(pts[best]);
  for (int it = 0; it < 20; ++it) {
    const Vec v = fam.field(x, o.param_t);
    const double g = c.dot(v);
    const double dg = c.dot(fam.jac(x, o.param_t, cfg.jacobian_fd_step) * v);
    if (!(dg > 0)) break;
    const double step = std::clamp(-g / dg, -0.5 * o.least_period / ns, 0.5 * o.least_period / ns);
    tau += step;
    x = m.retract(flow_map(fam, o.base, tau, o.param_t, tol).endpoint);
    if (std::abs(step) < 1e-14) break;
  }
  PeriodicOrbit out = o;
  out.base = m.wrap(x);
  return out;
}

namespace detail {

/// Cyclic shift s with y_j = x_{j+s} for all j, if any.
inline std::optional<int> detect_shift(const EmbeddedManifold& m, const std::vector<Vec>& x, const std::vector<Vec>& y,
                                       double tol) {
  const int k = static_cast<int>(x.size());
  for (int s = 0; s < k; ++s) {
    bool ok = true;
    for (int j = 0; j < k && ok; ++j)
      ok = m.distance(y[static_cast<std::size_t>(j)], x[static_cast<std::size_t>((j + s) % k)]) <= tol;
    if (ok) return s;
  }
  return std::nullopt;
}

}  // namespace detail

/// Ful_k: (o, p) -> (o(0), o(p/k), ..., o((k-1)p/k)) with period p/k.
inline LiftedOrbit fuller_map(const VectorFieldFamily& fam, const PeriodicOrbit& orbit, int k, const Config& cfg = {}) {
  if (!is_prime(k)) throw Error(ErrorCode::InvalidArgument, "k must be prime");
  if (orbit.multiplicity >= k)
    throw Error(ErrorCode::MultiplicityTooHigh,
                "multiplicity " + std::to_string(orbit.multiplicity) + " >= k = " + std::to_string(k));
  const auto& m = fam.manifold;
  const auto tol = FlowTolerances::from(cfg);
  const PeriodicOrbit o = canonical_phase(fam, orbit, cfg);
  const double tau = o.period / k;

  std::vector<double> times;
  for (int j = 1; j < k; ++j) times.push_back(tau * j);
  std::vector<Vec> pts{o.base};
  for (const auto& y : flow_samples(fam, o.base, times, o.param_t, tol)) pts.push_back(m.wrap(m.retract(y)));

  LiftedOrbit lift;
  lift.source = orbit;
  lift.period = tau;
  lift.tuple = make_cyclic_tuple(m, pts, cfg.sep_rel * m.diameter());

  std::vector<Vec> moved;
  for (const auto& x : lift.tuple.points) moved.push_back(flow_map(fam, x, tau, o.param_t, tol).endpoint);
  const auto s = detail::detect_shift(m, lift.tuple.points, moved, cfg.shift_tol);
  if (!s || *s != 1)
    throw Error(ErrorCode::ShiftMismatch, s ? "detected shift " + std::to_string(*s) : "no cyclic shift matches");
  lift.mu = *s;

  // least period of the lifted orbit: largest j with the tuple invariant after tau / j
  lift.multiplicity = 1;
  for (int j = cfg.max_multiplicity; j >= 2; --j) {
    std::vector<Vec> yj;
    for (const auto& x : lift.tuple.points) yj.push_back(flow_map(fam, x, tau / j, o.param_t, tol).endpoint);
    if (detail::detect_shift(m, lift.tuple.points, yj, cfg.shift_tol)) {
      lift.multiplicity = j;
      break;
    }
  }
  return lift;
}

struct CorrespondenceReport {
  bool index_match = false;
  double period_ratio = 0.0;
  bool mult_match = false;
  int original_index = 0;
  int lifted_index = 0;
  double det_original = 0.0;
  double det_lifted = 0.0;
  int mu = 0;
  int lifted_multiplicity = 0;
  LiftedOrbit lifted;
};

/// Index of the lifted orbit from the return map of the product flow at
/// time p/k composed with the inverse cyclic shift, on a section of M^k.
inline CorrespondenceReport verify_correspondence(const VectorFieldFamily& fam, const PeriodicOrbit& orbit, int k,
                                                  const Config& cfg = {}) {
  using MatX = Eigen::MatrixXd;
  using VecX = Eigen::VectorXd;
  const auto& m = fam.manifold;
  const int n = m.ambient_dim();
  const int d = m.dim();
  const double t = orbit.param_t;

  CorrespondenceReport rep;
  rep.lifted = fuller_map(fam, orbit, k, cfg);
  const auto& c = rep.lifted.tuple.points;

  const auto base_rep = fixed_point_index(fam, orbit, cfg);
  rep.original_index = base_rep.fp_index;
  rep.det_original = base_rep.det_i_minus_a;

  const auto tol = FlowTolerances::from(cfg);
  std::vector<Variational> var;
  for (const auto& x : c) var.push_back(variational(fam, x, rep.lifted.period, t, tol));

  const int N = n * k;
  MatX DPsi = MatX::Zero(N, N);
  MatX Tb = MatX::Zero(N, d * k);
  VecX X0(N), Xr(N);
  for (int j = 0; j < k; ++j) {
    const int from = (j + k - 1) % k;
    DPsi.block(j * n, from * n, n, n) = var[static_cast<std::size_t>(from)].V;
    Tb.block(j * n, j * d, n, d) = m.tangent_basis(c[static_cast<std::size_t>(j)]);
    X0.segment(j * n, n) = fam.field(c[static_cast<std::size_t>(j)], t);
    Xr.segment(j * n, n) = fam.field(var[static_cast<std::size_t>(from)].endpoint, t);
  }
  const VecX nrm = X0.normalized();
  const VecX cvec = Tb.transpose() * nrm;
  Eigen::HouseholderQR<MatX> qr{MatX(cvec)};
  const MatX full = qr.householderQ() * MatX::Identity(d * k, d * k);
  const MatX Q = Tb * full.rightCols(d * k - 1);
  const double along = nrm.dot(Xr);
  if (std::abs(along) < 1e-6 * Xr.norm()) throw Error(ErrorCode::DegenerateSection, "lifted field tangent to section");
  const MatX P = MatX::Identity(N, N) - Xr * nrm.transpose() / along;
  const MatX A = Q.transpose() * P * DPsi * Q;
  rep.det_lifted = (MatX::Identity(A.rows(), A.cols()) - A).determinant();
  if (!(std::abs(rep.det_lifted) > cfg.degeneracy_threshold))
    throw Error(ErrorCode::DegenerateLift, "lifted return map is degenerate", {{"det", rep.det_lifted}});
  rep.lifted_index = rep.det_lifted > 0 ? 1 : -1;

  rep.index_match = rep.lifted_index == rep.original_index;
  rep.period_ratio = rep.lifted.period * k / orbit.period;
  rep.mu = rep.lifted.mu;
  rep.lifted_multiplicity = rep.lifted.multiplicity;
  rep.mult_match = rep.lifted.multiplicity == orbit.multiplicity;
  return rep;
}

}  // namespace fullerkit
