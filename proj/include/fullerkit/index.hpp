#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fullerkit/config.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/orbits.hpp"
#include "fullerkit/parallel.hpp"
#include "fullerkit/rational.hpp"
#include "fullerkit/reeb.hpp"

namespace fullerkit {

enum class IndexMethod { SignDet, BoundaryDegree };

inline const char* to_string(IndexMethod m) { return m == IndexMethod::SignDet ? "sign_det" : "boundary_degree"; }

struct IndexReport {
  PeriodicOrbit orbit;
  int fp_index = 0;
  std::optional<int> cz_index;
  IndexMethod method = IndexMethod::SignDet;
  bool nondegenerate = true;
  double det_i_minus_a = 0.0;
};

/// Index of a fixed point of the return map given its linearization.
inline int sign_det_index(const Mat& A) {
  const int k = static_cast<int>(A.rows());
  const double d = (Mat::Identity(k, k) - A).determinant();
  return (d > 0) - (d < 0);
}

namespace detail {

/// Time-p return to the hyperplane through `base` with normal `n`, corrected
/// by short flows so the end point lies on the hyperplane.
inline Vec return_point(const VectorFieldFamily& fam, const Vec& x, const Vec& base, const Vec& n, double p, double t,
                        const FlowTolerances& tol) {
  const auto& m = fam.manifold;
  Vec y = flow_map(fam, x, p, t, tol).endpoint;
  for (int it = 0; it < 4; ++it) {
    const double g = n.dot(m.displacement(base, y));
    if (std::abs(g) < 1e-15) break;
    const double tau = -g / n.dot(fam.field(y, t));
    y = flow_map(fam, m.retract(y), tau, t, tol).endpoint;
  }
  return y;
}

}  // namespace detail

/// Degree of z -> P(z) - z on a small sphere around the fixed point in the
/// section (a circle on 2-d sections, two points on 1-d sections).
inline int boundary_degree(const VectorFieldFamily& fam, const PeriodicOrbit& o, const Vec& normal,
                           const Config& cfg = {}) {
  const auto& m = fam.manifold;
  const Mat Q = section_basis(m, o.base, normal);
  const int k = static_cast<int>(Q.cols());
  const auto tol = FlowTolerances::from(cfg);
  auto offset = [&](const Vec& z) -> Vec {
    const Vec x = m.retract(o.base + Q * z);
    const Vec y = detail::return_point(fam, x, o.base, normal, o.period, o.param_t, tol);
    return Q.transpose() * (m.displacement(o.base, y) - m.displacement(o.base, x));
  };
  const double r = cfg.degree_radius;
  auto check = [&](const Vec& g) {
    if (g.norm() < cfg.degree_zero_tol)
      throw Error(ErrorCode::DegenerateUnresolved, "return displacement vanishes on the degree sphere");
  };
  if (k == 1) {
    Vec z(1);
    z(0) = r;
    const Vec gp = offset(z);
    z(0) = -r;
    const Vec gm = offset(z);
    check(gp);
    check(gm);
    // Degree of g(z) = P(z) - z; the fixed-point index is the degree of z - P(z).
    const int deg = ((gp(0) > 0) - (gp(0) < 0) - (gm(0) > 0) + (gm(0) < 0)) / 2;
    return -deg;
  }
  if (k != 2) throw Error(ErrorCode::InvalidArgument, "boundary degree implemented for 1- and 2-d sections");
  const int ns = cfg.degree_samples;
  std::vector<Vec> g(static_cast<std::size_t>(ns));
  parallel_for(static_cast<std::size_t>(ns), cfg.threads, [&](std::size_t i) {
    const double th = kTwoPi * static_cast<double>(i) / ns;
    Vec z(2);
    z << r * std::cos(th), r * std::sin(th);
    g[i] = offset(z);
  });
  double total = 0.0;
  for (int i = 0; i < ns; ++i) {
    const Vec& a = g[static_cast<std::size_t>(i)];
    const Vec& b = g[static_cast<std::size_t>((i + 1) % ns)];
    check(a);
    total += wrap_signed(std::atan2(b(1), b(0)) - std::atan2(a(1), a(0)));
  }
  // In the plane, deg(z - P(z)) = deg(-(P(z) - z)) = deg(P(z) - z).
  return static_cast<int>(std::lround(total / kTwoPi));
}

/// Fixed-point index of the time-p return map on the section through the
/// base point with the given normal (the field direction by default).
inline IndexReport fixed_point_index(const VectorFieldFamily& fam, const PeriodicOrbit& o, const Config& cfg = {},
                                     std::optional<Vec> normal = std::nullopt) {
  const Vec n = normal ? Vec(normal->normalized()) : field_normal(fam, o.base, o.param_t);
  const auto var = variational(fam, o.base, o.period, o.param_t, FlowTolerances::from(cfg));
  const Mat A = restricted_return_map(fam, o.base, var.endpoint, var.V, n, o.param_t);
  const int k = static_cast<int>(A.rows());
  IndexReport rep;
  rep.orbit = o;
  rep.det_i_minus_a = (Mat::Identity(k, k) - A).determinant();
  if (std::abs(rep.det_i_minus_a) > cfg.degeneracy_threshold) {
    rep.fp_index = (rep.det_i_minus_a > 0) - (rep.det_i_minus_a < 0);
    rep.method = IndexMethod::SignDet;
    rep.nondegenerate = true;
  } else {
    rep.fp_index = boundary_degree(fam, o, n, cfg);
    rep.method = IndexMethod::BoundaryDegree;
    rep.nondegenerate = false;
  }
  return rep;
}

/// A transverse normal tilted away from the field direction, for
/// section-independence checks.
inline Vec tilted_normal(const VectorFieldFamily& fam, const PeriodicOrbit& o, double tilt = 0.3) {
  const Vec v = field_normal(fam, o.base, o.param_t);
  const Mat T = fam.manifold.tangent_basis(o.base);
  Vec w = Vec::Zero(v.size());
  for (int j = 0; j < T.cols(); ++j) {
    Vec c = T.col(j) - T.col(j).dot(v) * v;
    if (c.norm() > w.norm()) w = c;
  }
  return (v + tilt * w.normalized()).normalized();
}

// ---- Conley-Zehnder ----------------------------------------------------------

/// Robbin-Salamon value of a path in Sp(2). `degenerate` when the end point has
/// eigenvalue 1; the value is then a half-integer (or even integer at I).
struct CzValue {
  double value = 0.0;
  bool degenerate = false;
  std::optional<int> integer() const {
    if (degenerate) return std::nullopt;
    return static_cast<int>(std::lround(value));
  }
};

namespace detail {

using Mat2 = Eigen::Matrix2d;

/// Continuous angle function on Sp(2): sigma * arccos(tr/2) on elliptic
/// elements, 0 on positive and pi on negative hyperbolic ones.
inline double rho_angle(const Mat2& phi) {
  const double tr = phi.trace();
  if (tr >= 2.0) return 0.0;
  if (tr <= -2.0) return std::numbers::pi;
  const double a = std::acos(0.5 * tr);
  return phi(1, 0) >= 0.0 ? a : -a;
}

inline Mat2 normalize_symplectic(const Mat2& phi) {
  const double d = phi.determinant();
  if (!(d > 0)) throw Error(ErrorCode::DegeneratePath, "path leaves GL+(2)");
  return phi / std::sqrt(d);
}

}  // namespace detail

/// Index of a sampled path Phi(0) = I, ..., Phi(1) in Sp(2). Sampling must be
/// fine enough that rho changes by less than pi between samples.
inline CzValue conley_zehnder_path(std::span<const Eigen::Matrix2d> path, double eig1_tol = 1e-8) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
  double alpha = detail::rho_angle(detail::normalize_symplectic(path[0]));
  double prev = alpha;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double r = detail::rho_angle(detail::normalize_symplectic(path[i]));
    alpha += wrap_signed(r - prev);
    prev = r;
  }
  const Eigen::Matrix2d end = detail::normalize_symplectic(path.back());
  const double tr = end.trace();
  CzValue out;
  if (std::abs(tr - 2.0) <= eig1_tol) {
    out.degenerate = true;
    const double base = 2.0 * std::round(alpha / kTwoPi);
    if ((end - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-6) {
      out.value = base;
    } else {
      const double asym = end(0, 1) - end(1, 0);
      out.value = base - 0.5 * ((asym > 0) - (asym < 0));
    }
  } else if (tr < 2.0 && tr > -2.0) {
    out.value = 2.0 * std::floor(alpha / kTwoPi) + 1.0;
  } else {
    out.value = std::round(alpha / std::numbers::pi);
  }
  return out;
}

/// Linearized flow on the contact plane span(jq, kq) along a closed orbit on
/// S^3, in the global frame that extends over any bounding disk.
inline std::vector<Eigen::Matrix2d> contact_plane_path(const VectorFieldFamily& fam, const PeriodicOrbit& o,
                                                       const Config& cfg = {}) {
  if (fam.manifold.kind() != EmbeddedManifold::Kind::Sphere)
    throw Error(ErrorCode::InvalidArgument, "contact plane path implemented on S^3");
  const int steps = std::max(64, static_cast<int>(std::ceil(o.period / 0.05)));
  std::vector<double> times;
  for (int i = 1; i <= steps; ++i) times.push_back(o.period * i / steps);
  const auto samples = variational_samples(fam, o.base, times, o.param_t, FlowTolerances::from(cfg));
  const Mat T0 = fam.manifold.tangent_basis(o.base);
  const Mat E0 = T0.rightCols(2);
  std::vector<Eigen::Matrix2d> path{Eigen::Matrix2d::Identity()};
  for (const auto& [y, V] : samples) {
    const Vec yr = fam.manifold.retract(y);
    const Mat E = fam.manifold.tangent_basis(yr).rightCols(2);
    path.push_back(Eigen::Matrix2d(E.transpose() * V * E0));
  }
  return path;
}

/// Conley-Zehnder index of a Reeb orbit of `contact` at the orbit's t.
inline CzValue conley_zehnder(const VectorFieldFamily& fam, const PeriodicOrbit& o, const ContactFormFamily& contact,
                              const Config& cfg = {}) {
  std::vector<double> times;
  for (int i = 0; i < 32; ++i) times.push_back(o.period * i / 32);
  const auto pts = flow_samples(fam, o.base, times, o.param_t, FlowTolerances::from(cfg));
  for (const auto& y : pts) {
    const Vec x = fam.manifold.retract(y);
    const auto def = reeb_defect(contact, x, fam.field(x, o.param_t), o.param_t);
    if (def.normalization > 1e-6 || def.kernel > 1e-6)
      throw Error(ErrorCode::NotReebOrbit, "field is not the Reeb field of the form along the orbit",
                  {{"normalization_defect", def.normalization}, {"kernel_defect", def.kernel}});
  }
  const auto path = contact_plane_path(fam, o, cfg);
  return conley_zehnder_path(path);
}

/// Index report with the CZ index filled in for Reeb orbits on S^3.
inline IndexReport index_with_cz(const VectorFieldFamily& fam, const PeriodicOrbit& o, const ContactFormFamily& contact,
                                 const Config& cfg = {}) {
  auto rep = fixed_point_index(fam, o, cfg);
  const auto cz = conley_zehnder(fam, o, contact, cfg);
  rep.cz_index = cz.integer();
  return rep;
}

// ---- Fuller index -----------------------------------------------------------

enum class FullerKind { Finite, PlusInfinity, MinusInfinity };

inline const char* to_string(FullerKind k) {
  switch (k) {
    case FullerKind::Finite: return "Finite";
    case FullerKind::PlusInfinity: return "PlusInfinity";
    case FullerKind::MinusInfinity: return "MinusInfinity";
  }
  return "?";
}

struct CapLevel {
  double cap = 0.0;
  std::vector<IndexReport> reports;  // sorted by period
  Rational partial_sum;
};

struct FullerIndexValue {
  FullerKind kind = FullerKind::Finite;
  Rational value;
  double E = 0.0;
  std::vector<CapLevel> levels;  // evidence
};

/// Sum of i(o,p) / m(o,p) in exact arithmetic.
inline Rational fuller_index_local(std::span<const std::optional<IndexReport>> reports) {
  Rational sum;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i]) throw Error(ErrorCode::MissingIndex, "orbit " + std::to_string(i) + " has no index");
    sum += Rational(reports[i]->fp_index, reports[i]->orbit.multiplicity);
  }
  return sum;
}

inline Rational fuller_index_local(std::span<const IndexReport> reports) {
  Rational sum;
  for (const auto& r : reports) sum += Rational(r.fp_index, r.orbit.multiplicity);
  return sum;
}

/// Supplies X^a for each period cap a, plus the seeds and class filter used
/// to sample S(X^a, a, beta).
struct CappedFieldProvider {
  std::function<VectorFieldFamily(double)> field_for_cap;
  std::vector<Vec> seeds;
  std::optional<std::vector<int>> class_filter;
  double t = 0.0;
};

inline CapLevel sample_cap_level(const CappedFieldProvider& prov, double cap, const Config& cfg) {
  const auto fam = prov.field_for_cap(cap);
  const auto set = sample_orbit_space(fam, prov.t, cap, prov.seeds, cfg);
  CapLevel lev;
  lev.cap = cap;
  for (const auto& o : set.orbits) {
    if (prov.class_filter && o.class_tag != *prov.class_filter) continue;
    lev.reports.push_back(fixed_point_index(fam, o, cfg));
  }
  lev.partial_sum = fuller_index_local(std::span<const IndexReport>(lev.reports));
  return lev;
}

namespace detail {

/// Same orbit data up to order: equal count, and a one-to-one matching with
/// equal index and multiplicity and periods within period_match_rel.
inline bool same_orbit_data(const CapLevel& a, const CapLevel& b, const Config& cfg) {
  if (a.reports.size() != b.reports.size()) return false;
  std::vector<bool> used(b.reports.size(), false);
  for (const auto& x : a.reports) {
    bool found = false;
    for (std::size_t j = 0; j < b.reports.size() && !found; ++j) {
      const auto& y = b.reports[j];
      if (used[j] || x.fp_index != y.fp_index || x.orbit.multiplicity != y.orbit.multiplicity) continue;
      if (std::abs(x.orbit.period - y.orbit.period) > cfg.period_match_rel * std::max(x.orbit.period, y.orbit.period))
        continue;
      used[j] = found = true;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace detail

/// Finite when the indexed orbit sets of the two largest caps coincide;
/// +-infinity when, above some E in {0} u caps, every orbit with period in
/// (E, a] has the same strict index sign and the partial sums move strictly
/// in that direction; Indeterminate otherwise.
inline FullerIndexValue classify_from_levels(std::vector<CapLevel> levels, const Config& cfg = {}) {
  const std::size_t K = levels.size();
  if (K < 2) throw Error(ErrorCode::InvalidArgument, "need at least two caps");
  FullerIndexValue out;

  if (detail::same_orbit_data(levels[K - 2], levels[K - 1], cfg)) {
    out.kind = FullerKind::Finite;
    out.value = levels[K - 1].partial_sum;
    out.E = levels[K - 2].cap;
    out.levels = std::move(levels);
    return out;
  }

  if (static_cast<int>(K) >= cfg.infinite_type_min_caps) {
    std::vector<double> cands{0.0};
    for (std::size_t i = 0; i + 2 < K; ++i) cands.push_back(levels[i].cap);
    for (double E : cands) {
      int sign = 0;
      bool ok = true;
      std::size_t tail = 0;
      const Rational* prev = nullptr;
      for (const auto& lev : levels) {
        if (lev.cap <= E) {
          prev = &lev.partial_sum;
          continue;
        }
        ++tail;
        for (const auto& r : lev.reports) {
          if (r.orbit.period <= E) continue;
          if (r.fp_index == 0 || (sign != 0 && r.fp_index != sign)) ok = false;
          sign = r.fp_index;
        }
        if (prev && sign != 0) {
          const bool up = lev.partial_sum > *prev, down = lev.partial_sum < *prev;
          if ((sign > 0 && !up) || (sign < 0 && !down)) ok = false;
        }
        prev = &lev.partial_sum;
      }
      if (ok && sign != 0 && tail >= 2) {
        out.kind = sign > 0 ? FullerKind::PlusInfinity : FullerKind::MinusInfinity;
        out.E = E;
        out.levels = std::move(levels);
        return out;
      }
    }
  }

  nlohmann::json detail = nlohmann::json::array();
  for (const auto& lev : levels) {
    nlohmann::json idx = nlohmann::json::array();
    for (const auto& r : lev.reports) idx.push_back({{"period", r.orbit.period}, {"index", r.fp_index},
                                                     {"multiplicity", r.orbit.multiplicity}});
    detail.push_back({{"cap", lev.cap}, {"partial_sum", lev.partial_sum}, {"orbits", idx}});
  }
  throw Error(ErrorCode::Indeterminate, "orbit sets neither stabilize nor share a strict index sign",
              {{"levels", detail}});
}

inline FullerIndexValue classify_definite_type(const CappedFieldProvider& prov, const std::vector<double>& caps,
                                               const Config& cfg = {}) {
  for (std::size_t i = 0; i < caps.size(); ++i)
    if (!(caps[i] > 0) || (i > 0 && !(caps[i] > caps[i - 1])))
      throw Error(ErrorCode::InvalidArgument, "caps must be positive and strictly increasing");
  std::vector<CapLevel> levels;
  for (double a : caps) levels.push_back(sample_cap_level(prov, a, cfg));
  return classify_from_levels(std::move(levels), cfg);
}

/// Provider for X^a of a perturbation system.
inline CappedFieldProvider provider_for(const PerturbationSystem& sys, std::vector<Vec> seeds) {
  CappedFieldProvider p;
  p.field_for_cap = [sys](double a) { return sys.field(sys.level_for_cap(a)); };
  p.seeds = std::move(seeds);
  return p;
}

/// Provider returning one fixed field for every cap.
inline CappedFieldProvider provider_for(const VectorFieldFamily& fam, std::vector<Vec> seeds, double t,
                                        std::optional<std::vector<int>> class_filter = std::nullopt) {
  CappedFieldProvider p;
  p.field_for_cap = [fam](double) { return fam; };
  p.seeds = std::move(seeds);
  p.class_filter = std::move(class_filter);
  p.t = t;
  return p;
}

}  // namespace fullerkit
