#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fullerkit/config.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/orbits.hpp"
#include "fullerkit/parallel.hpp"

namespace fullerkit {

enum class BranchStatus { ReachedT0, ReachedT1, PeriodCapHit, FoldExhausted, NewtonLost };

inline const char* to_string(BranchStatus s) {
  switch (s) {
    case BranchStatus::ReachedT0: return "ReachedT0";
    case BranchStatus::ReachedT1: return "ReachedT1";
    case BranchStatus::PeriodCapHit: return "PeriodCapHit";
    case BranchStatus::FoldExhausted: return "FoldExhausted";
    case BranchStatus::NewtonLost: return "NewtonLost";
  }
  return "?";
}

struct BranchNode {
  Vec x;
  double p = 0.0;
  double t = 0.0;
  std::optional<int> fp_index;
  int multiplicity = 1;
};

/// Polyline in (x, p, t) traced by pseudo-arclength continuation.
struct OrbitBranch {
  std::string label;
  std::vector<BranchNode> nodes;
  std::vector<double> arclength;
  BranchStatus status = BranchStatus::NewtonLost;
  int component_id = -1;
  double step_cap = 0.0;  // bound on |dz| between consecutive nodes
};

/// Distance in (x, p, t) between two nodes.
inline double node_distance(const EmbeddedManifold& m, const BranchNode& a, const BranchNode& b) {
  const double dx = m.distance(a.x, b.x);
  return std::sqrt(dx * dx + (a.p - b.p) * (a.p - b.p) + (a.t - b.t) * (a.t - b.t));
}

namespace detail {

inline constexpr double kCodThreshold = 1e-7;

struct Tangent {
  Vec dx;
  double dp = 0.0;
  double dt = 0.0;
  void normalize() {
    const double n = std::sqrt(dx.squaredNorm() + dp * dp + dt * dt);
    dx /= n;
    dp /= n;
    dt /= n;
  }
};

inline std::pair<std::optional<int>, int> node_annotations(const VectorFieldFamily& fam, const Vec& x, double p,
                                                           double t, const Variational& var, const Config& cfg) {
  std::optional<int> fp;
  try {
    const Mat A = restricted_return_map(fam, x, var.endpoint, var.V, field_normal(fam, x, t), t);
    const int k = static_cast<int>(A.rows());
    const double d = (Mat::Identity(k, k) - A).determinant();
    if (std::abs(d) > cfg.degeneracy_threshold) fp = (d > 0) - (d < 0);
  } catch (const Error&) {
  }
  return {fp, least_period(fam, x, p, t, cfg).second};
}

struct Corrected {
  Vec x;
  double p;
  double t;
  int iters;
  Variational var;
};

/// Newton on (F_{t,p}(x) - x = 0 on the section, arclength = h).
inline std::optional<Corrected> correct(const VectorFieldFamily& fam, Vec x, double p, double t, const BranchNode& prev,
                                        const Tangent& tan, double h, const Config& cfg) {
  const auto& m = fam.manifold;
  const int d = m.dim();
  const int n = m.ambient_dim();
  const auto tol = FlowTolerances::from(cfg);
  using MatX = Eigen::MatrixXd;
  for (int it = 0; it <= cfg.corrector_max_iter; ++it) {
    if (!(p > 0.0) || !x.allFinite() || !std::isfinite(t)) return std::nullopt;
    Variational var;
    try {
      var = variational(fam, x, p, t, tol, true);
    } catch (const Error&) {
      return std::nullopt;
    }
    const Vec r = m.displacement(x, var.endpoint);
    const double arc = tan.dx.dot(m.displacement(prev.x, x)) + tan.dp * (p - prev.p) + tan.dt * (t - prev.t) - h;
    if (r.norm() <= cfg.newton_tol && std::abs(arc) <= 1e-10 * std::max(1.0, h)) return Corrected{x, p, t, it, var};
    if (it == cfg.corrector_max_iter) break;
    const Vec xv = fam.field(x, t);
    if (xv.norm() == 0.0) return std::nullopt;
    const Vec nrm = xv.normalized();
    const Vec vy = fam.field(var.endpoint, t);
    Mat Q, T;
    try {
      Q = section_basis(m, x, nrm);
      T = m.tangent_basis(x);
    } catch (const Error&) {
      return std::nullopt;
    }
    MatX J(d + 1, d + 1);
    J.topLeftCorner(d, d - 1) = T.transpose() * (var.V - Mat::Identity(n, n)) * Q;
    J.block(0, d - 1, d, 1) = T.transpose() * vy;
    J.block(0, d, d, 1) = T.transpose() * var.W;
    J.block(d, 0, 1, d - 1) = tan.dx.transpose() * Q;
    J(d, d - 1) = tan.dp;
    J(d, d) = tan.dt;
    Eigen::VectorXd rhs(d + 1);
    rhs.head(d) = -(T.transpose() * r);
    rhs(d) = -arc;
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(J.rows(), J.cols());
    cod.setThreshold(kCodThreshold);
    cod.compute(J);
    const Eigen::VectorXd sol = cod.solve(rhs);
    x = m.wrap(m.retract(x + Q * sol.head(d - 1)));
    p += sol(d - 1);
    t += sol(d);
  }
  return std::nullopt;
}

/// Tangent of the solution curve at a converged orbit, from the min-norm
/// solve of the linearized fixed-point equation with dt = 1.
inline Tangent initial_tangent(const VectorFieldFamily& fam, const Vec& x, double p, double t, const Config& cfg) {
  const auto& m = fam.manifold;
  const int d = m.dim();
  const int n = m.ambient_dim();
  const auto var = variational(fam, x, p, t, FlowTolerances::from(cfg), true);
  const Vec nrm = field_normal(fam, x, t);
  const Mat Q = section_basis(m, x, nrm);
  const Mat T = m.tangent_basis(x);
  Mat G(d, d);
  G.leftCols(d - 1) = T.transpose() * (var.V - Mat::Identity(n, n)) * Q;
  G.col(d - 1) = T.transpose() * fam.field(var.endpoint, t);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(d, d);
  cod.setThreshold(kCodThreshold);
  cod.compute(G);
  const Vec c = cod.solve(Vec(-(T.transpose() * var.W)));
  Tangent tan{Q * c.head(d - 1), c(d - 1), 1.0};
  tan.normalize();
  return tan;
}

}  // namespace detail

/// Pseudo-arclength continuation of `start` toward t_target. Folds in t are
/// traversed; stops at the target (or the other end of [0,1]), above P_max,
/// after max_branch_nodes nodes, or when the step size underflows.
inline OrbitBranch continue_branch(const VectorFieldFamily& fam, const PeriodicOrbit& start, double t_target,
                                   double p_max, const Config& cfg = {}) {
  const auto& m = fam.manifold;
  if (!(t_target >= 0.0 && t_target <= 1.0))
    throw Error(ErrorCode::ParamOutOfRange, "t_target outside [0,1]");
  if (!(p_max > start.period)) throw Error(ErrorCode::StartInvalid, "P_max must exceed the start period");
  {
    const auto back = flow_map(fam, start.base, start.period, start.param_t, FlowTolerances::from(cfg));
    const double res = m.distance(start.base, back.endpoint);
    if (!(res <= 1e-6))
      throw Error(ErrorCode::StartInvalid, "start is not a periodic orbit (residual " + std::to_string(res) + ")");
  }

  OrbitBranch br;
  br.label = fam.label;
  br.step_cap = 1.5 * cfg.step_max;
  BranchNode cur{start.base, start.period, start.param_t, std::nullopt, start.multiplicity};
  {
    const auto var = variational(fam, cur.x, cur.p, cur.t, FlowTolerances::from(cfg));
    cur.fp_index = detail::node_annotations(fam, cur.x, cur.p, cur.t, var, cfg).first;
  }
  br.nodes.push_back(cur);
  br.arclength.push_back(0.0);
  const double dir = t_target > start.param_t ? 1.0 : -1.0;
  if (t_target == start.param_t) {
    br.status = t_target == 0.0 ? BranchStatus::ReachedT0 : BranchStatus::ReachedT1;
    return br;
  }

  auto tan = detail::initial_tangent(fam, cur.x, cur.p, cur.t, cfg);
  if (tan.dt * dir < 0) {
    tan.dx = -tan.dx;
    tan.dp = -tan.dp;
    tan.dt = -tan.dt;
  }
  double h = cfg.step_initial;

  auto push = [&](const Vec& x, double p, double t, const Variational& var) {
    BranchNode nd{x, p, t, std::nullopt, 1};
    std::tie(nd.fp_index, nd.multiplicity) = detail::node_annotations(fam, x, p, t, var, cfg);
    br.arclength.push_back(br.arclength.back() + node_distance(m, br.nodes.back(), nd));
    br.nodes.push_back(nd);
  };

  for (;;) {
    if (static_cast<int>(br.nodes.size()) >= cfg.max_branch_nodes) {
      br.status = BranchStatus::FoldExhausted;
      return br;
    }
    if (h < cfg.step_min) {
      br.status = BranchStatus::NewtonLost;
      return br;
    }
    const BranchNode& last = br.nodes.back();
    const double t_pred = last.t + h * tan.dt;

    // Landing on the target or on an end of [0,1].
    std::optional<double> t_land;
    if (dir > 0 && t_pred >= t_target) t_land = t_target;
    else if (dir < 0 && t_pred <= t_target) t_land = t_target;
    else if (t_pred > 1.0) t_land = 1.0;
    else if (t_pred < 0.0) t_land = 0.0;
    if (t_land) {
      const double hl = (*t_land - last.t) / tan.dt;
      const Vec xp = m.wrap(m.retract(last.x + hl * tan.dx));
      const double pp = last.p + hl * tan.dp;
      try {
        if (!(pp > 0)) throw Error(ErrorCode::NoConvergence, "negative predicted period");
        const auto o = find_orbit(fam, xp, pp, *t_land, cfg);
        const BranchNode probe{o.base, o.period, *t_land, std::nullopt, 1};
        if (node_distance(m, last, probe) > 1.5 * std::max(h, std::abs(hl)) || node_distance(m, last, probe) > br.step_cap)
          throw Error(ErrorCode::NoConvergence, "landing jumped");
        const auto var = variational(fam, o.base, o.period, *t_land, FlowTolerances::from(cfg));
        push(o.base, o.period, *t_land, var);
        if (o.period > p_max) br.status = BranchStatus::PeriodCapHit;
        else if (*t_land == t_target) br.status = dir > 0 ? BranchStatus::ReachedT1 : BranchStatus::ReachedT0;
        else br.status = *t_land == 1.0 ? BranchStatus::ReachedT1 : BranchStatus::ReachedT0;
        return br;
      } catch (const Error&) {
        h *= 0.5;
        continue;
      }
    }

    const Vec xp = m.wrap(m.retract(last.x + h * tan.dx));
    const auto c = detail::correct(fam, xp, last.p + h * tan.dp, t_pred, last, tan, h, cfg);
    if (!c || c->t < 0.0 || c->t > 1.0) {
      h *= 0.5;
      continue;
    }
    const BranchNode probe{c->x, c->p, c->t, std::nullopt, 1};
    const double dz = node_distance(m, last, probe);
    if (dz > 1.5 * h) {
      h *= 0.5;
      continue;
    }
    const BranchNode prev = last;
    push(c->x, c->p, c->t, c->var);
    if (c->p > p_max) {
      br.status = BranchStatus::PeriodCapHit;
      return br;
    }
    detail::Tangent sec{m.displacement(prev.x, c->x), c->p - prev.p, c->t - prev.t};
    sec.normalize();
    tan = sec;
    if (c->iters <= cfg.corrector_fast_iter) h = std::min(h * cfg.step_growth, cfg.step_max);
  }
}

// ---- admissibility -----------------------------------------------------------

enum class Verdict { PartiallyAdmissible, Admissible, SkyFlagged, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::PartiallyAdmissible: return "PartiallyAdmissible";
    case Verdict::Admissible: return "Admissible";
    case Verdict::SkyFlagged: return "SkyFlagged";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct BranchComponent {
  int id = 0;
  std::vector<int> branches;
  bool closed = true;        // every end reached t = 0 or 1 below P_max
  bool non_branching = true; // one orbit cluster in each end slice
};

struct AdmissibilityReport {
  std::string homotopy_label;
  double p_max = 0.0;
  std::vector<OrbitBranch> branches;
  std::vector<BranchComponent> components;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<int> sky_witnesses;
  bool both_ends = false;
};

struct SkyOptions {
  double sample_cap = 0.0;
  double p_max = 0.0;
  bool sample_t1 = true;
  std::optional<std::vector<int>> class_filter;
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

/// Same orbit at the same parameter, up to tol in (p, t) and orbit distance.
inline bool same_node_orbit(const VectorFieldFamily& fam, const BranchNode& a, const BranchNode& b, double tol,
                            const Config& cfg) {
  if (std::abs(a.t - b.t) > tol || std::abs(a.p - b.p) > tol * std::max(1.0, a.p)) return false;
  if (a.t < 0.0 || a.t > 1.0) return false;
  PeriodicOrbit ob;
  ob.base = b.x;
  ob.period = b.p;
  ob.param_t = b.t;
  ob.least_period = b.p / b.multiplicity;
  ob.multiplicity = b.multiplicity;
  const auto img = orbit_image(fam, ob, cfg.image_samples, cfg);
  return distance_to_orbit(fam, a.x, img, b.t, cfg, tol) <= tol;
}

}  // namespace detail

/// Samples S at t = 0 (and t = 1), continues every orbit across [0,1],
/// joins branches whose ends coincide, and renders the verdict.
inline AdmissibilityReport detect_sky(const VectorFieldFamily& fam, const std::vector<Vec>& seeds,
                                      const SkyOptions& opt, const Config& cfg = {}) {
  if (!(opt.sample_cap > 0 && opt.p_max > opt.sample_cap))
    throw Error(ErrorCode::InvalidArgument, "need 0 < sample_cap < P_max");
  AdmissibilityReport rep;
  rep.homotopy_label = fam.label;
  rep.p_max = opt.p_max;
  rep.both_ends = opt.sample_t1;

  struct Job {
    PeriodicOrbit start;
    double target;
  };
  std::vector<Job> jobs;
  auto collect = [&](double t, double target) {
    const auto set = sample_orbit_space(fam, t, opt.sample_cap, seeds, cfg);
    for (const auto& o : set.orbits)
      if (!opt.class_filter || o.class_tag == *opt.class_filter) jobs.push_back({o, target});
  };
  collect(0.0, 1.0);
  if (opt.sample_t1) collect(1.0, 0.0);

  rep.branches.resize(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    try {
      rep.branches[i] = continue_branch(fam, jobs[i].start, jobs[i].target, opt.p_max, cfg);
    } catch (const Error&) {
      OrbitBranch b;
      b.label = fam.label;
      b.status = BranchStatus::NewtonLost;
      b.nodes.push_back({jobs[i].start.base, jobs[i].start.period, jobs[i].start.param_t, std::nullopt,
                         jobs[i].start.multiplicity});
      b.arclength.push_back(0.0);
      rep.branches[i] = b;
    }
  });

  const int nb = static_cast<int>(rep.branches.size());
  detail::UnionFind uf(nb);
  for (int i = 0; i < nb; ++i)
    for (int j = i + 1; j < nb; ++j) {
      const auto& bi = rep.branches[static_cast<std::size_t>(i)];
      const auto& bj = rep.branches[static_cast<std::size_t>(j)];
      const BranchNode* ei[2] = {&bi.nodes.front(), &bi.nodes.back()};
      const BranchNode* ej[2] = {&bj.nodes.front(), &bj.nodes.back()};
      bool joined = false;
      for (auto* a : ei)
        for (auto* b : ej)
          if (!joined && detail::same_node_orbit(fam, *a, *b, cfg.reconnect_tol, cfg)) joined = true;
      if (joined) uf.unite(i, j);
    }

  std::vector<int> root_to_comp(static_cast<std::size_t>(nb), -1);
  for (int i = 0; i < nb; ++i) {
    const int r = uf.find(i);
    if (root_to_comp[static_cast<std::size_t>(r)] < 0) {
      root_to_comp[static_cast<std::size_t>(r)] = static_cast<int>(rep.components.size());
      rep.components.push_back({static_cast<int>(rep.components.size()), {}, true, true});
    }
    const int c = root_to_comp[static_cast<std::size_t>(r)];
    rep.branches[static_cast<std::size_t>(i)].component_id = c;
    rep.components[static_cast<std::size_t>(c)].branches.push_back(i);
  }

  bool lost = false;
  for (int i = 0; i < nb; ++i) {
    const auto& b = rep.branches[static_cast<std::size_t>(i)];
    auto& comp = rep.components[static_cast<std::size_t>(b.component_id)];
    if (b.status == BranchStatus::PeriodCapHit && b.nodes.back().t < 1.0) rep.sky_witnesses.push_back(i);
    if (b.status != BranchStatus::ReachedT0 && b.status != BranchStatus::ReachedT1) {
      comp.closed = false;
      if (b.status != BranchStatus::PeriodCapHit) lost = true;
    }
  }

  const double dedup_eps = cfg.dedup_rel * fam.manifold.diameter();
  for (auto& comp : rep.components) {
    for (double slice : {0.0, 1.0}) {
      std::vector<const BranchNode*> ends;
      for (int bi : comp.branches) {
        const auto& b = rep.branches[static_cast<std::size_t>(bi)];
        for (const auto* e : {&b.nodes.front(), &b.nodes.back()})
          if (e->t == slice) ends.push_back(e);
      }
      for (std::size_t k = 1; k < ends.size(); ++k)
        if (!detail::same_node_orbit(fam, *ends[0], *ends[k], std::max(dedup_eps, cfg.reconnect_tol), cfg))
          comp.non_branching = false;
    }
  }

  if (!rep.sky_witnesses.empty()) rep.verdict = Verdict::SkyFlagged;
  else if (lost) rep.verdict = Verdict::Inconclusive;
  else {
    bool closed = true;
    for (const auto& c : rep.components) closed = closed && c.closed;
    if (!closed) rep.verdict = Verdict::Inconclusive;
    else rep.verdict = opt.sample_t1 ? Verdict::Admissible : Verdict::PartiallyAdmissible;
  }
  return rep;
}

inline bool is_prime(int k) {
  if (k < 2) return false;
  for (int d = 2; d * d <= k; ++d)
    if (k % d == 0) return false;
  return true;
}

struct MultiplicityBound {
  int m_max = 1;
  int k = 2;
};

/// Largest multiplicity among branch nodes with p <= a and the smallest prime above it.
inline MultiplicityBound max_multiplicity(const AdmissibilityReport& rep, double a) {
  MultiplicityBound out{1, 2};
  for (const auto& b : rep.branches)
    for (const auto& nd : b.nodes)
      if (nd.p <= a) out.m_max = std::max(out.m_max, nd.multiplicity);
  out.k = out.m_max + 1;
  while (!is_prime(out.k)) ++out.k;
  return out;
}

}  // namespace fullerkit
