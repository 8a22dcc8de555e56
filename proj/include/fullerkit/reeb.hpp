#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fullerkit/config.hpp"
#include "fullerkit/continuation.hpp"
#include "fullerkit/flow.hpp"
#include "fullerkit/geometry.hpp"
#include "fullerkit/orbits.hpp"

namespace fullerkit {

/// Reeb vector of lambda_t at x on M: lambda_t(R) = 1 and d lambda_t(R, v) = 0
/// for tangent v, solved by least squares in a tangent basis.
inline Vec reeb_vector(const ContactFormFamily& c, const Vec& x, double t, double fd_h = 1e-6) {
  const Mat T = c.manifold.tangent_basis(x);
  const int d = static_cast<int>(T.cols());
  const Vec a = c.form(x, t);
  const Mat W = c.dform(x, t, fd_h);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> A(d + 1, d);
  A.row(0) = (T.transpose() * a).transpose();
  A.bottomRows(d) = T.transpose() * W * T;
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1> b = decltype(b)::Zero(d + 1);
  b(0) = 1.0;
  const Vec coef = A.colPivHouseholderQr().solve(b);
  const double res = (A * coef - b).norm();
  if (!(res <= 1e-9)) throw Error(ErrorCode::DegenerateContact, "Reeb system residual " + std::to_string(res));
  return T * coef;
}

/// Reeb field family of a contact form family, extended off M for the integrator.
inline VectorFieldFamily reeb_family(const ContactFormFamily& c, std::string label = {}, double fd_h = 1e-6) {
  VectorFieldFamily fam{label.empty() ? "reeb(" + c.label + ")" : std::move(label), c.manifold, nullptr, nullptr,
                        nullptr};
  fam.field = [c, fd_h](const Vec& y, double t) -> Vec {
    const Vec x = c.manifold.retract(y);
    return c.manifold.extend_tangent(y, reeb_vector(c, x, t, fd_h));
  };
  return fam;
}

struct ReebDefect {
  double normalization = 0.0;  // |lambda_t(R) - 1|
  double kernel = 0.0;         // max_v |d lambda_t(R, v)| / |v| over a tangent basis
};

inline ReebDefect reeb_defect(const ContactFormFamily& c, const Vec& x, const Vec& r, double t) {
  const Mat T = c.manifold.tangent_basis(x);
  ReebDefect out;
  out.normalization = std::abs(c.form(x, t).dot(r) - 1.0);
  out.kernel = (T.transpose() * c.dform(x, t).transpose() * r).cwiseAbs().maxCoeff();
  return out;
}

/// Line integral of lambda_t along the orbit over its full period
/// (composite 5-point Gauss-Legendre on the flowed samples).
inline double action(const VectorFieldFamily& fam, const PeriodicOrbit& o, const ContactFormFamily& c,
                     const Config& cfg = {}) {
  static constexpr std::array<double, 5> node{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> weight{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                0.4786286704993665, 0.2369268850561891};
  const int segs = std::max(16, static_cast<int>(std::ceil(o.period / 0.25)));
  const double hseg = o.period / segs;
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(segs) * 5);
  for (int s = 0; s < segs; ++s)
    for (double nd : node) times.push_back(hseg * (s + 0.5 * (nd + 1.0)));
  const auto pts = flow_samples(fam, o.base, times, o.param_t, FlowTolerances::from(cfg));
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec x = fam.manifold.retract(pts[i]);
    sum += weight[i % 5] * 0.5 * hseg * c.form(x, o.param_t).dot(fam.field(x, o.param_t));
  }
  return sum;
}

/// Contact form family with the factor multiplied by g(t).
inline ContactFormFamily rescaled(ContactFormFamily c, std::function<double(double)> g,
                                  std::function<double(double)> g_rate, std::string label) {
  const auto base = c;
  c.label = std::move(label);
  c.factor = [base, g](const Vec& x, double t) { return g(t) * base.factor(x, t); };
  c.factor_gradient = [base, g](const Vec& x, double t) -> Vec { return g(t) * base.factor_gradient(x, t); };
  c.factor_dt = [base, g, g_rate](const Vec& x, double t) {
    return g_rate(t) * base.factor(x, t) + g(t) * base.factor_dt(x, t);
  };
  return c;
}

/// Smooth function on an embedded manifold with its ambient gradient.
struct ScalarFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

struct PerturbationLevel {
  double E = 0.0;          // cap below which X^a = Reeb((1 + mu f) lambda) is used
  double mu = 0.0;
  int halvings = 0;
  bool validated = false;
  bool degenerate = false;  // Morse-Bott family persisted (mu = 0)
  int orbit_count = 0;
  double min_abs_det = 0.0;
};

/// Per-cap nondegenerate perturbations (1 + mu f) lambda of a t-independent
/// contact form, and the structure homotopies s -> (1 + (1-s) mu f) lambda.
struct PerturbationSystem {
  ContactFormFamily base;
  ScalarFunction f;
  std::vector<PerturbationLevel> levels;

  ContactFormFamily structure_homotopy(std::size_t level) const {
    const double mu = levels.at(level).mu;
    ContactFormFamily c = base;
    c.label = base.label + "+mu*f[E=" + std::to_string(levels[level].E) + "]";
    const auto b = base;
    const auto ff = f;
    c.factor = [b, ff, mu](const Vec& x, double s) { return (1.0 + (1.0 - s) * mu * ff.value(x)) * b.factor(x, 0.0); };
    c.factor_gradient = [b, ff, mu](const Vec& x, double s) -> Vec {
      const double g = 1.0 + (1.0 - s) * mu * ff.value(x);
      return g * b.factor_gradient(x, 0.0) + (1.0 - s) * mu * b.factor(x, 0.0) * ff.gradient(x);
    };
    c.factor_dt = [b, ff, mu](const Vec& x, double) { return -mu * ff.value(x) * b.factor(x, 0.0); };
    return c;
  }

  /// The perturbed form of a level, constant in t.
  ContactFormFamily contact(std::size_t level) const {
    const auto h = structure_homotopy(level);
    ContactFormFamily c = h;
    c.factor = [h](const Vec& x, double) { return h.factor(x, 0.0); };
    c.factor_gradient = [h](const Vec& x, double) -> Vec { return h.factor_gradient(x, 0.0); };
    c.factor_dt = [](const Vec&, double) { return 0.0; };
    return c;
  }

  VectorFieldFamily field(std::size_t level) const {
    auto fam = reeb_family(contact(level));
    const int n = base.manifold.ambient_dim();
    fam.param_rate = [n](const Vec&, double) -> Vec { return Vec::Zero(n); };
    return fam;
  }

  std::size_t level_for_cap(double a) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i].E > a) return i;
    throw Error(ErrorCode::InvalidArgument, "cap " + std::to_string(a) + " exceeds the top level");
  }
};

/// h(z1, z2) = |z1|^2 - |z2|^2 pulled back from the height on CP^1 and
/// multiplied by a radial cutoff that is 1 on a tube around the sphere.
inline ScalarFunction hopf_height_function() {
  auto chi = [](double r, double& dchi) {
    const double u = std::abs(r - 1.0);
    if (u <= 0.25) {
      dchi = 0.0;
      return 1.0;
    }
    if (u >= 0.5) {
      dchi = 0.0;
      return 0.0;
    }
    const double s = (0.5 - u) / 0.25;  // 0 at the outer edge
    const double v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    const double dv = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    dchi = dv * (-1.0 / 0.25) * (r > 1.0 ? 1.0 : -1.0);
    return v;
  };
  ScalarFunction f;
  f.value = [chi](const Vec& x) {
    const double r2 = x.squaredNorm();
    double dc = 0.0;
    const double c = chi(std::sqrt(r2), dc);
    return c * (x(0) * x(0) + x(1) * x(1) - x(2) * x(2) - x(3) * x(3)) / r2;
  };
  f.gradient = [chi](const Vec& x) -> Vec {
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    double dc = 0.0;
    const double c = chi(r, dc);
    const double h = x(0) * x(0) + x(1) * x(1) - x(2) * x(2) - x(3) * x(3);
    Vec gh(4);
    gh << 2 * x(0), 2 * x(1), -2 * x(2), -2 * x(3);
    const Vec g0 = gh / r2 - 2.0 * h * x / (r2 * r2);
    return c * g0 + dc * (h / r2) * x / r;
  };
  return f;
}

/// Orbit of the perturbed Hopf Reeb field sits on a critical fiber of h.
inline bool on_critical_hopf_fiber(const Vec& x, double tol = 1e-6) {
  return std::min(std::hypot(x(0), x(1)), std::hypot(x(2), x(3))) <= tol;
}

/// Levels 2 pi (n + 1/2), n = 1..n_levels, with mu(E_n) from the schedule.
/// Validation samples each level and halves mu until the orbits below E_n are
/// 2n nondegenerate orbits on the critical fibers.
inline PerturbationSystem build_perturbation_system(const ContactFormFamily& base, int n_levels,
                                                    const ScalarFunction& morse,
                                                    const std::function<double(int)>& mu_schedule,
                                                    const std::vector<Vec>& seeds, const Config& cfg = {},
                                                    bool validate = true) {
  if (n_levels < 1) throw Error(ErrorCode::InvalidArgument, "need at least one level");
  PerturbationSystem sys{base, morse, {}};
  double prev_mu = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_levels; ++n) {
    const double mu = mu_schedule(n);
    if (!(mu >= 0.0) || mu > prev_mu)
      throw Error(ErrorCode::InvalidArgument, "mu schedule must be non-negative and non-increasing");
    prev_mu = mu;
    sys.levels.push_back({kTwoPi * (n + 0.5), mu, 0, false, false, 0, 0.0});
  }
  if (!validate) return sys;

  for (std::size_t i = 0; i < sys.levels.size(); ++i) {
    auto& lev = sys.levels[i];
    const int expected = 2 * static_cast<int>(i + 1);
    for (;;) {
      const auto set = sample_orbit_space(sys.field(i), 0.0, lev.E, seeds, cfg);
      lev.orbit_count = static_cast<int>(set.orbits.size());
      lev.min_abs_det = std::numeric_limits<double>::infinity();
      bool ok = lev.orbit_count == expected;
      for (const auto& o : set.orbits) {
        lev.min_abs_det = std::min(lev.min_abs_det, std::abs(o.det_i_minus_a));
        ok = ok && !o.morse_bott_suspect && on_critical_hopf_fiber(o.base);
      }
      if (lev.mu == 0.0) {
        lev.degenerate = set.morse_bott_suspect || set.orbits.empty();
        break;
      }
      if (ok) {
        lev.validated = true;
        break;
      }
      if (lev.halvings >= cfg.mu_retries)
        throw Error(ErrorCode::MuTooLarge, "level " + std::to_string(i + 1) + " still degenerate after " +
                                               std::to_string(lev.halvings) + " halvings",
                    {{"level", i + 1}, {"mu", lev.mu}, {"orbits", lev.orbit_count}});
      lev.mu *= 0.5;
      ++lev.halvings;
      for (std::size_t j = i + 1; j < sys.levels.size(); ++j) sys.levels[j].mu = std::min(sys.levels[j].mu, lev.mu);
    }
  }
  return sys;
}

struct GrowthBoundReport {
  double K = 0.0;          // max |d f_t / dt| * max f_t over the net
  double L = 0.0;          // sum |dt| along the branch
  double bound = 1.0;      // exp(L K)
  double measured = 0.0;   // sum |dp| / max p
  double ratio = 0.0;      // measured / bound
  double worst_pair = 0.0; // max over node pairs of log(p_j / p_i) - K L_ij
  bool pairwise_ok = true;
  bool pass = false;
  int net_size = 0;
};

/// Estimate of K = max |df/dt| * max f on a space-time net that includes t = 0 and t = 1.
inline double estimate_growth_constant(const ContactFormFamily& c, int net_size) {
  const int t_levels = 11;
  const int pts = std::max(1, net_size / t_levels);
  double max_rate = 0.0, max_f = 0.0;
  for (const auto& [x, t] : space_time_net(c.manifold, pts, t_levels)) {
    max_rate = std::max(max_rate, std::abs(c.factor_dt(x, t)));
    max_f = std::max(max_f, c.factor(x, t));
  }
  return max_rate * max_f;
}

/// Period growth along a Reeb branch against exp(L K). `k_scale` multiplies
/// the estimated K (1 for the real check).
inline GrowthBoundReport growth_bound_check(const OrbitBranch& branch, const VectorFieldFamily& fam,
                                            const ContactFormFamily& contact, const Config& cfg = {},
                                            double k_scale = 1.0) {
  if (fam.manifold.kind() != contact.manifold.kind() || branch.nodes.empty())
    throw Error(ErrorCode::NotReebBranch, "branch and contact form live on different manifolds");
  for (const auto& nd : branch.nodes) {
    const Vec x = fam.manifold.retract(nd.x);
    const auto def = reeb_defect(contact, x, fam.field(x, nd.t), nd.t);
    if (def.normalization > 1e-6 || def.kernel > 1e-6)
      throw Error(ErrorCode::NotReebBranch, "node is not on a Reeb orbit of the form",
                  {{"t", nd.t}, {"normalization_defect", def.normalization}, {"kernel_defect", def.kernel}});
  }
  GrowthBoundReport r;
  r.net_size = cfg.growth_net;
  r.K = k_scale * estimate_growth_constant(contact, cfg.growth_net);
  double pmax = 0.0, var = 0.0;
  for (std::size_t i = 0; i < branch.nodes.size(); ++i) {
    pmax = std::max(pmax, branch.nodes[i].p);
    if (i > 0) {
      r.L += std::abs(branch.nodes[i].t - branch.nodes[i - 1].t);
      var += std::abs(branch.nodes[i].p - branch.nodes[i - 1].p);
    }
  }
  r.bound = std::exp(r.L * r.K);
  r.measured = pmax > 0 ? var / pmax : 0.0;
  r.ratio = r.measured / r.bound;
  const double slack = std::log1p(cfg.growth_slack);
  r.worst_pair = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < branch.nodes.size(); ++i) {
    double lij = 0.0;
    for (std::size_t j = i + 1; j < branch.nodes.size(); ++j) {
      lij += std::abs(branch.nodes[j].t - branch.nodes[j - 1].t);
      const double g = std::abs(std::log(branch.nodes[j].p / branch.nodes[i].p)) - r.K * lij;
      r.worst_pair = std::max(r.worst_pair, g);
    }
  }
  if (branch.nodes.size() < 2) r.worst_pair = 0.0;
  r.pairwise_ok = r.worst_pair <= slack;
  r.pass = r.measured <= r.bound * (1.0 + cfg.growth_slack) && r.pairwise_ok;
  return r;
}

}  // namespace fullerkit
