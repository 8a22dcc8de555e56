#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fullerkit/error.hpp"

namespace fullerkit {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kMaxDim = 4;

// Ambient dimensions of the built-in manifolds never exceed 4, so points and
// Jacobians live on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

inline double wrap_signed(double a) {
  a = std::remainder(a, kTwoPi);
  return a;
}

/// Compact manifold cut out of R^n by equations, plus (for tori) angle
/// coordinates that are identified mod 2*pi.
///
///  - Sphere:     S^3 = {|x|^2 = 1} in R^4, frame (i x, j x, k x).
///  - FlatTorus:  T^2 with angle coordinates (a1, a2), no constraint.
///  - SolidTorus: D^2 x S^1 with coordinates (u, v, phi), u^2+v^2 <= 1.
///
/// Points are integrated unwrapped (the retraction does not reduce angles) so
/// winding numbers can be read off trajectories; `wrap` gives the canonical
/// representative.
class EmbeddedManifold {
 public:
  enum class Kind { Sphere, FlatTorus, SolidTorus };

  static EmbeddedManifold sphere3(double metric_tol = 1e-9) {
    return EmbeddedManifold(Kind::Sphere, "S3", 4, 3, {false, false, false, false}, metric_tol);
  }
  static EmbeddedManifold flat_torus(double metric_tol = 1e-9) {
    return EmbeddedManifold(Kind::FlatTorus, "T2", 2, 2, {true, true, false, false}, metric_tol);
  }
  static EmbeddedManifold solid_torus(double metric_tol = 1e-9) {
    return EmbeddedManifold(Kind::SolidTorus, "D2xS1", 3, 3, {false, false, true, false}, metric_tol);
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int ambient_dim() const { return ambient_; }
  int dim() const { return dim_; }
  int codim() const { return ambient_ - dim_; }
  double metric_tol() const { return metric_tol_; }
  bool periodic(int i) const { return periodic_[static_cast<std::size_t>(i)]; }
  bool has_periodic_coords() const {
    for (int i = 0; i < ambient_; ++i)
      if (periodic(i)) return true;
    return false;
  }

  double diameter() const {
    switch (kind_) {
      case Kind::Sphere: return 2.0;
      case Kind::FlatTorus: return std::numbers::pi * std::sqrt(2.0);
      case Kind::SolidTorus: return std::sqrt(4.0 + std::numbers::pi * std::numbers::pi);
    }
    return 1.0;
  }

  /// Values whose zero level set is M (empty for the tori).
  Vec constraint(const Vec& x) const {
    Vec c(codim());
    if (kind_ == Kind::Sphere) c(0) = x.squaredNorm() - 1.0;
    return c;
  }

  Mat constraint_gradient(const Vec& x) const {
    Mat g(codim(), ambient_);
    if (kind_ == Kind::Sphere) g = 2.0 * x.transpose();
    return g;
  }

  /// Distance-like membership defect; the solid torus also counts overshoot of
  /// the boundary circle.
  double residual(const Vec& x) const {
    if (x.size() != ambient_) return std::numeric_limits<double>::infinity();
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    switch (kind_) {
      case Kind::Sphere: return std::abs(x.squaredNorm() - 1.0);
      case Kind::FlatTorus: return 0.0;
      case Kind::SolidTorus: return std::max(0.0, std::hypot(x(0), x(1)) - 1.0);
    }
    return 0.0;
  }

  bool contains(const Vec& x) const { return residual(x) <= metric_tol_; }

  void require_on(const Vec& x) const {
    if (!contains(x))
      throw Error(ErrorCode::OffManifold,
                  "point off " + name_ + " (residual " + std::to_string(residual(x)) + ")");
  }

  Vec retract(const Vec& y) const {
    if (kind_ == Kind::Sphere) return y / y.norm();
    return y;
  }

  Vec wrap(const Vec& x) const {
    Vec w = x;
    for (int i = 0; i < ambient_; ++i)
      if (periodic(i)) w(i) = wrap_angle(w(i));
    return w;
  }

  /// b - a with angle coordinates reduced to (-pi, pi].
  Vec displacement(const Vec& a, const Vec& b) const {
    Vec d = b - a;
    for (int i = 0; i < ambient_; ++i)
      if (periodic(i)) d(i) = wrap_signed(d(i));
    return d;
  }

  double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }

  /// Integer winding of an unwrapped path from `a` to `b` along each periodic
  /// coordinate (empty for the sphere).
  std::vector<int> winding(const Vec& a, const Vec& b) const {
    std::vector<int> w;
    for (int i = 0; i < ambient_; ++i)
      if (periodic(i)) w.push_back(static_cast<int>(std::lround((b(i) - a(i)) / kTwoPi)));
    return w;
  }

  /// Orthonormal basis of T_x M as columns (ambient x dim).
  Mat tangent_basis(const Vec& x) const {
    if (kind_ == Kind::Sphere) {
      const Vec q = x / x.norm();
      Mat t(4, 3);
      t.col(0) << -q(1), q(0), -q(3), q(2);   // i q
      t.col(1) << -q(2), q(3), q(0), -q(1);   // j q
      t.col(2) << -q(3), -q(2), q(1), q(0);   // k q
      return t;
    }
    return Mat::Identity(ambient_, ambient_);
  }

  Mat tangent_projector(const Vec& x) const {
    if (kind_ == Kind::Sphere) {
      const Vec q = x / x.norm();
      return Mat::Identity(4, 4) - q * q.transpose();
    }
    return Mat::Identity(ambient_, ambient_);
  }

  /// Extends a tangent vector computed at retract(y) to the ambient point y so
  /// that the extended field is tangent to every level set of the constraint
  /// (degree-one homogeneous on the sphere). Flows of extended fields then
  /// preserve M exactly and their linearizations map T_xM to T_yM.
  Vec extend_tangent(const Vec& y, const Vec& v) const {
    if (kind_ == Kind::Sphere) return v * y.norm();
    return v;
  }

  /// Deterministic low-discrepancy net (Halton, bases 2, 3, 5) of `count`
  /// points on M.
  std::vector<Vec> sample_net(int count) const {
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int n = 1; n <= count; ++n) {
      const double u1 = halton(n, 2), u2 = halton(n, 3), u3 = halton(n, 5);
      Vec x(ambient_);
      switch (kind_) {
        case Kind::Sphere: {
          const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
          x << a * std::sin(kTwoPi * u2), a * std::cos(kTwoPi * u2), b * std::sin(kTwoPi * u3),
              b * std::cos(kTwoPi * u3);
          break;
        }
        case Kind::FlatTorus: x << kTwoPi * u1, kTwoPi * u2; break;
        case Kind::SolidTorus: {
          const double r = 0.9 * std::sqrt(u1);
          x << r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2), kTwoPi * u3;
          break;
        }
      }
      pts.push_back(x);
    }
    return pts;
  }

  static double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
      f /= base;
      r += f * (index % base);
      index /= base;
    }
    return r;
  }

 private:
  EmbeddedManifold(Kind kind, std::string name, int ambient, int dim, std::array<bool, kMaxDim> periodic,
                   double metric_tol)
      : kind_(kind), name_(std::move(name)), ambient_(ambient), dim_(dim), periodic_(periodic),
        metric_tol_(metric_tol) {}

  Kind kind_;
  std::string name_;
  int ambient_;
  int dim_;
  std::array<bool, kMaxDim> periodic_;
  double metric_tol_;
};

/// Smooth family {X_t}, t in [0,1], of tangent fields on a manifold. `field` is
/// the ambient extension used by the integrator; `jacobian` and `param_rate`
/// are optional closed forms (central differences otherwise).
struct VectorFieldFamily {
  using Field = std::function<Vec(const Vec&, double)>;
  using Jacobian = std::function<Mat(const Vec&, double)>;

  std::string label;
  EmbeddedManifold manifold;
  Field field;
  Jacobian jacobian;
  Field param_rate;

  /// Checked evaluation.
  Vec eval(const Vec& x, double t) const {
    manifold.require_on(x);
    if (!(t >= 0.0 && t <= 1.0))
      throw Error(ErrorCode::ParamOutOfRange, "t=" + std::to_string(t) + " outside [0,1]");
    return field(x, t);
  }

  Vec raw(const Vec& x, double t) const { return field(x, t); }

  /// Ambient Jacobian DX_t at x: closed form if registered, central
  /// differences with step h otherwise.
  Mat jac(const Vec& x, double t, double h) const {
    if (jacobian) return jacobian(x, t);
    const int n = static_cast<int>(x.size());
    Mat j(n, n);
    Vec xp = x, xm = x;
    for (int i = 0; i < n; ++i) {
      xp(i) = x(i) + h;
      xm(i) = x(i) - h;
      j.col(i) = (field(xp, t) - field(xm, t)) / (2.0 * h);
      xp(i) = x(i);
      xm(i) = x(i);
    }
    return j;
  }

  /// d/dt X_t(x).
  Vec dt(const Vec& x, double t, double h) const {
    if (param_rate) return param_rate(x, t);
    return (field(x, t + h) - field(x, t - h)) / (2.0 * h);
  }
};

/// Scales a family by a constant factor (period divides by the factor).
inline VectorFieldFamily scaled(VectorFieldFamily fam, std::function<double(double)> factor,
                                std::function<double(double)> factor_rate, std::string label) {
  auto base = fam;
  fam.label = std::move(label);
  fam.field = [base, factor](const Vec& x, double t) -> Vec { return factor(t) * base.field(x, t); };
  if (base.jacobian)
    fam.jacobian = [base, factor](const Vec& x, double t) -> Mat { return factor(t) * base.jacobian(x, t); };
  else
    fam.jacobian = nullptr;
  fam.param_rate = [base, factor, factor_rate](const Vec& x, double t) -> Vec {
    Vec r = factor_rate(t) * base.field(x, t);
    if (base.param_rate) r += factor(t) * base.param_rate(x, t);
    return r;
  };
  return fam;
}

/// Family frozen at parameter t0.
inline VectorFieldFamily frozen(const VectorFieldFamily& fam, double t0) {
  VectorFieldFamily out = fam;
  out.label = fam.label + "@t=" + std::to_string(t0);
  out.field = [fam, t0](const Vec& x, double) -> Vec { return fam.field(x, t0); };
  if (fam.jacobian)
    out.jacobian = [fam, t0](const Vec& x, double) -> Mat { return fam.jacobian(x, t0); };
  else
    out.jacobian = nullptr;
  out.param_rate = [n = fam.manifold.ambient_dim()](const Vec&, double) -> Vec { return Vec::Zero(n); };
  return out;
}

/// Contact form family lambda_t = f_t * lambda on a 3-manifold.
/// `base_form_jacobian(x)(i,j)` = d lambda_j / d x_i.
struct ContactFormFamily {
  std::string label;
  EmbeddedManifold manifold;
  std::function<Vec(const Vec&)> base_form;
  std::function<Mat(const Vec&)> base_form_jacobian;
  std::function<double(const Vec&, double)> factor;
  std::function<Vec(const Vec&, double)> factor_gradient;
  std::function<double(const Vec&, double)> factor_dt;

  Vec form(const Vec& x, double t) const { return factor(x, t) * base_form(x); }

  /// Matrix W of d(lambda_t): d lambda_t(u, v) = u^T W v.
  Mat dform(const Vec& x, double t, double h = 1e-6) const {
    const int n = static_cast<int>(x.size());
    Mat d(n, n);  // d(i,j) = d alpha_j / d x_i
    if (base_form_jacobian && factor_gradient) {
      const Vec lam = base_form(x);
      d = factor(x, t) * base_form_jacobian(x) + factor_gradient(x, t) * lam.transpose();
    } else {
      Vec xp = x, xm = x;
      for (int i = 0; i < n; ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        d.row(i) = ((form(xp, t) - form(xm, t)) / (2.0 * h)).transpose();
        xp(i) = x(i);
        xm(i) = x(i);
      }
    }
    return d - d.transpose();
  }
};

struct NonsingularCertificate {
  double min_norm = std::numeric_limits<double>::infinity();
  Vec witness_x;
  double witness_t = 0.0;
};

inline Vec eval_field(const VectorFieldFamily& fam, const Vec& x, double t) { return fam.eval(x, t); }

inline NonsingularCertificate check_nonsingular(const VectorFieldFamily& fam,
                                                const std::vector<std::pair<Vec, double>>& net) {
  if (net.empty()) throw Error(ErrorCode::EmptyNet, "empty sample net");
  NonsingularCertificate cert;
  for (const auto& [x, t] : net) {
    const double n = fam.eval(x, t).norm();
    if (n < cert.min_norm) {
      cert.min_norm = n;
      cert.witness_x = x;
      cert.witness_t = t;
    }
  }
  return cert;
}

/// Cartesian product of a manifold net with a uniform t-grid on [0, t_max].
inline std::vector<std::pair<Vec, double>> space_time_net(const EmbeddedManifold& m, int points, int t_levels,
                                                          double t_max = 1.0) {
  std::vector<std::pair<Vec, double>> net;
  const auto pts = m.sample_net(points);
  for (int k = 0; k < t_levels; ++k) {
    const double t = t_levels == 1 ? 0.0 : t_max * k / (t_levels - 1);
    for (const auto& p : pts) net.emplace_back(p, t);
  }
  return net;
}

}  // namespace fullerkit
