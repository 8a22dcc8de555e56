#pragma once

#include <cmath>
#include <string>

#include "fullerkit/geometry.hpp"
#include "fullerkit/reeb.hpp"

namespace fullerkit::gallery {

/// H(x) = (-x2, x1, -x4, x3), left multiplication by i on unit quaternions.
inline VectorFieldFamily hopf_field() {
  VectorFieldFamily fam{"hopf", EmbeddedManifold::sphere3(), nullptr, nullptr, nullptr};
  fam.field = [](const Vec& x, double) -> Vec {
    Vec v(4);
    v << -x(1), x(0), -x(3), x(2);
    return v;
  };
  fam.jacobian = [](const Vec&, double) -> Mat {
    Mat j = Mat::Zero(4, 4);
    j(0, 1) = -1;
    j(1, 0) = 1;
    j(2, 3) = -1;
    j(3, 2) = 1;
    return j;
  };
  fam.param_rate = [](const Vec&, double) -> Vec { return Vec::Zero(4); };
  return fam;
}

/// lambda_std = x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3 restricted to S^3.
inline ContactFormFamily standard_contact() {
  ContactFormFamily c{"lambda_std", EmbeddedManifold::sphere3(), nullptr, nullptr, nullptr, nullptr, nullptr};
  c.base_form = [](const Vec& x) -> Vec {
    Vec l(4);
    l << -x(1), x(0), -x(3), x(2);
    return l;
  };
  c.base_form_jacobian = [](const Vec&) -> Mat {
    Mat d = Mat::Zero(4, 4);  // d(i,j) = d lambda_j / d x_i
    d(1, 0) = -1;
    d(0, 1) = 1;
    d(3, 2) = -1;
    d(2, 3) = 1;
    return d;
  };
  c.factor = [](const Vec&, double) { return 1.0; };
  c.factor_gradient = [](const Vec&, double) -> Vec { return Vec::Zero(4); };
  c.factor_dt = [](const Vec&, double) { return 0.0; };
  return c;
}

/// lambda_t = (1 + eps t) lambda_std; Reeb field H / (1 + eps t).
inline ContactFormFamily hopf_rescale_contact(double eps = 0.1) {
  return rescaled(
      standard_contact(), [eps](double t) { return 1.0 + eps * t; }, [eps](double) { return eps; },
      "lambda_std*(1+" + std::to_string(eps) + "t)");
}

/// Constant (t-independent) Bourgeois perturbation levels with mu = mu0.
inline PerturbationSystem hopf_perturbed_system(int n_levels, double mu0) {
  return build_perturbation_system(standard_contact(), n_levels, hopf_height_function(),
                                   [mu0](int) { return mu0; }, {}, {}, false);
}

/// Solid torus, coordinates (u, v, phi). X_0 attracts radially to the circle
/// r = rho0 while turning with unit angular speed in the disk; phi' vanishes at
/// phi = 0 (saddle circle) and phi = pi (sink circle). X_t = s X_0 with
/// s = (1 - t) + t sigma, sigma = 0 exactly on the sink circle, so that
/// circle keeps period 2 pi / (1 - t).
struct BlueSkyParams {
  double kappa = 1.0;
  double rho0 = 0.5;
  double omega0 = 1.0;
  double eps = 0.2;
  double c = 2.0;
  double w = 0.3;
};

inline VectorFieldFamily blue_sky_torus(BlueSkyParams q = {}) {
  VectorFieldFamily fam{"blue-sky-torus", EmbeddedManifold::solid_torus(), nullptr, nullptr, nullptr};
  auto base = [q](const Vec& x) -> Vec {
    const double u = x(0), v = x(1), phi = x(2);
    const double r2 = u * u + v * v;
    const double g = -q.kappa * (r2 - q.rho0 * q.rho0);
    Vec out(3);
    out << g * u - q.omega0 * v, g * v + q.omega0 * u, q.eps * std::sin(phi) + q.c * (q.rho0 * q.rho0 - r2);
    return out;
  };
  auto sigma = [q](const Vec& x) {
    const double r2 = x(0) * x(0) + x(1) * x(1);
    const double cq = std::cos(0.5 * x(2));
    const double qq = (r2 - q.rho0 * q.rho0) * (r2 - q.rho0 * q.rho0) + cq * cq;
    return 1.0 - std::exp(-qq / (q.w * q.w));
  };
  fam.field = [base, sigma](const Vec& x, double t) -> Vec { return ((1.0 - t) + t * sigma(x)) * base(x); };
  fam.param_rate = [base, sigma](const Vec& x, double) -> Vec { return (sigma(x) - 1.0) * base(x); };
  return fam;
}

inline double blue_sky_sink_period(double t, const BlueSkyParams& q = {}) { return kTwoPi / (q.omega0 * (1.0 - t)); }

inline Vec blue_sky_sink_point(const BlueSkyParams& q = {}) {
  Vec x(3);
  x << q.rho0, 0.0, std::numbers::pi;
  return x;
}

inline Vec blue_sky_saddle_point(const BlueSkyParams& q = {}) {
  Vec x(3);
  x << q.rho0, 0.0, 0.0;
  return x;
}

/// Constant field (1, alpha) on T^2.
inline VectorFieldFamily torus_linear(double alpha) {
  VectorFieldFamily fam{"torus-linear", EmbeddedManifold::flat_torus(), nullptr, nullptr, nullptr};
  fam.field = [alpha](const Vec&, double) -> Vec {
    Vec v(2);
    v << 1.0, alpha;
    return v;
  };
  fam.jacobian = [](const Vec&, double) -> Mat { return Mat::Zero(2, 2); };
  fam.param_rate = [](const Vec&, double) -> Vec { return Vec::Zero(2); };
  return fam;
}

/// Fixed generic skew matrix used for the C^0-near perturbation.
inline Mat c0_skew() {
  Mat b(4, 4);
  b << 0.0, 0.3, 1.0, 0.2,
      -0.3, 0.0, -0.5, 0.7,
      -1.0, 0.5, 0.0, 0.4,
      -0.2, -0.7, -0.4, 0.0;
  return b;
}

/// H + delta B x with B skew, tangent to S^3 and linear.
inline VectorFieldFamily hopf_c0_near(double delta) {
  auto fam = hopf_field();
  fam.label = "hopf-c0-near(" + std::to_string(delta) + ")";
  const Mat a = fam.jacobian(Vec::Zero(4), 0.0) + delta * c0_skew();
  fam.field = [a](const Vec& x, double) -> Vec { return a * x; };
  fam.jacobian = [a](const Vec&, double) -> Mat { return a; };
  return fam;
}

/// Loop distance from an orbit image to the Hopf fiber through its first point.
inline double hopf_fiber_distance(const std::vector<Vec>& image) {
  const Vec& b = image.front();
  double worst = 0.0;
  for (const auto& y : image) {
    // complex inner product <b, y> with z1 = x1 + i x2, z2 = x3 + i x4
    const double re = b(0) * y(0) + b(1) * y(1) + b(2) * y(2) + b(3) * y(3);
    const double im = b(0) * y(1) - b(1) * y(0) + b(2) * y(3) - b(3) * y(2);
    worst = std::max(worst, std::sqrt(std::max(0.0, 2.0 - 2.0 * std::hypot(re, im))));
  }
  return worst;
}

}  // namespace fullerkit::gallery
