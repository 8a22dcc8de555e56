#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fullerkit/config.hpp"
#include "fullerkit/geometry.hpp"

namespace fullerkit {

struct FlowSample {
  double s;
  Vec x;
};

struct FlowResult {
  Vec endpoint;                             // unwrapped
  std::optional<std::vector<FlowSample>> trajectory;
  long steps = 0;
  double est_error = 0.0;                   // largest accepted normalized error
};

/// Ambient linearization of the flow map and (optionally) its restriction to a
/// declared subspace, expressed in a chosen basis.
struct Monodromy {
  Mat matrix;
  Mat restricted;  // empty unless built from a periodic orbit
};

/// Flow map together with its derivatives: V = dF/dx, W = dF/dt.
struct Variational {
  Vec endpoint;
  Mat V;
  Vec W;
  long steps = 0;
};

struct FlowTolerances {
  double rtol;
  double atol;
  long max_steps;
  double jac_h;
  double param_h;

  static FlowTolerances from(const Config& c) {
    return {c.rtol, c.atol, c.max_steps, c.jacobian_fd_step, c.param_fd_step};
  }
  FlowTolerances with_rtol(double r) const {
    auto out = *this;
    out.rtol = r;
    out.atol = std::min(atol, r * 1e-2);
    return out;
  }
};

namespace detail {

inline constexpr int kMaxPack = kMaxDim + kMaxDim * kMaxDim + kMaxDim;
using Pack = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxPack, 1>;

enum class Mode { State, Variational, VariationalWithParam };

/// Dormand-Prince 5(4) on the state packed as [x; vec(V); W], with the point
/// re-retracted onto M after every accepted step. Stops exactly at each entry
/// of `stops` (ascending |s|, signed like the last stop) and hands the packed
/// state to `on_stop`.
class Dopri {
 public:
  Dopri(const VectorFieldFamily& fam, double t, Mode mode, const FlowTolerances& tol)
      : fam_(fam), t_(t), mode_(mode), tol_(tol), n_(fam.manifold.ambient_dim()) {}

  int pack_size() const {
    switch (mode_) {
      case Mode::State: return n_;
      case Mode::Variational: return n_ + n_ * n_;
      case Mode::VariationalWithParam: return n_ + n_ * n_ + n_;
    }
    return n_;
  }

  Pack initial(const Vec& x) const {
    Pack y = Pack::Zero(pack_size());
    y.head(n_) = x;
    if (mode_ != Mode::State) {
      for (int i = 0; i < n_; ++i) y(n_ + i * n_ + i) = 1.0;
    }
    return y;
  }

  Pack rhs(const Pack& y) const {
    Pack d(y.size());
    const Vec x = y.head(n_);
    const Vec fx = fam_.field(x, t_);
    d.head(n_) = fx;
    if (mode_ == Mode::State) return d;
    const Mat J = fam_.jac(x, t_, tol_.jac_h);
    Eigen::Map<const Eigen::MatrixXd> V(y.data() + n_, n_, n_);
    Eigen::Map<Eigen::MatrixXd> dV(d.data() + n_, n_, n_);
    dV.noalias() = J * V;
    if (mode_ == Mode::VariationalWithParam) {
      const Vec W = y.segment(n_ + n_ * n_, n_);
      d.segment(n_ + n_ * n_, n_) = J * W + fam_.dt(x, t_, tol_.param_h);
    }
    return d;
  }

  template <class OnStop>
  long run(Pack& y, std::span<const double> stops, OnStop&& on_stop, double* max_err = nullptr) {
    if (stops.empty()) return 0;
    const double dir = stops.back() < 0 ? -1.0 : 1.0;
    double s = 0.0;
    long steps = 0;
    std::size_t next = 0;
    while (next < stops.size() && stops[next] == 0.0) on_stop(next++, 0.0, y);
    if (next == stops.size()) return 0;

    Pack k1 = rhs(y);
    double h = dir * initial_step(y, k1, std::abs(stops.back()));
    double worst = 0.0;
    while (next < stops.size()) {
      const double target = stops[next];
      const double remaining = target - s;
      bool clipped = false;
      double h_try = h;
      if (std::abs(h_try) >= std::abs(remaining)) {
        h_try = remaining;
        clipped = true;
      }
      if (std::abs(h_try) < 1e-14 * std::max(1.0, std::abs(s)))
        throw Error(ErrorCode::StepSizeUnderflow, "step size underflow at s=" + std::to_string(s));
      if (++steps > tol_.max_steps) throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted");

      Pack y5, err;
      Pack k7 = step(y, k1, h_try, y5, err);
      const double e = error_norm(y, y5, err);
      if (e <= 1.0) {
        worst = std::max(worst, e);
        s = clipped ? target : s + h_try;
        y = y5;
        const Vec x = fam_.manifold.retract(Vec(y.head(n_)));
        const bool moved = (x - y.head(n_)).squaredNorm() > 0.0;
        y.head(n_) = x;
        k1 = moved ? rhs(y) : k7;
        while (next < stops.size() && stops[next] == s) on_stop(next++, s, y);
        const double fac = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
        if (!clipped || std::abs(h_try * fac) > std::abs(h)) h = h_try * fac;
      } else {
        h = h_try * std::clamp(0.9 * std::pow(e, -0.2), 0.1, 0.9);
      }
    }
    if (max_err) *max_err = worst;
    return steps;
  }

 private:
  double initial_step(const Pack& y, const Pack& f, double span) const {
    double sc = 0.0, fn = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      const double w = tol_.atol + tol_.rtol * std::abs(y(i));
      sc = std::max(sc, std::abs(y(i)) / w);
      fn = std::max(fn, std::abs(f(i)) / w);
    }
    double h = (sc < 1e-5 || fn < 1e-5) ? 1e-4 : 0.01 * sc / fn;
    h = std::min(h, 0.1 * std::pow(tol_.rtol, 0.2));
    return std::min(h, span);
  }

  double error_norm(const Pack& y0, const Pack& y1, const Pack& err) const {
    double acc = 0.0;
    for (int i = 0; i < y0.size(); ++i) {
      const double sc = tol_.atol + tol_.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
      const double r = err(i) / sc;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(y0.size()));
  }

  Pack step(const Pack& y, const Pack& k1, double h, Pack& y5, Pack& err) const {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                            a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                            b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    const Pack k2 = rhs(y + h * (a21 * k1));
    const Pack k3 = rhs(y + h * (a31 * k1 + a32 * k2));
    const Pack k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Pack k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Pack k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Pack k7 = rhs(y5);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return k7;
  }

  const VectorFieldFamily& fam_;
  double t_;
  Mode mode_;
  FlowTolerances tol_;
  int n_;
};

inline Mat unpack_V(const Pack& y, int n) {
  Mat V(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) V(i, j) = y(n + j * n + i);
  return V;
}

}  // namespace detail

/// Time-p flow of X_t started at x. p may be negative (backward flow).
inline FlowResult flow_map(const VectorFieldFamily& fam, const Vec& x, double p, double t, const FlowTolerances& tol,
                           bool dense = false) {
  fam.manifold.require_on(x);
  if (!std::isfinite(p)) throw Error(ErrorCode::InvalidArgument, "non-finite duration");
  FlowResult out;
  if (p == 0.0) {
    out.endpoint = x;
    if (dense) out.trajectory = std::vector<FlowSample>{{0.0, x}};
    return out;
  }
  detail::Dopri rk(fam, t, detail::Mode::State, tol);
  auto y = rk.initial(x);
  const double stops[] = {p};
  if (dense) {
    // Dense output: record every accepted step by integrating to a fine grid.
    const int n = std::max(2, static_cast<int>(std::ceil(std::abs(p) / 0.05)));
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = p * (i + 1) / n;
    std::vector<FlowSample> traj{{0.0, x}};
    out.steps = rk.run(y, grid, [&](std::size_t, double s, const detail::Pack& st) {
      traj.push_back({s, Vec(st.head(x.size()))});
    }, &out.est_error);
    out.trajectory = std::move(traj);
  } else {
    out.steps = rk.run(y, stops, [](std::size_t, double, const detail::Pack&) {}, &out.est_error);
  }
  out.endpoint = y.head(x.size());
  return out;
}

inline FlowResult flow_map(const VectorFieldFamily& fam, const Vec& x, double p, double t, const Config& cfg = {},
                           bool dense = false) {
  if (p < 0) throw Error(ErrorCode::InvalidArgument, "flow duration must be >= 0");
  return flow_map(fam, x, p, t, FlowTolerances::from(cfg), dense);
}

/// Points F_{t,s}(x) for every s in `times` (ascending in |s|, one sign).
inline std::vector<Vec> flow_samples(const VectorFieldFamily& fam, const Vec& x, std::span<const double> times,
                                     double t, const FlowTolerances& tol) {
  fam.manifold.require_on(x);
  detail::Dopri rk(fam, t, detail::Mode::State, tol);
  auto y = rk.initial(x);
  std::vector<Vec> out(times.size());
  rk.run(y, times, [&](std::size_t i, double, const detail::Pack& st) { out[i] = st.head(x.size()); });
  return out;
}

/// Flow map with its x-derivative (and t-derivative when `with_param`).
inline Variational variational(const VectorFieldFamily& fam, const Vec& x, double p, double t,
                               const FlowTolerances& tol, bool with_param = false) {
  fam.manifold.require_on(x);
  const int n = fam.manifold.ambient_dim();
  Variational out;
  if (p == 0.0) {
    out.endpoint = x;
    out.V = Mat::Identity(n, n);
    out.W = Vec::Zero(n);
    return out;
  }
  detail::Dopri rk(fam, t, with_param ? detail::Mode::VariationalWithParam : detail::Mode::Variational, tol);
  auto y = rk.initial(x);
  const double stops[] = {p};
  out.steps = rk.run(y, stops, [](std::size_t, double, const detail::Pack&) {});
  out.endpoint = y.head(n);
  out.V = detail::unpack_V(y, n);
  out.W = with_param ? Vec(y.segment(n + n * n, n)) : Vec::Zero(n);
  return out;
}

/// Variational samples (point, V) at each of `times`.
inline std::vector<std::pair<Vec, Mat>> variational_samples(const VectorFieldFamily& fam, const Vec& x,
                                                            std::span<const double> times, double t,
                                                            const FlowTolerances& tol) {
  fam.manifold.require_on(x);
  const int n = fam.manifold.ambient_dim();
  detail::Dopri rk(fam, t, detail::Mode::Variational, tol);
  auto y = rk.initial(x);
  std::vector<std::pair<Vec, Mat>> out(times.size());
  rk.run(y, times, [&](std::size_t i, double, const detail::Pack& st) {
    out[i] = {Vec(st.head(n)), detail::unpack_V(st, n)};
  });
  return out;
}

inline Monodromy monodromy(const VectorFieldFamily& fam, const Vec& x, double p, double t, const Config& cfg = {}) {
  if (p < 0) throw Error(ErrorCode::InvalidArgument, "flow duration must be >= 0");
  const auto var = variational(fam, x, p, t, FlowTolerances::from(cfg));
  return {var.V, Mat()};
}

/// Writes a dense trajectory as CSV rows "s,x1,...,xn".
template <class Stream>
void write_trajectory_csv(Stream& os, const std::vector<FlowSample>& traj) {
  for (const auto& smp : traj) {
    os << smp.s;
    for (int i = 0; i < smp.x.size(); ++i) os << ',' << smp.x(i);
    os << '\n';
  }
}

}  // namespace fullerkit
