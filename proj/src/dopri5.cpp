#include <algorithm>
#include <cmath>
#include <sstream>

#include "viscogs/error.hpp"
#include "viscogs/ode.hpp"

namespace viscogs::ode {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double error_norm(const State& err, const State& y0, const State& y1, const Options& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(err.size()));
}

double initial_step(const Rhs& f, double t0, const State& y0, const State& f0, double span,
                    const Options& o, std::size_t& evals) {
  double d0 = 0.0, d1n = 0.0;
  const std::size_t n = y0.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = o.atol + o.rtol * std::abs(y0[i]);
    d0 += (y0[i] / sc) * (y0[i] / sc);
    d1n += (f0[i] / sc) * (f0[i] / sc);
  }
  d0 = std::sqrt(d0 / n);
  d1n = std::sqrt(d1n / n);
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min({h0, o.h_max, span});
  State y1(n), f1(n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
  f(t0 + h0, y1, f1);
  ++evals;
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = o.atol + o.rtol * std::abs(y0[i]);
    d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
  }
  d2 = std::sqrt(d2 / n) / h0;
  if (!std::isfinite(d2)) return h0 * 1e-3;
  const double dm = std::max(d1n, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, o.h_max, span});
}

}  // namespace

void DenseSegment::eval(double t, State& out) const {
  const double th = h == 0.0 ? 0.0 : (t - t0) / h;
  const double th1 = 1.0 - th;
  out.resize(r1.size());
  for (std::size_t i = 0; i < r1.size(); ++i)
    out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
}

double DenseSegment::eval(double t, std::size_t i) const {
  const double th = h == 0.0 ? 0.0 : (t - t0) / h;
  const double th1 = 1.0 - th;
  return r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
}

Stats dopri5(const Rhs& f, double t0, State& y, double t_end, const Options& o, const Hooks& hooks) {
  Stats st;
  st.t_final = t0;
  const std::size_t n = y.size();
  if (!(t_end > t0)) return st;
  if (!(o.rtol > 0.0) || !(o.atol > 0.0))
    throw Error(ErrorKind::invalid_parameter, "tolerances must be positive");

  State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ys(n), y1(n), err(n);
  f(t0, y, k1);
  ++st.rhs_evals;
  double t = t0;
  double h = o.h_init > 0.0 ? std::min(o.h_init, t_end - t0)
                            : initial_step(f, t0, y, k1, t_end - t0, o, st.rhs_evals);
  double facold = 1e-4;
  bool last_rejected = false;
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9, facmin = 0.2, facmax = 10.0;
  DenseSegment seg;

  while (t < t_end) {
    if (st.accepted + st.rejected >= o.max_steps)
      throw Error(ErrorKind::stiffness_failure, "step budget exhausted; consider a smaller t_end");
    h = std::min({h, o.h_max, t_end - t});
    const double hmin = o.h_min_rel * std::max(1.0, std::abs(t));
    if (h < hmin) {
      std::ostringstream os;
      os << "step size underflow at t=" << t << " (h=" << h
         << "); tighten the positivity floor or shorten t_end";
      throw Error(ErrorKind::stiffness_failure, os.str());
    }

    for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ys, k2);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ys, k3);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ys, k4);
    for (std::size_t i = 0; i < n; ++i)
      ys[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ys, k5);
    for (std::size_t i = 0; i < n; ++i)
      ys[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + h, ys, k6);
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    f(t + h, y1, k7);
    st.rhs_evals += 6;
    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

    const double en = error_norm(err, y, y1, o);
    if (!std::isfinite(en) || (hooks.admissible && !hooks.admissible(y1))) {
      ++st.inadmissible;
      ++st.rejected;
      h *= 0.5;
      last_rejected = true;
      continue;
    }

    const double fac11 = std::pow(std::max(en, 1e-300), expo1);
    if (en <= 1.0) {
      double fac = fac11 / std::pow(facold, beta);
      fac = std::clamp(fac / safe, 1.0 / facmax, 1.0 / facmin);
      double hnew = h / fac;
      if (last_rejected) hnew = std::min(hnew, h);
      facold = std::max(en, 1e-4);

      seg.t0 = t;
      seg.h = h;
      seg.r1 = y;
      seg.r2.resize(n);
      seg.r3.resize(n);
      seg.r4.resize(n);
      seg.r5.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double ydiff = y1[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        seg.r2[i] = ydiff;
        seg.r3[i] = bspl;
        seg.r4[i] = ydiff - h * k7[i] - bspl;
        seg.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t = (t_end - (t + h) <= 1e-15 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
      y.swap(y1);
      k1.swap(k7);
      ++st.accepted;
      last_rejected = false;
      h = hnew;

      if (hooks.on_accept) {
        const AfterStep a = hooks.on_accept(seg, y);
        if (a == AfterStep::modified) {
          f(t, y, k1);
          ++st.rhs_evals;
        } else if (a == AfterStep::stop) {
          st.stopped_early = t < t_end;
          break;
        }
      }
    } else {
      h /= std::min(1.0 / facmin, fac11 / safe);
      ++st.rejected;
      last_rejected = true;
    }
  }
  st.t_final = t;
  return st;
}

}  // namespace viscogs::ode
