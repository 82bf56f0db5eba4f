#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Dense>

#include "viscogs/error.hpp"
#include "viscogs/metric.hpp"
#include "viscogs/strain.hpp"

namespace viscogs {

namespace {

// Interior knots live in b = b(p) coordinates, where the action is a plain
// sum of squared differences and each knot is constrained to mean p(b) = 1.
class PathRelaxation {
public:
  PathRelaxation(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1, const GeodesicOptions& o)
      : sm_(*law.strain), N_(p0.size()), K_(o.interior_knots), opts_(o) {
    b0_.resize(N_);
    b1_.resize(N_);
    for (std::size_t i = 0; i < N_; ++i) {
      b0_[i] = sm_.b(p0[i]);
      b1_[i] = sm_.b(p1[i]);
    }
    bfloor_ = sm_.b(o.floor);
    scale_ = static_cast<double>(K_ + 1) / static_cast<double>(N_);
  }

  std::size_t size() const { return K_ * N_; }

  std::vector<double> from_knots(const std::vector<StepDensity>& knots) const {
    std::vector<double> B(size());
    for (std::size_t j = 0; j < K_; ++j)
      for (std::size_t i = 0; i < N_; ++i) B[j * N_ + i] = sm_.b(knots[j + 1][i]);
    retract(B);
    return B;
  }

  double action(const std::vector<double>& B) const {
    double s = 0.0;
    for (std::size_t j = 0; j <= K_; ++j) {
      for (std::size_t i = 0; i < N_; ++i) {
        const double d = at(B, j + 1, i) - at(B, j, i);
        s += d * d;
      }
    }
    return scale_ * s;
  }

  // Riemannian gradient: Euclidean gradient minus its component along the constraint normal.
  void projected_gradient(const std::vector<double>& B, std::vector<double>& g) const {
    g.resize(size());
    for (std::size_t j = 1; j <= K_; ++j) {
      double gn = 0.0, nn = 0.0;
      for (std::size_t i = 0; i < N_; ++i) {
        const double v = 2.0 * scale_ * (2.0 * at(B, j, i) - at(B, j - 1, i) - at(B, j + 1, i));
        const double n = sm_.dp_db(sm_.p(at(B, j, i)));
        g[(j - 1) * N_ + i] = v;
        gn += v * n;
        nn += n * n;
      }
      const double c = nn > 0.0 ? gn / nn : 0.0;
      for (std::size_t i = 0; i < N_; ++i) {
        const double n = sm_.dp_db(sm_.p(at(B, j, i)));
        double& gi = g[(j - 1) * N_ + i];
        gi -= c * n;
        // Cells pinned at the floor cannot move further down.
        if (at(B, j, i) <= bfloor_ && gi > 0.0) gi = 0.0;
      }
    }
  }

  void retract(std::vector<double>& B) const {
    std::vector<double> n(N_);
    for (std::size_t j = 0; j < K_; ++j) {
      double* b = B.data() + j * N_;
      for (std::size_t i = 0; i < N_; ++i) {
        b[i] = std::max(b[i], bfloor_);
        n[i] = sm_.dp_db(sm_.p(b[i]));
      }
      // mean p(max(b + c n, floor)) = 1 is increasing in c.
      double c = 0.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      for (int it = 0; it < 100; ++it) {
        double m = 0.0, dm = 0.0;
        for (std::size_t i = 0; i < N_; ++i) {
          const double bi = b[i] + c * n[i];
          if (bi > bfloor_) {
            const double p = sm_.p(bi);
            m += p;
            dm += sm_.dp_db(p) * n[i];
          } else {
            m += sm_.p(bfloor_);
          }
        }
        m /= static_cast<double>(N_);
        dm /= static_cast<double>(N_);
        const double r = m - 1.0;
        if (std::abs(r) <= 1e-15) break;
        if (r > 0.0) hi = std::min(hi, c);
        else lo = std::max(lo, c);
        double next = dm > 0.0 ? c - r / dm : c + (r > 0.0 ? -1.0 : 1.0);
        if (!(next > lo && next < hi)) {
          if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
          else if (std::isfinite(lo)) next = lo + 2.0 * std::max(1.0, std::abs(lo));
          else next = hi - 2.0 * std::max(1.0, std::abs(hi));
        }
        if (next == c) break;
        c = next;
      }
      for (std::size_t i = 0; i < N_; ++i) b[i] = std::max(b[i] + c * n[i], bfloor_);
    }
  }

  std::vector<StepDensity> knots(const std::vector<double>& B, const StepDensity& p0, const StepDensity& p1) const {
    std::vector<StepDensity> out;
    out.reserve(K_ + 2);
    out.push_back(p0);
    for (std::size_t j = 0; j < K_; ++j) {
      std::vector<double> cells(N_);
      for (std::size_t i = 0; i < N_; ++i) cells[i] = sm_.p(B[j * N_ + i]);
      out.emplace_back(std::move(cells));
    }
    out.push_back(p1);
    return out;
  }

  struct Outcome {
    std::vector<double> B;
    double action = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
  };

  Outcome minimize(std::vector<double> B) const {
    Outcome best{B, action(B), 0, false};
    if (K_ == 0 || best.action == 0.0) {
      best.converged = true;
      return best;
    }
    std::vector<double> g, gn, Bn(size()), s(size()), y(size());
    projected_gradient(B, g);
    double f = best.action;
    const double alpha0 = 1.0 / (8.0 * scale_);
    double alpha = alpha0;
    std::deque<double> recent{f};
    std::vector<double> best_history{f};

    for (std::size_t it = 1; it <= opts_.max_iterations; ++it) {
      double gg = 0.0;
      for (double v : g) gg += v * v;
      if (gg == 0.0) {
        best.converged = true;
        best.iterations = it - 1;
        return best;
      }
      const double fref = *std::max_element(recent.begin(), recent.end());
      double fn = 0.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t q = 0; q < size(); ++q) Bn[q] = B[q] - alpha * g[q];
        retract(Bn);
        fn = action(Bn);
        if (fn <= fref - 1e-4 * alpha * gg) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // No descent possible at machine precision.
        best.converged = true;
        best.iterations = it;
        return best;
      }
      projected_gradient(Bn, gn);
      double sy = 0.0, ss = 0.0;
      for (std::size_t q = 0; q < size(); ++q) {
        s[q] = Bn[q] - B[q];
        y[q] = gn[q] - g[q];
        sy += s[q] * y[q];
        ss += s[q] * s[q];
      }
      alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10 * alpha0, 1e6 * alpha0) : 1e2 * alpha0;
      B.swap(Bn);
      g.swap(gn);
      f = fn;
      recent.push_back(f);
      if (recent.size() > 10) recent.pop_front();
      if (f < best.action) {
        best.action = f;
        best.B = B;
      }
      best.iterations = it;
      best_history.push_back(best.action);
      if (best_history.size() > opts_.window) {
        const double old = best_history[best_history.size() - 1 - opts_.window];
        if (old - best.action <= opts_.rel_tol * best.action) {
          best.converged = true;
          return best;
        }
      }
    }
    return best;
  }

  // Initial covector for shooting, from a one-sided second-order difference of the relaxed path.
  std::vector<double> initial_velocity(const std::vector<double>& B) const {
    const double ds = 1.0 / static_cast<double>(K_ + 1);
    std::vector<double> v(N_);
    for (std::size_t i = 0; i < N_; ++i) {
      const double db = K_ >= 2 ? (-3.0 * b0_[i] + 4.0 * B[i] - B[N_ + i]) / (2.0 * ds) : (at(B, 1, i) - b0_[i]) / ds;
      v[i] = sm_.dp_db(sm_.p(b0_[i])) * db;
    }
    return v;
  }

private:
  double at(const std::vector<double>& B, std::size_t j, std::size_t i) const {
    if (j == 0) return b0_[i];
    if (j == K_ + 1) return b1_[i];
    return B[(j - 1) * N_ + i];
  }

  const StrainMap& sm_;
  std::size_t N_, K_;
  const GeodesicOptions& opts_;
  std::vector<double> b0_, b1_;
  double bfloor_ = 0.0;
  double scale_ = 1.0;
};

struct ShotMatch {
  double distance = 0.0;
  double residual = 0.0;
};

// Boundary-value matching gamma(1) = p1 by Newton with a finite-difference Jacobian.
std::optional<ShotMatch> match_shot(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1,
                                    std::vector<double> v0) {
  const std::size_t N = p0.size();
  std::vector<double> xi(N);
  for (std::size_t i = 0; i < N; ++i) xi[i] = v0[i] / law.k(p0[i]);
  ShootOptions so;
  so.record = 2;
  auto endpoint = [&](const std::vector<double>& x) -> std::optional<Eigen::VectorXd> {
    try {
      auto tr = geodesic_shoot(law, p0, Covector(x), 1.0, so);
      Eigen::VectorXd r(N);
      for (std::size_t i = 0; i < N; ++i) r(i) = tr.back().gamma[i] - p1[i];
      return r;
    } catch (const LeftDomain&) {
      return std::nullopt;
    }
  };
  auto r = endpoint(xi);
  if (!r) return std::nullopt;
  for (int it = 0; it < 30 && r->lpNorm<Eigen::Infinity>() > 1e-10; ++it) {
    Eigen::MatrixXd J(N, N);
    for (std::size_t c = 0; c < N; ++c) {
      auto xp = xi;
      const double h = 1e-7 * (1.0 + std::abs(xi[c]));
      xp[c] += h;
      auto rp = endpoint(xp);
      if (!rp) return std::nullopt;
      J.col(static_cast<Eigen::Index>(c)) = (*rp - *r) / h;
    }
    Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-*r);
    double damp = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 20; ++ls) {
      std::vector<double> xn = xi;
      for (std::size_t i = 0; i < N; ++i) xn[i] += damp * step(static_cast<Eigen::Index>(i));
      auto rn = endpoint(xn);
      if (rn && rn->norm() < r->norm()) {
        xi = xn;
        r = rn;
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
  }
  return ShotMatch{std::sqrt(shooting_action(law, p0, Covector(xi))), r->lpNorm<Eigen::Infinity>()};
}

}  // namespace

DistanceResult geodesic_distance(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1,
                                 const GeodesicOptions& opts) {
  if (p0.size() != p1.size()) throw Error(ErrorKind::dimension_mismatch, "densities have different N");
  if (opts.interior_knots == 0) throw Error(ErrorKind::invalid_parameter, "need at least one interior knot");
  const std::size_t K = opts.interior_knots;
  PathRelaxation relax(law, p0, p1, opts);

  std::vector<std::vector<StepDensity>> starts;
  {
    std::vector<StepDensity> bh;
    bh.reserve(K + 2);
    for (std::size_t j = 0; j <= K + 1; ++j)
      bh.push_back(bh_geodesic(p0, p1, static_cast<double>(j) / static_cast<double>(K + 1)));
    starts.push_back(std::move(bh));
  }
  for (const auto& e : opts.extra_starts) {
    if (e.size() != K + 2) throw Error(ErrorKind::invalid_parameter, "extra start has the wrong knot count");
    for (const auto& kn : e)
      if (kn.size() != p0.size()) throw Error(ErrorKind::dimension_mismatch, "extra start has the wrong N");
    starts.push_back(e);
  }

  DistanceResult res;
  PathRelaxation::Outcome best;
  best.action = std::numeric_limits<double>::infinity();
  std::size_t total_iterations = 0;
  for (const auto& st : starts) {
    auto out = relax.minimize(relax.from_knots(st));
    total_iterations += out.iterations;
    if (out.action < best.action) best = std::move(out);
  }

  res.path.knots = relax.knots(best.B, p0, p1);
  res.path.s.resize(K + 2);
  for (std::size_t j = 0; j <= K + 1; ++j) res.path.s[j] = static_cast<double>(j) / static_cast<double>(K + 1);
  res.path.action = best.action;
  res.path.iterations = total_iterations;
  res.path.tolerance = opts.rel_tol;
  res.path.method = "path-relaxation";
  res.distance = std::sqrt(best.action);
  res.converged = best.converged;
  res.status = best.converged ? "converged" : "upper-bound-only";

  if (opts.richardson && res.distance > 0.0) {
    // Second solve on twice the segments, started from the coarse path with
    // midpoint knots; the chord error is O((K+1)^-2) so one step cancels it.
    GeodesicOptions fine = opts;
    fine.richardson = false;
    fine.shooting_crosscheck = false;
    fine.interior_knots = 2 * K + 1;
    fine.extra_starts.clear();
    std::vector<StepDensity> doubled;
    doubled.reserve(2 * K + 3);
    for (std::size_t j = 0; j <= K + 1; ++j) {
      doubled.push_back(res.path.knots[j]);
      if (j == K + 1) break;
      const auto& a = res.path.knots[j].cells();
      const auto& b = res.path.knots[j + 1].cells();
      std::vector<double> mid(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
      doubled.push_back(StepDensity::normalized(std::move(mid)));
    }
    fine.extra_starts.push_back(std::move(doubled));
    const DistanceResult f = geodesic_distance(law, p0, p1, fine);
    res.raw_distance = res.distance;
    res.distance = (4.0 * f.distance - res.distance) / 3.0;
    res.converged = res.converged && f.converged;
    res.status = res.converged ? "converged" : "upper-bound-only";
  }

  if (opts.shooting_crosscheck && !p0.is_boundary() && !p1.is_boundary() && res.distance > 0.0) {
    if (auto m = match_shot(law, p0, p1, relax.initial_velocity(best.B))) {
      res.shooting_distance = m->distance;
      res.shooting_mismatch = std::abs(m->distance - res.distance) / res.distance;
    }
  }
  return res;
}

std::vector<LadderEntry> refine_distance_ladder(
    const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1,
    const std::vector<std::size_t>& multiples, const GeodesicOptions& opts,
    const std::function<std::vector<std::vector<StepDensity>>(std::size_t, std::size_t)>& extra_starts) {
  for (std::size_t i = 0; i < multiples.size(); ++i) {
    if (multiples[i] == 0 || (i > 0 && multiples[i] <= multiples[i - 1]))
      throw Error(ErrorKind::invalid_parameter, "refinement multiples must be increasing and >= 1");
  }
  std::vector<LadderEntry> out;
  for (std::size_t m : multiples) {
    const StepDensity q0 = refine(p0, m), q1 = refine(p1, m);
    GeodesicOptions o = opts;
    o.extra_starts.clear();
    if (!out.empty() && m % out.back().multiple == 0) {
      const std::size_t r = m / out.back().multiple;
      std::vector<StepDensity> prev;
      for (std::size_t j = 0; j < out.back().path.knots.size(); ++j) {
        if (j == 0) prev.push_back(q0);
        else if (j + 1 == out.back().path.knots.size()) prev.push_back(q1);
        else prev.push_back(refine(out.back().path.knots[j], r));
      }
      o.extra_starts.push_back(std::move(prev));
    }
    if (extra_starts) {
      for (auto& e : extra_starts(q0.size(), opts.interior_knots + 2)) o.extra_starts.push_back(std::move(e));
    }
    auto d = geodesic_distance(law, q0, q1, o);
    LadderEntry e;
    e.multiple = m;
    e.cells = q0.size();
    e.distance = d.distance;
    e.status = d.status;
    e.path = std::move(d.path);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace viscogs
