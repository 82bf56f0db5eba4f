#include "viscogs/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "viscogs/error.hpp"

namespace viscogs {

namespace {

struct FieldParts {
  std::vector<double> k, k1, xi;
  double lambda = 0.0;
  double sum_k = 0.0;
};

void field(const MaterialLaw& law, const double* p, std::size_t N, std::span<const double> g, FieldParts& f,
           double* V) {
  f.k.resize(N);
  f.k1.resize(N);
  f.xi.resize(N);
  double sk = 0.0, skx = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    f.k[i] = law.k(p[i]);
    f.k1[i] = law.k.d1(p[i]);
    f.xi[i] = law.W.d1(p[i]) - g[i];
    sk += f.k[i];
    skx += f.k[i] * f.xi[i];
  }
  f.sum_k = sk;
  f.lambda = skx / sk;
  for (std::size_t i = 0; i < N; ++i) V[i] = -f.k[i] * (f.xi[i] - f.lambda);
}

// R + R* at the state that produced f and V.
double dissipation_rate(const FieldParts& f, const double* V, std::size_t N) {
  double R = 0.0, Rs = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    R += V[i] * V[i] / f.k[i];
    const double d = f.xi[i] - f.lambda;
    Rs += f.k[i] * d * d;
  }
  return 0.5 * (R + Rs) / static_cast<double>(N);
}

// 5-point Gauss-Legendre of rate(p(t)) over [seg.t0, t] on the dense output.
template <typename Rate>
double segment_integral(const ode::DenseSegment& seg, double t, Rate&& rate) {
  static constexpr double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                  0.9061798459386640};
  static constexpr double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                  0.4786286704993665, 0.2369268850561891};
  const double half = 0.5 * (t - seg.t0);
  if (half <= 0.0) return 0.0;
  ode::State s;
  double acc = 0.0;
  for (int q = 0; q < 5; ++q) {
    seg.eval(seg.t0 + half * (1.0 + x[q]), s);
    acc += w[q] * rate(s.data());
  }
  return half * acc;
}

// DV(p) y + K(p) zeta, written into out.
void tangent_rhs(const MaterialLaw& law, const double* p, const double* y, std::size_t N, const FieldParts& f,
                 const double* zeta, double* out) {
  const double n = static_cast<double>(N);
  double mk = f.sum_k / n, mkx = 0.0, mk1y = 0.0, mk1yx = 0.0, mkw2y = 0.0, mkz = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    mkx += f.k[i] * f.xi[i];
    mk1y += f.k1[i] * y[i];
    mk1yx += f.k1[i] * y[i] * f.xi[i];
    mkw2y += f.k[i] * law.W.d2(p[i]) * y[i];
    if (zeta) mkz += f.k[i] * zeta[i];
  }
  mkx /= n;
  mk1y /= n;
  mk1yx /= n;
  mkw2y /= n;
  mkz /= n;
  const double dlam = (mk1yx * mk - mkx * mk1y) / (mk * mk);
  for (std::size_t i = 0; i < N; ++i) {
    const double dK = f.k1[i] * y[i] * (f.xi[i] - f.lambda) - f.k[i] * dlam;
    const double KW2y = f.k[i] * (law.W.d2(p[i]) * y[i] - mkw2y / mk);
    double v = -dK - KW2y;
    if (zeta) v += f.k[i] * (zeta[i] - mkz / mk);
    out[i] = v;
  }
}

std::vector<double> record_schedule(const FlowConfig& cfg) {
  std::vector<double> r{0.0};
  if (cfg.record_every > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * cfg.record_every;
      if (t >= cfg.t_end * (1.0 - 1e-14)) break;
      r.push_back(t);
    }
  }
  for (double t : cfg.record_times)
    if (t > 0.0 && t < cfg.t_end) r.push_back(t);
  r.push_back(cfg.t_end);
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

Trajectory run(const MaterialLaw& law, const StepDensity& p0, const TangentVector* y0, const Covector* zeta,
               const FlowConfig& cfg, std::optional<std::vector<double>> loading) {
  if (p0.is_boundary()) throw Error(ErrorKind::invariant, "positivity: flow needs a positive density");
  if (!(cfg.t_end > 0.0)) throw Error(ErrorKind::invalid_parameter, "t_end must be positive");
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw Error(ErrorKind::invalid_parameter, "tolerances must be positive");
  const std::size_t N = p0.size();
  const bool tangent = y0 != nullptr;
  if (tangent && (y0->size() != N || zeta->size() != N))
    throw Error(ErrorKind::dimension_mismatch, "tangent data differ in N");

  Trajectory tr;
  tr.N = N;
  tr.law_id = law.id;
  tr.with_tangent = tangent;
  tr.loading = loading ? std::move(*loading) : law.loading_cells(N);
  if (tr.loading.size() != N) throw Error(ErrorKind::dimension_mismatch, "loading differs in N");
  const std::vector<double>& g = tr.loading;

  const double E0 = energy(law, p0, g);
  if (!std::isfinite(E0)) throw Error(ErrorKind::invalid_parameter, "initial energy overflows");
  const double delta = sublevel_density_floor(law, g, E0);
  const double guard = std::min(1e-13, 0.1 * delta);
  tr.diagnostics.density_floor = delta;
  tr.diagnostics.floor_guard = guard;

  const std::size_t dim = tangent ? 2 * N : N;
  ode::State z(dim, 0.0);
  std::copy(p0.cells().begin(), p0.cells().end(), z.begin());
  if (tangent) std::copy(y0->cells().begin(), y0->cells().end(), z.begin() + N);

  FieldParts parts;
  std::vector<double> V(N);
  const double* zptr = tangent ? zeta->cells().data() : nullptr;
  ode::Rhs rhs = [&](double, const ode::State& s, ode::State& ds) {
    field(law, s.data(), N, g, parts, V.data());
    for (std::size_t i = 0; i < N; ++i) ds[i] = V[i];
    if (tangent) tangent_rhs(law, s.data(), s.data() + N, N, parts, zptr, ds.data() + N);
  };

  const std::vector<double> sched = record_schedule(cfg);
  std::size_t next = 0;
  // Running dissipation: Gauss quadrature of R + R* on the dense output of each step.
  FieldParts qparts;
  std::vector<double> qV(N);
  auto rate = [&](const double* p) {
    field(law, p, N, g, qparts, qV.data());
    return dissipation_rate(qparts, qV.data(), N);
  };
  double D_done = 0.0;
  auto push_record = [&](double t, const ode::State& s, double D) {
    tr.times.push_back(t);
    StepDensity p(std::vector<double>(s.begin(), s.begin() + N));
    tr.energies.push_back(energy(law, p, g));
    tr.states.push_back(std::move(p));
    if (tangent) tr.tangents.emplace_back(std::vector<double>(s.begin() + N, s.begin() + 2 * N));
    tr.dissipation.push_back(D);
  };
  push_record(0.0, z, 0.0);
  next = 1;

  double min_cell = p0.min_cell();
  int steady_count = 0;
  ode::Hooks hooks;
  hooks.admissible = [&](const ode::State& s) {
    for (std::size_t i = 0; i < N; ++i) {
      if (!(s[i] > guard)) {
        if (cfg.positivity == PositivityPolicy::error) {
          std::ostringstream os;
          os << "positivity: cell " << i << " fell below the guard " << guard;
          throw Error(ErrorKind::integrity_failure, os.str());
        }
        ++tr.diagnostics.positivity_rejections;
        return false;
      }
    }
    return true;
  };
  hooks.on_accept = [&](const ode::DenseSegment& seg, ode::State& s) {
    ode::AfterStep verdict = ode::AfterStep::proceed;
    if (cfg.keep_dense) {
      tr.dense.push_back(seg);
      tr.dense_dissipation.push_back(D_done);
    }
    const double D_start = D_done;
    D_done += segment_integral(seg, seg.t1(), rate);
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      m += s[i];
      min_cell = std::min(min_cell, s[i]);
    }
    m /= static_cast<double>(N);
    const double drift = std::abs(m - 1.0);
    tr.diagnostics.max_mass_drift = std::max(tr.diagnostics.max_mass_drift, drift);
    if (drift > kDriftLimit) {
      std::ostringstream os;
      os << "mass drift " << drift << " at t=" << seg.t1();
      throw Error(ErrorKind::integrity_failure, os.str());
    }
    if (drift > kMassTolerance) {
      for (std::size_t i = 0; i < N; ++i) s[i] /= m;
      ++tr.diagnostics.recenterings;
      verdict = ode::AfterStep::modified;
    }
    if (tangent) {
      double my = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < N; ++i) {
        my += s[N + i];
        scale = std::max(scale, std::abs(s[N + i]));
      }
      my /= static_cast<double>(N);
      tr.diagnostics.max_tangent_mean = std::max(tr.diagnostics.max_tangent_mean, std::abs(my));
      if (std::abs(my) > kDriftLimit * scale) {
        std::ostringstream os;
        os << "tangent mean drift " << my << " at t=" << seg.t1();
        throw Error(ErrorKind::integrity_failure, os.str());
      }
      if (std::abs(my) > kMassTolerance * scale) {
        for (std::size_t i = 0; i < N; ++i) s[N + i] -= my;
        verdict = ode::AfterStep::modified;
      }
    }

    ode::State tmp;
    if (cfg.record_every == 0.0 && cfg.record_times.empty()) {
      if (seg.t1() < cfg.t_end) push_record(seg.t1(), s, D_done);
    }
    while (next < sched.size() && sched[next] <= seg.t1()) {
      if (sched[next] == seg.t1()) push_record(sched[next], s, D_done);
      else {
        seg.eval(sched[next], tmp);
        push_record(sched[next], tmp, D_start + segment_integral(seg, sched[next], rate));
      }
      ++next;
    }

    if (cfg.steady_stop && !tangent) {
      field(law, s.data(), N, g, parts, V.data());
      double gn = 0.0;
      for (std::size_t i = 0; i < N; ++i) gn += V[i] * V[i] / parts.k[i];
      gn = std::sqrt(gn / static_cast<double>(N));
      steady_count = gn < cfg.steady_tol ? steady_count + 1 : 0;
      if (steady_count >= 3 && seg.t1() < cfg.t_end) {
        tr.diagnostics.steady_state = true;
        return ode::AfterStep::stop;
      }
    }
    return verdict;
  };

  ode::Options o;
  o.rtol = cfg.rtol;
  o.atol = cfg.atol;
  if (cfg.max_step > 0.0) o.h_max = cfg.max_step;
  const ode::Stats st = ode::dopri5(rhs, 0.0, z, cfg.t_end, o, hooks);

  // Constant continuation after an early steady-state stop.
  while (next < sched.size()) {
    push_record(sched[next], z, D_done);
    ++next;
  }
  if (tr.times.back() < st.t_final) push_record(st.t_final, z, D_done);

  tr.diagnostics.accepted = st.accepted;
  tr.diagnostics.rejected = st.rejected;
  tr.diagnostics.rhs_evals = st.rhs_evals;
  tr.diagnostics.t_final = st.t_final;
  tr.diagnostics.min_cell = min_cell;
  return tr;
}

const ode::DenseSegment* find_segment(const std::vector<ode::DenseSegment>& dense, double t) {
  if (dense.empty() || t > dense.back().t1()) return nullptr;
  auto it = std::lower_bound(dense.begin(), dense.end(), t,
                             [](const ode::DenseSegment& s, double v) { return s.t1() < v; });
  if (it == dense.end()) return nullptr;
  return &*it;
}

}  // namespace

StepDensity Trajectory::state_at(double t) const {
  if (t <= 0.0) return states.front();
  if (dense.empty()) {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (times[k] == t) return states[k];
    throw Error(ErrorKind::invalid_parameter, "trajectory was solved without dense output");
  }
  const ode::DenseSegment* seg = find_segment(dense, t);
  if (!seg) return states.back();
  ode::State s;
  seg->eval(t, s);
  return StepDensity(std::vector<double>(s.begin(), s.begin() + N));
}

TangentVector Trajectory::tangent_at(double t) const {
  if (!with_tangent) throw Error(ErrorKind::invalid_parameter, "trajectory has no tangent");
  if (t <= 0.0) return tangents.front();
  const ode::DenseSegment* seg = find_segment(dense, t);
  if (!seg) return tangents.back();
  ode::State s;
  seg->eval(t, s);
  return TangentVector(std::vector<double>(s.begin() + N, s.begin() + 2 * N));
}

double Trajectory::dissipation_at(const MaterialLaw& law, double t) const {
  if (t <= 0.0) return 0.0;
  const ode::DenseSegment* seg = find_segment(dense, t);
  if (!seg) return dissipation.back();
  FieldParts f;
  std::vector<double> V(N);
  const auto rate = [&](const double* p) {
    field(law, p, N, loading, f, V.data());
    return dissipation_rate(f, V.data(), N);
  };
  return dense_dissipation[static_cast<std::size_t>(seg - dense.data())] + segment_integral(*seg, t, rate);
}

TangentVector vector_field(const MaterialLaw& law, const StepDensity& p) {
  const auto g = law.loading_cells(p.size());
  return vector_field(law, p, g);
}

TangentVector vector_field(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading) {
  if (loading.size() != p.size()) throw Error(ErrorKind::dimension_mismatch, "loading differs in N");
  FieldParts parts;
  std::vector<double> V(p.size());
  field(law, p.cells().data(), p.size(), loading, parts, V.data());
  return TangentVector(std::move(V));
}

TangentVector vector_field_derivative(const MaterialLaw& law, const StepDensity& p, const TangentVector& y,
                                      std::span<const double> loading) {
  const std::size_t N = p.size();
  if (y.size() != N || loading.size() != N) throw Error(ErrorKind::dimension_mismatch, "sizes differ");
  FieldParts parts;
  std::vector<double> V(N), out(N);
  field(law, p.cells().data(), N, loading, parts, V.data());
  tangent_rhs(law, p.cells().data(), y.cells().data(), N, parts, nullptr, out.data());
  return TangentVector(std::move(out));
}

Trajectory solve(const MaterialLaw& law, const StepDensity& p0, const FlowConfig& cfg,
                 std::optional<std::vector<double>> loading) {
  return run(law, p0, nullptr, nullptr, cfg, std::move(loading));
}

Trajectory solve_with_tangent(const MaterialLaw& law, const StepDensity& p0, const TangentVector& y0,
                              const Covector& zeta, const FlowConfig& cfg,
                              std::optional<std::vector<double>> loading) {
  return run(law, p0, &y0, &zeta, cfg, std::move(loading));
}

double ParametrizedFamily::transported_length(const MaterialLaw& law, double t) const {
  std::vector<StepDensity> knots;
  knots.reserve(members.size());
  for (const auto& m : members) knots.push_back(m.state_at(t));
  return std::sqrt(discrete_action(law, knots));
}

ParametrizedFamily solve_parametrized(const MaterialLaw& law, const GeodesicPath& geodesic,
                                      const std::vector<double>& G_a, const std::vector<double>& G_b,
                                      const FlowConfig& cfg) {
  if (geodesic.knots.empty()) throw Error(ErrorKind::invalid_parameter, "empty geodesic");
  const std::size_t N = geodesic.knots.front().size();
  if (G_a.size() != N || G_b.size() != N) throw Error(ErrorKind::dimension_mismatch, "loadings differ in N");
  ParametrizedFamily fam;
  fam.s = geodesic.s;
  for (std::size_t j = 0; j < geodesic.knots.size(); ++j) {
    const double s = geodesic.s[j];
    std::vector<double> g(N);
    for (std::size_t i = 0; i < N; ++i) g[i] = (1.0 - s) * G_a[i] + s * G_b[i];
    fam.members.push_back(solve(law, geodesic.knots[j], cfg, std::move(g)));
  }
  return fam;
}

double energy_increase_rate(const Trajectory& tr) {
  double worst = 0.0;
  for (std::size_t k = 1; k < tr.times.size(); ++k) {
    const double dt = tr.times[k] - tr.times[k - 1];
    if (dt <= 0.0) continue;
    worst = std::max(worst, (tr.energies[k] - tr.energies[k - 1]) / dt);
  }
  return worst;
}

}  // namespace viscogs
