#include "viscogs/material.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "viscogs/error.hpp"
#include "viscogs/strain.hpp"

namespace viscogs {

namespace {

constexpr int kLoadingSubsamples = 64;
constexpr double kMargin = 1e-9;

double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}
double smoothstep_d1(double u) { return (u <= 0.0 || u >= 1.0) ? 0.0 : 6.0 * u * (1.0 - u); }
double smoothstep_d2(double u) { return (u <= 0.0 || u >= 1.0) ? 0.0 : 6.0 - 12.0 * u; }

ScalarLaw linear_k(double kappa) {
  return {[kappa](double p) { return kappa * p; }, [kappa](double) { return kappa; },
          [](double) { return 0.0; }};
}

// Default single-well energy: (p-1)^2/2 + 1/p - 1.
ScalarLaw single_well() {
  return {[](double p) { return 0.5 * (p - 1.0) * (p - 1.0) + 1.0 / p - 1.0; },
          [](double p) { return (p - 1.0) - 1.0 / (p * p); },
          [](double p) { return 1.0 + 2.0 / (p * p * p); }};
}

ScalarLaw double_well() {
  return {[](double p) {
            const double a = (p - 1.0) * (p - 1.0) - 0.25;
            return a * a + 1.0 / p - 1.0;
          },
          [](double p) {
            const double a = (p - 1.0) * (p - 1.0) - 0.25;
            return 4.0 * (p - 1.0) * a - 1.0 / (p * p);
          },
          [](double p) { return 12.0 * (p - 1.0) * (p - 1.0) - 1.0 + 2.0 / (p * p * p); }};
}

[[noreturn]] void violated(const std::string& what, double p) {
  std::ostringstream os;
  os << what << " fails at p=" << p;
  throw Error(ErrorKind::assumption_violation, os.str());
}

bool finite(double v) { return std::isfinite(v); }

std::vector<double> certification_nodes(const MaterialLaw& law, const GridSpec& grid) {
  std::vector<double> nodes = grid.nodes();
  std::vector<double> bps = law.breakpoints;
  std::sort(bps.begin(), bps.end());
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double a = bps[i], c = bps[i + 1];
    if (c - a < 1.0) {
      for (int j = 0; j <= 1000; ++j) nodes.push_back(a + (c - a) * j / 1000.0);
    }
  }
  for (double bp : bps) {
    nodes.push_back(bp);
    nodes.push_back(bp * (1.0 - 1e-9));
    nodes.push_back(bp * (1.0 + 1e-9));
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

// Range-maximum over a fixed array, O(1) per query.
class SparseMax {
public:
  explicit SparseMax(const std::vector<double>& v) {
    const std::size_t n = v.size();
    table_.push_back(v);
    for (std::size_t w = 1; 2 * w <= n; w *= 2) {
      const auto& prev = table_.back();
      std::vector<double> next(n - 2 * w + 1);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::max(prev[i], prev[i + w]);
      table_.push_back(std::move(next));
    }
  }
  double query(std::size_t lo, std::size_t hi) const {  // inclusive
    std::size_t level = 0;
    while ((std::size_t{2} << level) <= hi - lo + 1) ++level;
    const std::size_t w = std::size_t{1} << level;
    return std::max(table_[level][lo], table_[level][hi + 1 - w]);
  }

private:
  std::vector<std::vector<double>> table_;
};

void certify_doubling(const MaterialLaw& law, const GridSpec& grid, LawConstants& c) {
  // Fine grid over [lo, 2 hi] for the maximum of W on [min, 2 max].
  const std::size_t nf = 4 * grid.points;
  const double lf = std::log(grid.lo), hf = std::log(2.0 * grid.hi);
  std::vector<double> fine(nf), wf(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    fine[i] = std::exp(lf + (hf - lf) * static_cast<double>(i) / static_cast<double>(nf - 1));
    wf[i] = law.W(fine[i]);
  }
  SparseMax rmax(wf);

  const std::size_t m = std::max<std::size_t>(grid.doubling_points, 3);
  std::vector<double> pts(m), wp(m), w2(m);
  const double l0 = std::log(grid.lo), h0 = std::log(grid.hi);
  for (std::size_t i = 0; i < m; ++i) {
    pts[i] = std::exp(l0 + (h0 - l0) * static_cast<double>(i) / static_cast<double>(m - 1));
    wp[i] = law.W(pts[i]);
    w2[i] = law.W(2.0 * pts[i]);
  }
  auto range_max = [&](std::size_t i, std::size_t j) {
    const double a = pts[i], b = 2.0 * pts[j];
    auto lo = std::lower_bound(fine.begin(), fine.end(), a) - fine.begin();
    auto hi = std::upper_bound(fine.begin(), fine.end(), b) - fine.begin() - 1;
    double best = std::max(wp[i], w2[j]);
    if (lo <= hi) best = std::max(best, rmax.query(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)));
    return best;
  };

  const double threshold = 10.0 * (1.0 + std::abs(c.W_inf));
  double C1 = 0.5;
  std::vector<double> wmax(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double mx = range_max(i, j);
      wmax[i * m + j] = mx;
      const double S = wp[i] + wp[j];
      if (S >= threshold) C1 = std::max(C1, mx / S);
    }
  }
  double C2 = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) C2 = std::max(C2, wmax[i * m + j] - C1 * (wp[i] + wp[j]));
  if (!finite(C1) || !finite(C2)) violated("doubling W(p) <= C1 (W(p0) + W(p1)) + C2", grid.hi);
  c.C1 = C1;
  c.C2 = C2 + kMargin * (1.0 + C2);
}

void certify_p_star(const std::vector<double>& nodes, const std::vector<double>& W1,
                    const std::vector<double>& lam, LawConstants& c) {
  auto ok = [&](std::size_t i) {
    return (nodes[i] - 1.0) * W1[i] >= 0.0 && lam[i] >= 0.0;
  };
  // Largest failing node above 1 and smallest failing node below 1.
  double hi_fail = 1.0, lo_fail = 1.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (ok(i)) continue;
    if (nodes[i] > 1.0) hi_fail = std::max(hi_fail, nodes[i]);
    if (nodes[i] < 1.0) lo_fail = std::min(lo_fail, nodes[i]);
  }
  if (hi_fail >= nodes.back() || lo_fail <= nodes.front()) {
    c.p_star.reset();
    return;
  }
  double ps = std::max(hi_fail, 1.0 / lo_fail);
  ps = std::max(ps * (1.0 + 1e-12), 1.0 + 1e-9);
  c.p_star = ps;
}

}  // namespace

std::vector<double> GridSpec::nodes() const {
  std::vector<double> out(points);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> MaterialLaw::loading_cells(std::size_t N) const {
  std::vector<double> g(N, 0.0);
  if (!G) return g;
  const double dn = static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kLoadingSubsamples; ++j)
      acc += G((static_cast<double>(i) + (j + 0.5) / kLoadingSubsamples) / dn);
    g[i] = acc / kLoadingSubsamples;
  }
  return g;
}

double LaurentPolynomial::eval(double p) const {
  double s = 0.0;
  for (auto [j, c] : coeffs) s += c * std::pow(p, j);
  return s;
}

double LaurentPolynomial::d1(double p) const {
  double s = 0.0;
  for (auto [j, c] : coeffs)
    if (j != 0) s += c * j * std::pow(p, j - 1);
  return s;
}

double LaurentPolynomial::d2(double p) const {
  double s = 0.0;
  for (auto [j, c] : coeffs)
    if (j != 0 && j != 1) s += c * j * (j - 1) * std::pow(p, j - 2);
  return s;
}

ScalarLaw LaurentPolynomial::as_law() const {
  auto self = *this;
  return {[self](double p) { return self.eval(p); }, [self](double p) { return self.d1(p); },
          [self](double p) { return self.d2(p); }};
}

ScalarLaw piecewise_ratio_k(const std::vector<double>& breaks, const std::vector<double>& kappas,
                            double h) {
  if (kappas.size() != breaks.size() + 1)
    throw Error(ErrorKind::invalid_parameter, "piecewise k needs one more kappa than breaks");
  for (double kp : kappas)
    if (!(kp > 0.0)) throw Error(ErrorKind::invalid_parameter, "piecewise k needs kappa > 0");
  if (!breaks.empty() && !(h > 0.0))
    throw Error(ErrorKind::invalid_parameter, "mollifier width must be positive");
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    if (!(breaks[i] > 0.0)) throw Error(ErrorKind::invalid_parameter, "breaks must be positive");
    if (i > 0 && breaks[i] < breaks[i - 1] + h)
      throw Error(ErrorKind::invalid_parameter, "breaks must be increasing and at least h apart");
  }
  struct Ratio {
    std::vector<double> breaks, kappas;
    double h;
    double r(double p, int order) const {
      double s = order == 0 ? kappas[0] : 0.0;
      for (std::size_t i = 0; i < breaks.size(); ++i) {
        const double u = (p - breaks[i]) / h;
        const double jump = kappas[i + 1] - kappas[i];
        if (order == 0) s += jump * smoothstep(u);
        else if (order == 1) s += jump * smoothstep_d1(u) / h;
        else s += jump * smoothstep_d2(u) / (h * h);
      }
      return s;
    }
  };
  auto r = std::make_shared<Ratio>(Ratio{breaks, kappas, h});
  return {[r](double p) { return p * r->r(p, 0); },
          [r](double p) { return r->r(p, 0) + p * r->r(p, 1); },
          [r](double p) { return 2.0 * r->r(p, 1) + p * r->r(p, 2); }};
}

MaterialLaw make_law(std::string id, ScalarLaw W, ScalarLaw k, RealFn G,
                     std::vector<double> breakpoints, std::optional<double> k_linear_kappa,
                     double mollifier_width, const GridSpec& grid) {
  MaterialLaw law;
  law.id = std::move(id);
  law.W = std::move(W);
  law.k = std::move(k);
  law.G = G ? std::move(G) : RealFn([](double) { return 0.0; });
  law.breakpoints = std::move(breakpoints);
  law.k_linear_kappa = k_linear_kappa;
  law.mollifier_width = mollifier_width;
  if (k_linear_kappa) {
    if (!(*k_linear_kappa > 0.0)) throw Error(ErrorKind::invalid_parameter, "kappa must be positive");
    law.strain = StrainMap::linear(*k_linear_kappa);
  } else {
    law.strain = StrainMap::tabulated(law.k.eval, law.breakpoints);
  }
  return certify_constants(law, grid);
}

MaterialLaw catalog_default() {
  return make_law("default", single_well(), linear_k(4.0), nullptr, {}, 4.0);
}

MaterialLaw catalog_double_well() {
  return make_law("double_well", double_well(), linear_k(4.0), nullptr, {}, 4.0);
}

MaterialLaw catalog_appendix_k(double epsilon, double h) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorKind::invalid_parameter, "appendix k needs epsilon > 0");
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_parameter, "appendix k needs h > 0");
  std::ostringstream id;
  id << "appendix(eps=" << epsilon << ",h=" << h << ")";
  return make_law(id.str(), single_well(), piecewise_ratio_k({2.0}, {4.0, 1.0 / epsilon}, h),
                  nullptr, {2.0, 2.0 + h}, std::nullopt, h);
}

MaterialLaw catalog_linear_k(double kappa) {
  std::ostringstream id;
  id << "linear(kappa=" << kappa << ")";
  return make_law(id.str(), single_well(), linear_k(kappa), nullptr, {}, kappa);
}

MaterialLaw catalog(const std::string& id) {
  if (id == "default") return catalog_default();
  if (id == "double_well") return catalog_double_well();
  if (id == "appendix") return catalog_appendix_k(0.01);
  throw Error(ErrorKind::invalid_parameter, "unknown catalog law '" + id + "'");
}

MaterialLaw with_loading(const MaterialLaw& law, RealFn G, const std::string& tag) {
  MaterialLaw out = law;
  out.G = std::move(G);
  out.id = law.id + "+" + tag;
  return certify_constants(out, law.constants.grid);
}

MaterialLaw certify_constants(const MaterialLaw& law, const GridSpec& grid) {
  if (!(grid.lo > 0.0) || grid.lo > 1e-4 || grid.hi < 1e4 || grid.points < 10000)
    throw Error(ErrorKind::invalid_parameter,
                "certification grid must cover [1e-4, 1e4] with at least 1e4 points");
  if (!law.W.eval || !law.W.d1 || !law.W.d2 || !law.k.eval || !law.k.d1)
    throw Error(ErrorKind::invalid_parameter, "law is missing W, W', W'', k or k'");

  MaterialLaw out = law;
  LawConstants c;
  c.grid = grid;

  const double w1 = law.W(1.0);
  if (!(law.W(1e-6) > w1 + 1e3)) violated("coercivity W(p) -> infinity as p -> 0", 1e-6);
  if (!(law.W(1e6) > w1 + 1e3)) violated("coercivity W(p) -> infinity as p -> infinity", 1e6);

  const std::vector<double> nodes = certification_nodes(law, grid);
  const std::size_t n = nodes.size();
  std::vector<double> W(n), W1(n), W2(n), K(n), K1(n), lam(n);
  c.kappa_lo = std::numeric_limits<double>::infinity();
  c.kappa_hi = 0.0;
  c.kprime_inf = std::numeric_limits<double>::infinity();
  c.kprime_sup = -std::numeric_limits<double>::infinity();
  c.W_inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = nodes[i];
    W[i] = law.W(p);
    W1[i] = law.W.d1(p);
    W2[i] = law.W.d2(p);
    K[i] = law.k(p);
    K1[i] = law.k.d1(p);
    if (!finite(W[i]) || !finite(W1[i]) || !finite(W2[i])) violated("W in C2", p);
    if (!finite(K[i]) || !finite(K1[i])) violated("k in C1", p);
    const double ratio = K[i] / p;
    if (!(ratio > 0.0) || !finite(ratio)) violated("kappa_lo p <= k(p) <= kappa_hi p", p);
    c.kappa_lo = std::min(c.kappa_lo, ratio);
    c.kappa_hi = std::max(c.kappa_hi, ratio);
    c.kprime_inf = std::min(c.kprime_inf, K1[i]);
    c.kprime_sup = std::max(c.kprime_sup, K1[i]);
    c.W_inf = std::min(c.W_inf, W[i]);
    lam[i] = K[i] * W2[i] + 0.5 * K1[i] * W1[i];
    if (!finite(lam[i])) violated("k W'' + k' W' / 2 >= lambda_W", p);
  }

  // lambda_W: grid infimum, polished between neighbouring nodes.
  const std::size_t imin = static_cast<std::size_t>(std::min_element(lam.begin(), lam.end()) - lam.begin());
  double lam_min = lam[imin];
  if (imin > 0 && imin + 1 < n) {
    auto f = [&](double lp) {
      const double p = std::exp(lp);
      return law.k(p) * law.W.d2(p) + 0.5 * law.k.d1(p) * law.W.d1(p);
    };
    auto r = boost::math::tools::brent_find_minima(f, std::log(nodes[imin - 1]),
                                                   std::log(nodes[imin + 1]), 52);
    lam_min = std::min(lam_min, r.second);
  }
  c.lambda_W = lam_min - kMargin;

  double kp_abs = std::max(std::abs(c.kprime_inf), std::abs(c.kprime_sup));
  c.C_k = kp_abs + kMargin * (1.0 + kp_abs);

  // |k W'| <= B1 W + B2 + B3 (p - 1). Only B1 E + B2 enters the rates (B3 integrates
  // to zero against unit mass), so minimise B1 E_ref + B2 with B2 the smallest
  // feasible offset. The objective is convex and piecewise linear in (B1, B3).
  {
    std::vector<double> target(n);
    double b1_hi = 1.0, b3_hi = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = std::abs(K[i] * W1[i]);
      if (W[i] - c.W_inf >= 1.0) b1_hi = std::max(b1_hi, 2.0 * target[i] / (W[i] - c.W_inf));
      if (std::abs(nodes[i] - 1.0) >= 1.0) b3_hi = std::max(b3_hi, 2.0 * target[i] / std::abs(nodes[i] - 1.0));
    }
    const double E_ref = 1.0 + std::abs(w1);
    auto offset = [&](double b1, double b3) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) m = std::max(m, target[i] - b1 * W[i] - b3 * (nodes[i] - 1.0));
      return m;
    };
    auto best_b3 = [&](double b1) {
      return boost::math::tools::brent_find_minima([&](double b3) { return offset(b1, b3); }, -b3_hi, b3_hi, 40);
    };
    const auto outer = boost::math::tools::brent_find_minima(
        [&](double b1) { return b1 * E_ref + best_b3(b1).second; }, 0.0, b1_hi, 40);
    const double B1 = outer.first;
    const double B3 = best_b3(B1).first;
    double B2 = offset(B1, B3);
    B2 += kMargin * (1.0 + std::abs(B2));
    if (!finite(B2) || std::abs(B2) > 1e12) violated("|k W'| <= B1 W + B2 + B3 (p - 1)", grid.hi);
    c.B1 = B1;
    c.B2 = B2;
    c.B3 = B3;
  }

  // Loading statistics.
  {
    c.G_inf = std::numeric_limits<double>::infinity();
    c.G_sup = -std::numeric_limits<double>::infinity();
    const int m = 8192;
    for (int i = 0; i <= m; ++i) {
      const double g = law.G(static_cast<double>(i) / m);
      if (!finite(g)) throw Error(ErrorKind::invalid_parameter, "loading G is not finite");
      c.G_inf = std::min(c.G_inf, g);
      c.G_sup = std::max(c.G_sup, g);
    }
    c.G_sup_norm = std::max(std::abs(c.G_inf), std::abs(c.G_sup));
  }

  certify_doubling(law, grid, c);
  certify_p_star(nodes, W1, lam, c);
  c.certified = true;
  out.constants = c;
  return out;
}

double lower_edge_distance_bound(const MaterialLaw& law) {
  return 2.0 / std::sqrt(law.constants.kappa_hi);
}

double upper_edge_distance_bound(const MaterialLaw& law) {
  return 2.0 / std::sqrt(law.constants.kappa_lo);
}

}  // namespace viscogs
