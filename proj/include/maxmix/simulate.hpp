#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <string_view>
#include <vector>

#include "maxmix/errors.hpp"
#include "maxmix/field.hpp"
#include "maxmix/models.hpp"
#include "maxmix/rng.hpp"
#include "maxmix/spatial.hpp"
#include "maxmix/special.hpp"

namespace maxmix {

// Spectral-tail level used by the scale-aware stopping rules: once no further
// storm could beat the running minimum even with a 6-sigma Gaussian draw, the
// replicate is complete. Residual omission probability is ~1e-9 per replicate.
inline constexpr double kSpectralTailSigma = 6.0;
inline constexpr long kMaxStormsPerReplicate = 8'000'000;

inline Eigen::MatrixXd distance_matrix(const SiteSet& ss) {
  const int k = ss.size();
  Eigen::MatrixXd d(k, k);
  for (int i = 0; i < k; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < k; ++j) d(i, j) = d(j, i) = site_distance(ss, i, j);
  }
  return d;
}

inline Eigen::MatrixXd correlation_matrix(const SiteSet& ss, const CorrelationSpec& corr) {
  validate(corr);
  Eigen::MatrixXd c = distance_matrix(ss);
  return (-c / corr.range).array().exp().matrix();
}

// Factor A with A*A^T = C via symmetric eigendecomposition; eigenvalues in
// [-1e-10*scale, 0) are clipped to zero, below that the matrix is rejected.
inline Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols() || c.rows() == 0) throw invalid_input("gaussian_factor: not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) throw numeric_failure("gaussian_factor: eigensolver failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10 * scale)
      throw numeric_failure("gaussian_factor: matrix indefinite beyond tolerance");
    lam[i] = std::max(0.0, lam[i]);
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

namespace detail {

inline void require_euclidean(const SiteSet& ss, const char* what) {
  if (ss.coords != CoordSystem::euclidean)
    throw invalid_input(std::string(what) + ": simulation requires euclidean site coordinates");
  if (ss.size() < 1) throw invalid_input(std::string(what) + ": empty site set");
}

struct BBox {
  double x0, x1, y0, y1;
};

inline BBox bounding_box(const SiteSet& ss, double margin) {
  BBox b{ss.sites[0].c1, ss.sites[0].c1, ss.sites[0].c2, ss.sites[0].c2};
  for (const auto& s : ss.sites) {
    b.x0 = std::min(b.x0, s.c1);
    b.x1 = std::max(b.x1, s.c1);
    b.y0 = std::min(b.y0, s.c2);
    b.y1 = std::max(b.y1, s.c2);
  }
  b.x0 -= margin;
  b.x1 += margin;
  b.y0 -= margin;
  b.y1 += margin;
  return b;
}

inline double running_min(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::min(m, v);
  return m;
}

// Storm-profile model: X(s) = max_k |B| f(s - C_k) / P_k with Gaussian-density
// profiles. Centers outside the window contribute at most f(4*sigma_max),
// a relative bias below ~3e-4 of the peak profile height.
inline void simulate_smith(const SmithParams& p, const SiteSet& ss, FieldSample& out,
                           std::mt19937_64& eng) {
  const double tr = p.s11 + p.s22;
  const double det = p.s11 * p.s22 - p.s12 * p.s12;
  const double lam_max = 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
  const BBox box = bounding_box(ss, 4.0 * std::sqrt(lam_max));
  const double area = (box.x1 - box.x0) * (box.y1 - box.y0);
  const double i11 = p.s22 / det, i22 = p.s11 / det, i12 = -p.s12 / det;
  const double fmax = 1.0 / (2.0 * kPi * std::sqrt(det));

  const int k = ss.size();
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1);
  std::vector<double> z(k);
  for (int rep = 0; rep < out.n; ++rep) {
    std::fill(z.begin(), z.end(), 0.0);
    double xi = 0.0, zmin = 0.0;
    for (long storm = 0;; ++storm) {
      if (storm > kMaxStormsPerReplicate)
        throw numeric_failure("simulate_smith: storm budget exhausted");
      xi += expo(eng);
      if (zmin > 0.0 && area * fmax / xi < zmin) break;
      const double cx = ux(eng), cy = uy(eng);
      for (int j = 0; j < k; ++j) {
        const double dx = ss.sites[j].c1 - cx, dy = ss.sites[j].c2 - cy;
        const double q = std::exp(-0.5 * (i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy));
        z[j] = std::max(z[j], area * fmax * q / xi);
      }
      zmin = running_min(z);
    }
    for (int j = 0; j < k; ++j) out.at(rep, j) = z[j];
  }
}

// Disk-storm model: X(s) = max_k c * max(0, eps_k(s)) * 1{|s-C_k| <= r} / P_k,
// centers uniform on the r-dilated window, c = sqrt(2*pi)*|W|/(pi r^2) so that
// E Q(s) = 1 on the domain. The realized pairwise truncation factor is the
// normalized disk-overlap (2/pi)(acos u - u sqrt(1-u^2)), u = h/(2r), which
// sits below the linear factor (1 - u) by at most 0.109 (at u ~ 0.5).
inline void simulate_teg(const TegParams& p, const SiteSet& ss, FieldSample& out,
                         std::mt19937_64& eng) {
  const BBox box = bounding_box(ss, p.r);
  const double area = (box.x1 - box.x0) * (box.y1 - box.y0);
  const double c = std::sqrt(2.0 * kPi) * area / (kPi * p.r * p.r);
  const int k = ss.size();
  const Eigen::MatrixXd dist = distance_matrix(ss);

  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(k);
  std::vector<int> covered;
  for (int rep = 0; rep < out.n; ++rep) {
    std::fill(z.begin(), z.end(), 0.0);
    double xi = 0.0, zmin = 0.0;
    for (long storm = 0;; ++storm) {
      if (storm > kMaxStormsPerReplicate)
        throw numeric_failure("simulate_teg: storm budget exhausted");
      xi += expo(eng);
      if (zmin > 0.0 && c * kSpectralTailSigma / xi < zmin) break;
      const double cx = ux(eng), cy = uy(eng);
      covered.clear();
      for (int j = 0; j < k; ++j) {
        const double dx = ss.sites[j].c1 - cx, dy = ss.sites[j].c2 - cy;
        if (dx * dx + dy * dy <= p.r * p.r) covered.push_back(j);
      }
      if (covered.empty()) continue;
      const int m = static_cast<int>(covered.size());
      Eigen::VectorXd eps(m);
      if (m == 1) {
        eps[0] = gauss(eng);
      } else {
        Eigen::MatrixXd sub(m, m);
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b)
            sub(a, b) = std::exp(-dist(covered[a], covered[b]) / p.corr.range);
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        Eigen::VectorXd zn(m);
        for (int a = 0; a < m; ++a) zn[a] = gauss(eng);
        if (llt.info() == Eigen::Success)
          eps = llt.matrixL() * zn;
        else
          eps = gaussian_factor(sub) * zn;
      }
      bool touched = false;
      for (int a = 0; a < m; ++a) {
        if (eps[a] <= 0.0) continue;
        const int j = covered[a];
        const double q = c * eps[a] / xi;
        if (q > z[j]) {
          z[j] = q;
          touched = true;
        }
      }
      if (touched || zmin == 0.0) zmin = running_min(z);
    }
    for (int j = 0; j < k; ++j) out.at(rep, j) = z[j];
  }
}

// Stationary spectral construction: X(s) = max_k m_v max(0, G_k(s))^v / P_k
// with 1/m_v = E max(0,G)^v = 2^(v/2-1) Gamma((v+1)/2) / sqrt(pi).
inline void simulate_extremal_t(const ExtremalTParams& p, const SiteSet& ss, FieldSample& out,
                                std::mt19937_64& eng) {
  const int k = ss.size();
  const Eigen::MatrixXd factor = gaussian_factor(correlation_matrix(ss, p.corr));
  const double v = p.dof;
  const double mv =
      std::exp(0.5 * std::log(kPi) - (0.5 * v - 1.0) * std::log(2.0) - std::lgamma(0.5 * (v + 1.0)));
  const double qcap = mv * std::pow(kSpectralTailSigma, v);

  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(k);
  Eigen::VectorXd zn(k), g(k);
  for (int rep = 0; rep < out.n; ++rep) {
    std::fill(z.begin(), z.end(), 0.0);
    double xi = 0.0, zmin = 0.0;
    for (long storm = 0;; ++storm) {
      if (storm > kMaxStormsPerReplicate)
        throw numeric_failure("simulate_extremal_t: storm budget exhausted");
      xi += expo(eng);
      if (zmin > 0.0 && qcap / xi < zmin) break;
      for (int j = 0; j < k; ++j) zn[j] = gauss(eng);
      g.noalias() = factor * zn;
      for (int j = 0; j < k; ++j) {
        if (g[j] <= 0.0) continue;
        z[j] = std::max(z[j], mv * std::pow(g[j], v) / xi);
      }
      zmin = running_min(z);
    }
    for (int j = 0; j < k; ++j) out.at(rep, j) = z[j];
  }
}

// Exact simulation via extremal functions (no spectral truncation): for each
// anchor site the spectral functions are the log-normal fields
// exp{ W(s) - W(s_n) - gamma(s - s_n) }, and a proposed function is kept only
// if it is not already dominated at every earlier anchor. Origin-anchored
// truncated sampling is useless for steep variograms (reaching Frechet scale
// at distance d needs a ~sqrt(gamma(d)) sigma Gaussian event), which is why
// the exact route is used instead.
inline void simulate_brown_resnick(const BrownResnickParams& p, const SiteSet& ss,
                                   FieldSample& out, std::mt19937_64& eng) {
  const int k = ss.size();
  const Eigen::MatrixXd dist = distance_matrix(ss);
  Eigen::MatrixXd gamma(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) gamma(i, j) = semivariogram(p.vario, dist(i, j));

  // Per-anchor factors of Cov(W(s_i)-W(s_n), W(s_j)-W(s_n)).
  std::vector<Eigen::MatrixXd> factors(k);
  for (int n = 0; n < k; ++n) {
    Eigen::MatrixXd cov(k - 1, k - 1);
    for (int i = 0, a = 0; i < k; ++i) {
      if (i == n) continue;
      for (int j = 0, b = 0; j < k; ++j) {
        if (j == n) continue;
        cov(a, b) = gamma(i, n) + gamma(j, n) - gamma(i, j);
        ++b;
      }
      ++a;
    }
    factors[n] = gaussian_factor(cov);
  }

  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(k), y(k);
  Eigen::VectorXd zn(k - 1), w(k - 1);
  for (int rep = 0; rep < out.n; ++rep) {
    std::fill(z.begin(), z.end(), 0.0);
    for (int n = 0; n < k; ++n) {
      double zeta = expo(eng);
      for (long iter = 0; 1.0 / zeta > z[n]; ++iter) {
        if (iter > kMaxStormsPerReplicate)
          throw numeric_failure("simulate_brown_resnick: proposal budget exhausted");
        for (int j = 0; j < k - 1; ++j) zn[j] = gauss(eng);
        w.noalias() = factors[n] * zn;
        for (int i = 0, a = 0; i < k; ++i) {
          if (i == n) {
            y[i] = 1.0;
            continue;
          }
          y[i] = std::exp(w[a] - gamma(i, n));
          ++a;
        }
        bool fresh = true;
        for (int m = 0; m < n; ++m) {
          if (y[m] / zeta >= z[m]) {
            fresh = false;
            break;
          }
        }
        if (fresh)
          for (int i = 0; i < k; ++i) z[i] = std::max(z[i], y[i] / zeta);
        zeta += expo(eng);
      }
    }
    for (int j = 0; j < k; ++j) out.at(rep, j) = z[j];
  }
}

}  // namespace detail

// Window padding used by the storm-position samplers (recorded in sidecars).
inline double window_margin(const MaxStableSpec& spec) {
  if (const auto* p = std::get_if<SmithParams>(&spec.family)) {
    const double tr = p->s11 + p->s22;
    const double det = p->s11 * p->s22 - p->s12 * p->s12;
    return 4.0 * std::sqrt(0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4.0 * det))));
  }
  if (const auto* p = std::get_if<TegParams>(&spec.family)) return p->r;
  return 0.0;
}

inline FieldSample sample_gaussian(const SiteSet& ss, const CorrelationSpec& corr, int n,
                                   std::uint64_t seed, std::string_view label = "gaussian") {
  detail::require_euclidean(ss, "sample_gaussian");
  if (n < 1) throw invalid_input("sample_gaussian: n must be >= 1");
  const int k = ss.size();
  const Eigen::MatrixXd factor = gaussian_factor(correlation_matrix(ss, corr));
  FieldSample out(n, k, Margins::raw);
  out.seed = seed;
  out.seed_label = std::string(label);
  auto eng = substream(seed, label);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd zn(k), x(k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) zn[j] = gauss(eng);
    x.noalias() = factor * zn;
    for (int j = 0; j < k; ++j) out.at(i, j) = x[j];
  }
  return out;
}

inline FieldSample simulate_max_stable(const MaxStableSpec& spec, const SiteSet& ss, int n,
                                       std::uint64_t seed, std::string_view label = "max-stable") {
  validate(spec);
  detail::require_euclidean(ss, "simulate_max_stable");
  if (n < 1) throw invalid_input("simulate_max_stable: n must be >= 1");
  FieldSample out(n, ss.size(), Margins::unit_frechet);
  out.seed = seed;
  out.seed_label = std::string(label);
  auto eng = substream(seed, label);
  if (const auto* p = std::get_if<SmithParams>(&spec.family))
    detail::simulate_smith(*p, ss, out, eng);
  else if (const auto* p = std::get_if<TegParams>(&spec.family))
    detail::simulate_teg(*p, ss, out, eng);
  else if (const auto* p = std::get_if<BrownResnickParams>(&spec.family))
    detail::simulate_brown_resnick(*p, ss, out, eng);
  else
    detail::simulate_extremal_t(std::get<ExtremalTParams>(spec.family), ss, out, eng);
  return out;
}

// Pointwise inversion: unit-Frechet max-stable -> unit-Frechet asymptotically
// independent field. NaN passes through.
inline FieldSample invert_max_stable(const FieldSample& f) {
  if (f.margins != Margins::unit_frechet)
    throw invalid_input("invert_max_stable: input must have unit-frechet margins");
  FieldSample out(f.n, f.k, Margins::unit_frechet);
  out.seed = f.seed;
  out.seed_label = f.seed_label;
  for (size_t i = 0; i < f.values.size(); ++i) {
    const double x = f.values[i];
    if (!std::isfinite(x)) {
      out.values[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (x <= 0.0) throw invalid_input("invert_max_stable: non-positive value");
    out.values[i] = -1.0 / std::log(-std::expm1(-1.0 / x));
  }
  return out;
}

// Marginal map of a standard Gaussian field to unit Frechet; the result keeps
// the Gaussian copula, i.e. is asymptotically independent.
inline FieldSample gaussian_to_ai_frechet(const FieldSample& f) {
  FieldSample out(f.n, f.k, Margins::unit_frechet);
  out.seed = f.seed;
  out.seed_label = f.seed_label;
  for (size_t i = 0; i < f.values.size(); ++i) {
    const double x = f.values[i];
    out.values[i] = std::isfinite(x)
                        ? -1.0 / std::log1p(-0.5 * std::erfc(x * 0.70710678118654752440))
                        : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

inline FieldSample simulate_max_mixture(const MaxMixtureSpec& mm, const SiteSet& ss, int n,
                                        std::uint64_t seed) {
  validate(mm);
  detail::require_euclidean(ss, "simulate_max_mixture");
  // Degenerate mixtures take the exact branch; the unused component is never
  // simulated so its substream is untouched.
  if (mm.a == 1.0) {
    FieldSample x = simulate_max_stable(mm.x, ss, n, seed, "mm-x");
    x.seed_label = "mm-x (a=1)";
    return x;
  }
  if (mm.a == 0.0) {
    FieldSample y = invert_max_stable(simulate_max_stable(mm.y, ss, n, seed, "mm-y"));
    y.seed_label = "mm-y (a=0)";
    return y;
  }
  FieldSample x = simulate_max_stable(mm.x, ss, n, seed, "mm-x");
  FieldSample y = invert_max_stable(simulate_max_stable(mm.y, ss, n, seed, "mm-y"));
  FieldSample out(n, ss.size(), Margins::unit_frechet);
  out.seed = seed;
  out.seed_label = "mm";
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::max(mm.a * x.values[i], (1.0 - mm.a) * y.values[i]);
  return out;
}

}  // namespace maxmix
