#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "maxmix/errors.hpp"
#include "maxmix/field.hpp"
#include "maxmix/models.hpp"
#include "maxmix/spatial.hpp"
#include "maxmix/special.hpp"

namespace maxmix {

namespace detail {

inline double smith_isotropic_beta(const SmithParams& p, double h) {
  // Scalar-lag dependence functions require an isotropic storm shape.
  if (p.s12 != 0.0 || p.s11 != p.s22)
    throw invalid_input("smith: scalar-lag dependence needs isotropic covariance (s11==s22, s12==0)");
  return h / std::sqrt(p.s11);
}

inline double teg_alpha(const TegParams& p, double h) {
  const double u = h / (2.0 * p.r);
  return u >= 1.0 ? 0.0 : 1.0 - u;
}

}  // namespace detail

// Extremal coefficient theta(h) in [1,2] for each family.
inline double theta_closed_form(const MaxStableSpec& spec, double h) {
  if (!(h >= 0.0)) throw invalid_input("theta_closed_form: h must be >= 0");
  validate(spec);
  if (const auto* p = std::get_if<SmithParams>(&spec.family)) {
    return 2.0 * std_normal_cdf(0.5 * detail::smith_isotropic_beta(*p, h));
  }
  if (const auto* p = std::get_if<TegParams>(&spec.family)) {
    const double rho = correlation(p->corr, h);
    return 2.0 - detail::teg_alpha(*p, h) * (1.0 - std::sqrt(0.5 * (1.0 - rho)));
  }
  if (const auto* p = std::get_if<BrownResnickParams>(&spec.family)) {
    return 2.0 * std_normal_cdf(std::sqrt(0.5 * semivariogram(p->vario, h)));
  }
  const auto& p = std::get<ExtremalTParams>(spec.family);
  const double rho = correlation(p.corr, h);
  const double arg = std::sqrt((p.dof + 1.0) * (1.0 - rho) / (1.0 + rho));
  return 2.0 * student_t_cdf(arg, p.dof + 1.0);
}

// Bivariate exponent function V(x1,x2) at separation h; homogeneous of
// order -1, with V(x,inf)=1/x and z*V(z,z)=theta(h).
inline double exponent_bivariate(const MaxStableSpec& spec, double h, double x1, double x2) {
  if (!(x1 > 0.0 && x2 > 0.0)) throw invalid_input("exponent_bivariate: x1,x2 must be positive");
  if (!(h >= 0.0)) throw invalid_input("exponent_bivariate: h must be >= 0");
  validate(spec);

  // Complete-dependence limit shared by the Gaussian-type families.
  auto hr_type = [&](double beta) {
    if (beta < 1e-12) return std::max(1.0 / x1, 1.0 / x2);
    const double lr = std::log(x2 / x1) / beta;
    return std_normal_cdf(0.5 * beta + lr) / x1 + std_normal_cdf(0.5 * beta - lr) / x2;
  };

  if (const auto* p = std::get_if<SmithParams>(&spec.family)) {
    return hr_type(detail::smith_isotropic_beta(*p, h));
  }
  if (const auto* p = std::get_if<BrownResnickParams>(&spec.family)) {
    return hr_type(std::sqrt(2.0 * semivariogram(p->vario, h)));
  }
  if (const auto* p = std::get_if<TegParams>(&spec.family)) {
    const double rho = correlation(p->corr, h);
    const double alpha = detail::teg_alpha(*p, h);
    const double s = x1 + x2;
    const double root = std::sqrt(std::max(0.0, 1.0 - 2.0 * (rho + 1.0) * x1 * x2 / (s * s)));
    return (1.0 / x1 + 1.0 / x2) * (1.0 - 0.5 * alpha * (1.0 - root));
  }
  const auto& p = std::get<ExtremalTParams>(spec.family);
  const double rho = correlation(p.corr, h);
  if (1.0 - rho * rho < 1e-14) return std::max(1.0 / x1, 1.0 / x2);
  const double alpha = std::sqrt((p.dof + 1.0) / (1.0 - rho * rho));
  const double r12 = std::pow(x2 / x1, 1.0 / p.dof);
  const double r21 = std::pow(x1 / x2, 1.0 / p.dof);
  return student_t_cdf(alpha * (r12 - rho), p.dof + 1.0) / x1 +
         student_t_cdf(alpha * (r21 - rho), p.dof + 1.0) / x2;
}

// ---------------------------------------------------------------------------
// F^lambda-madogram of the max-mixture process, closed form.
//
//   nu(h) = lambda/(1+lambda) - 2*lambda/(a*(thetaX-1)+1+lambda)
//         + lambda/(a*thetaX+lambda)
//         - lambda*thetaY/((1-a)*thetaY + a*thetaX + lambda) * B(p, thetaY),
//   p = (a*thetaX+lambda)/(1-a).
//
// Limits: a->1 gives the max-stable form lambda/(1+lambda)*(thetaX-1)/(lambda+thetaX);
// a->0 gives 1/(1+lambda) - lambda*thetaY/(lambda+thetaY)*B(lambda,thetaY).
// ---------------------------------------------------------------------------
inline double flambda_mm_theoretical(double a, double lambda, double theta_x, double theta_y) {
  if (!(a >= 0.0 && a <= 1.0)) throw invalid_input("flambda_mm_theoretical: a must be in [0,1]");
  if (!(lambda > 0.0)) throw invalid_input("flambda_mm_theoretical: lambda must be positive");
  if (!(theta_x >= 1.0 && theta_x <= 2.0) || !(theta_y >= 1.0 && theta_y <= 2.0))
    throw invalid_input("flambda_mm_theoretical: extremal coefficients must be in [1,2]");

  if (1.0 - a < 1e-8) {
    return lambda / (1.0 + lambda) * (theta_x - 1.0) / (lambda + theta_x);
  }
  if (a < 1e-12) {
    return 1.0 / (1.0 + lambda) -
           lambda * theta_y / (lambda + theta_y) * beta_fn(lambda, theta_y);
  }
  const double p = (a * theta_x + lambda) / (1.0 - a);
  return lambda / (1.0 + lambda) - 2.0 * lambda / (a * (theta_x - 1.0) + 1.0 + lambda) +
         lambda / (a * theta_x + lambda) -
         lambda * theta_y / ((1.0 - a) * theta_y + a * theta_x + lambda) * beta_fn(p, theta_y);
}

// Independent quadrature route to the same quantity:
//   nu = (1 - int_0^1 G) - 1/(1+lambda),
//   G(z) = 2 z^{(a(thetaX-1)+1)/lambda} - z^{a thetaX/lambda}
//        + z^{a thetaX/lambda} (1 - z^{(1-a)/lambda})^{thetaY}.
inline double flambda_integral_oracle(double a, double lambda, double theta_x, double theta_y,
                                      double tol = 1e-12) {
  if (!(a >= 0.0 && a <= 1.0) || !(lambda > 0.0))
    throw invalid_input("flambda_integral_oracle: bad arguments");
  const double e1 = (a * (theta_x - 1.0) + 1.0) / lambda;
  const double e2 = a * theta_x / lambda;
  const double e3 = (1.0 - a) / lambda;
  auto g = [&](double z) {
    const double za = std::pow(z, e2);
    const double tail = (e3 == 0.0) ? 0.0 : std::pow(1.0 - std::pow(z, e3), theta_y);
    return 2.0 * std::pow(z, e1) - za + za * tail;
  };
  const double integral = integrate(g, 0.0, 1.0, tol);
  return (1.0 - integral) - 1.0 / (1.0 + lambda);
}

// theta = (0.5+nu)/(0.5-nu) for the lambda=1 F-madogram of a max-stable field.
inline double theta_from_fmadogram(double nu) {
  if (!(nu >= 0.0) || nu >= 0.5) throw invalid_input("theta_from_fmadogram: nu must be in [0,0.5)");
  const double theta = (0.5 + nu) / (0.5 - nu);
  return std::min(2.0, std::max(1.0, theta));
}

// chi(h) of the max-mixture and the AI coefficient of the inverted process.
inline double chi_mm(const MaxMixtureSpec& mm, double h) {
  return mm.a * (2.0 - theta_closed_form(mm.x, h));
}

inline double eta_of(const MaxStableSpec& y_spec, double h) {
  return 1.0 / theta_closed_form(y_spec, h);
}

// ---------------------------------------------------------------------------
// Empirical madograms
// ---------------------------------------------------------------------------

struct MadogramCurve {
  double lambda = 1.0;
  std::vector<double> h;       // bin representative distances
  std::vector<double> value;   // pooled madogram estimate
  std::vector<long> count;     // pooled (pair, replicate) observations
  std::string kind = "empirical";
};

// Pooled estimate per bin: mean of 0.5*|u_i^lambda - u_j^lambda| over all
// member pairs and their jointly observed replicates.
inline MadogramCurve flambda_madogram_empirical(const FieldSample& field,
                                                const std::vector<PairLag>& pairs,
                                                const LagBins& bins, double lambda) {
  if (!(lambda > 0.0)) throw invalid_input("flambda_madogram_empirical: lambda must be positive");
  const FieldSample u = uniform_view(field);
  MadogramCurve curve;
  curve.lambda = lambda;
  for (const auto& bin : bins.bins) {
    double acc = 0.0;
    long cnt = 0;
    for (int idx : bin.pair_index) {
      const auto& p = pairs[idx];
      for (int i = 0; i < u.n; ++i) {
        const double u1 = u.at(i, p.i), u2 = u.at(i, p.j);
        if (!std::isfinite(u1) || !std::isfinite(u2)) continue;
        acc += 0.5 * std::fabs(std::pow(u1, lambda) - std::pow(u2, lambda));
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    curve.h.push_back(bin.rep);
    curve.value.push_back(acc / cnt);
    curve.count.push_back(cnt);
  }
  return curve;
}

inline MadogramCurve fmadogram_empirical(const FieldSample& field,
                                         const std::vector<PairLag>& pairs, const LagBins& bins) {
  return flambda_madogram_empirical(field, pairs, bins, 1.0);
}

// Single-pair variant used by the per-pair (point cloud) estimation mode.
inline double flambda_madogram_pair(const FieldSample& u_field, const PairLag& pair,
                                    double lambda, long* count_out = nullptr) {
  double acc = 0.0;
  long cnt = 0;
  for (int i = 0; i < u_field.n; ++i) {
    const double u1 = u_field.at(i, pair.i), u2 = u_field.at(i, pair.j);
    if (!std::isfinite(u1) || !std::isfinite(u2)) continue;
    acc += 0.5 * std::fabs(std::pow(u1, lambda) - std::pow(u2, lambda));
    ++cnt;
  }
  if (count_out) *count_out = cnt;
  return cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Empirical tail dependence chi(h,u) and chibar(h,u)
// ---------------------------------------------------------------------------

struct ChiCurve {
  double u = 0.97;
  std::vector<double> h;
  std::vector<double> chi;
  std::vector<double> chibar;
  std::vector<long> joint_count;  // pooled joint exceedances; 0 => flagged bin
  std::vector<bool> defined;
};

// Pooled over member pairs: chi = P(both > u)/P(one > u),
// chibar = 2 log P(one > u) / log P(both > u) - 1.
inline ChiCurve chi_chibar_empirical(const FieldSample& field, const std::vector<PairLag>& pairs,
                                     const LagBins& bins, double u) {
  if (!(u > 0.0 && u < 1.0)) throw invalid_input("chi_chibar_empirical: u must be in (0,1)");
  const FieldSample uf = uniform_view(field);
  ChiCurve out;
  out.u = u;
  for (const auto& bin : bins.bins) {
    long joint = 0, marg = 0, total = 0;
    for (int idx : bin.pair_index) {
      const auto& p = pairs[idx];
      for (int i = 0; i < uf.n; ++i) {
        const double u1 = uf.at(i, p.i), u2 = uf.at(i, p.j);
        if (!std::isfinite(u1) || !std::isfinite(u2)) continue;
        ++total;
        if (u1 > u) ++marg;
        if (u2 > u) ++marg;
        if (u1 > u && u2 > u) ++joint;
      }
    }
    if (total == 0) continue;
    out.h.push_back(bin.rep);
    out.joint_count.push_back(joint);
    const double pj = static_cast<double>(joint) / total;
    const double pm = 0.5 * static_cast<double>(marg) / total;
    const bool ok = joint > 0 && pm > 0.0;
    out.defined.push_back(ok);
    if (ok) {
      out.chi.push_back(pj / pm);
      out.chibar.push_back(2.0 * std::log(pm) / std::log(pj) - 1.0);
    } else {
      out.chi.push_back(std::numeric_limits<double>::quiet_NaN());
      out.chibar.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

}  // namespace maxmix
