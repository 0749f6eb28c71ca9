#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maxmix/errors.hpp"
#include "maxmix/field.hpp"

namespace maxmix {

// Conditional exceedance of the max-mixture at one lag, parameterized by the
// local extremal coefficients.
struct ConditionalQuery {
  double a = 0.5;
  double theta_x = 1.5;
  double theta_y = 1.5;
  double z = 1.0;  // unit-Frechet threshold
};

// P[Z(s') > z | Z(s) > z] =
//   [1 - 2 e^{-1/z} + e^{-a thetaX/z} (-1 + 2 e^{-(1-a)/z}
//      + (1 - e^{-(1-a)/z})^{thetaY})] / (1 - e^{-1/z}).
inline double conditional_exceedance_mm(const ConditionalQuery& q) {
  if (!(q.z > 0.0)) throw invalid_input("conditional_exceedance_mm: z must be positive");
  if (!(q.a >= 0.0 && q.a <= 1.0)) throw invalid_input("conditional_exceedance_mm: a in [0,1]");
  if (!(q.theta_x >= 1.0 && q.theta_x <= 2.0) || !(q.theta_y >= 1.0 && q.theta_y <= 2.0))
    throw invalid_input("conditional_exceedance_mm: extremal coefficients in [1,2]");
  const double t = std::exp(-1.0 / q.z);
  const double s = std::exp(-(1.0 - q.a) / q.z);
  const double num =
      1.0 - 2.0 * t + std::exp(-q.a * q.theta_x / q.z) *
                          (-1.0 + 2.0 * s + std::pow(1.0 - s, q.theta_y));
  const double den = 1.0 - t;
  if (den <= 0.0) return 1.0;  // z -> 0 limit: exceedance certain
  return std::clamp(num / den, 0.0, 1.0);
}

// Empirical counterpart on a (common-scale) field: joint exceedances over
// conditional exceedances for a chosen site pair. Negative count => NaN.
inline double conditional_exceedance_empirical(const FieldSample& field, int cond_site,
                                               int target_site, double z,
                                               long* n_cond = nullptr) {
  if (cond_site < 0 || cond_site >= field.k || target_site < 0 || target_site >= field.k)
    throw invalid_input("conditional_exceedance_empirical: site index out of range");
  long joint = 0, cond = 0;
  for (int i = 0; i < field.n; ++i) {
    const double zc = field.at(i, cond_site), zt = field.at(i, target_site);
    if (!std::isfinite(zc) || !std::isfinite(zt)) continue;
    if (zc > z) {
      ++cond;
      if (zt > z) ++joint;
    }
  }
  if (n_cond) *n_cond = cond;
  if (cond == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(joint) / cond;
}

struct PPCurve {
  std::vector<double> q;          // probability levels
  std::vector<double> z;          // thresholds (conditioning-site quantiles)
  std::vector<double> empirical;  // empirical conditional exceedance
  std::vector<double> model;      // closed-form conditional exceedance
};

// Probability-probability style curve over a grid of high quantiles of the
// conditioning site. The field must already be on the unit-Frechet scale.
inline PPCurve pp_curve(const FieldSample& field, int cond_site, int target_site, double a,
                        double theta_x, double theta_y, const std::vector<double>& q_grid) {
  if (field.margins != Margins::unit_frechet)
    throw invalid_input("pp_curve: field must be on the unit-frechet scale");
  std::vector<double> col;
  for (int i = 0; i < field.n; ++i) {
    const double v = field.at(i, cond_site);
    if (std::isfinite(v)) col.push_back(v);
  }
  if (col.size() < 10) throw invalid_input("pp_curve: too few observations at conditioning site");
  std::sort(col.begin(), col.end());
  PPCurve out;
  for (double q : q_grid) {
    if (!(q > 0.0 && q < 1.0)) throw invalid_input("pp_curve: quantile levels must be in (0,1)");
    const double pos = q * (col.size() - 1);
    const size_t i0 = static_cast<size_t>(pos);
    const double frac = pos - i0;
    const double z = i0 + 1 < col.size() ? col[i0] * (1.0 - frac) + col[i0 + 1] * frac
                                         : col.back();
    out.q.push_back(q);
    out.z.push_back(z);
    out.empirical.push_back(conditional_exceedance_empirical(field, cond_site, target_site, z));
    out.model.push_back(conditional_exceedance_mm({a, theta_x, theta_y, z}));
  }
  return out;
}

}  // namespace maxmix
