#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maxmix/errors.hpp"
#include "maxmix/field.hpp"
#include "maxmix/optim.hpp"

namespace maxmix {

struct GevParams {
  double loc = 0.0;
  double scale = 1.0;
  double shape = 0.0;
};

inline double gev_cdf(double z, const GevParams& p) {
  if (!(p.scale > 0.0)) throw invalid_input("gev_cdf: scale must be positive");
  const double s = (z - p.loc) / p.scale;
  if (std::fabs(p.shape) < 1e-6) return std::exp(-std::exp(-s));
  const double t = 1.0 + p.shape * s;
  if (t <= 0.0) return p.shape > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(t, -1.0 / p.shape));
}

inline double gev_neg_loglik(const std::vector<double>& x, const GevParams& p) {
  if (!(p.scale > 0.0)) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(x.size());
  double nll = n * std::log(p.scale);
  if (std::fabs(p.shape) < 1e-6) {
    for (double v : x) {
      const double s = (v - p.loc) / p.scale;
      nll += s + std::exp(-s);
    }
    return nll;
  }
  const double inv = 1.0 / p.shape;
  for (double v : x) {
    const double t = 1.0 + p.shape * (v - p.loc) / p.scale;
    if (t <= 0.0) return std::numeric_limits<double>::infinity();
    nll += (1.0 + inv) * std::log(t) + std::pow(t, -inv);
  }
  return nll;
}

// Maximum likelihood fit: moment start (Gumbel-calibrated scale/location,
// shape 0.1), derivative-free simplex on (loc, log scale, shape).
inline GevParams fit_gev_site(const std::vector<double>& data) {
  std::vector<double> x;
  for (double v : data)
    if (std::isfinite(v)) x.push_back(v);
  if (x.size() < 30) throw invalid_input("fit_gev_site: need at least 30 observations");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= (x.size() - 1);
  if (!(var > 0.0)) throw invalid_input("fit_gev_site: constant series");
  const double s0 = std::sqrt(6.0 * var) / 3.14159265358979323846;
  const double m0 = mean - 0.5772156649015329 * s0;

  auto nll = [&](const std::vector<double>& p) {
    return gev_neg_loglik(x, GevParams{p[0], std::exp(p[1]), p[2]});
  };
  auto res = nelder_mead(nll, {m0, std::log(s0), 0.1}, 0.1, 1e-8, 2000);
  if (!res.converged || !std::isfinite(res.fval))
    throw numeric_failure("fit_gev_site: likelihood optimization did not converge");
  return GevParams{res.x[0], std::exp(res.x[1]), res.x[2]};
}

struct MarginTransformReport {
  long clipped = 0;  // probabilities clipped away from {0,1}
};

// Map observations to the unit-Frechet scale through fitted GEV margins:
// z -> -1/log G(z). Probabilities at the boundaries are clipped into
// [1/(n+1), n/(n+1)] and counted.
inline FieldSample to_unit_frechet(const FieldSample& raw, const std::vector<GevParams>& fits,
                                   MarginTransformReport* report = nullptr) {
  if (static_cast<int>(fits.size()) != raw.k)
    throw invalid_input("to_unit_frechet: one GEV fit per site required");
  FieldSample out(raw.n, raw.k, Margins::unit_frechet);
  out.seed = raw.seed;
  out.seed_label = raw.seed_label;
  MarginTransformReport rep;
  for (int j = 0; j < raw.k; ++j) {
    const double nv = static_cast<double>(raw.valid_count(j));
    const double lo = 1.0 / (nv + 1.0), hi = nv / (nv + 1.0);
    for (int i = 0; i < raw.n; ++i) {
      const double z = raw.at(i, j);
      if (!std::isfinite(z)) {
        out.at(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double g = gev_cdf(z, fits[j]);
      if (g < lo || g > hi) {
        g = std::clamp(g, lo, hi);
        ++rep.clipped;
      }
      out.at(i, j) = -1.0 / std::log(g);
    }
  }
  if (report) *report = rep;
  return out;
}

// Rank-based alternative: per-site empirical probabilities, then the same
// Frechet map. Never needs clipping by construction.
inline FieldSample to_unit_frechet_empirical(const FieldSample& raw) {
  FieldSample u = to_pseudo_uniform(raw);
  FieldSample out(raw.n, raw.k, Margins::unit_frechet);
  out.seed = raw.seed;
  out.seed_label = raw.seed_label;
  for (size_t i = 0; i < u.values.size(); ++i) {
    const double p = u.values[i];
    out.values[i] =
        std::isfinite(p) ? -1.0 / std::log(p) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace maxmix
