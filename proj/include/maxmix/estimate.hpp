#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maxmix/depmeasures.hpp"
#include "maxmix/errors.hpp"
#include "maxmix/field.hpp"
#include "maxmix/optim.hpp"
#include "maxmix/spatial.hpp"

namespace maxmix {

struct NlsConfig {
  std::vector<double> lambdas{1.0, 3.0};  // estimation grid
  double lambda_sel = 1.5;                // selection madogram order
  int grid_n = 41;                        // coarse grid per theta axis
  double tol = 1e-8;
  int max_iter = 300;
};

struct ThetaBinEstimate {
  double h = 0.0;
  double theta_x = 1.0, theta_y = 1.0;
  double objective = 0.0;
  bool at_boundary_x = false, at_boundary_y = false;
};

struct ThetaEstimates {
  double a = 0.0;
  std::vector<ThetaBinEstimate> bins;
};

struct DCResult {
  std::vector<double> a_grid;
  std::vector<double> dc;
  std::vector<int> excluded_bins;  // per a: bins dropped for near-zero model madogram
  std::vector<ThetaEstimates> estimates;
  double a_hat = 0.0;
  size_t argmin_index = 0;
};

enum class DCWeights { equal, distance_quantile };

// Per-replicate half absolute differences of the F^lambda margins for one
// pair; only jointly observed replicates contribute.
inline std::vector<double> q_statistics(const FieldSample& field, const PairLag& pair,
                                        double lambda) {
  if (!(lambda > 0.0)) throw invalid_input("q_statistics: lambda must be positive");
  const FieldSample u = uniform_view(field);
  std::vector<double> out;
  out.reserve(u.n);
  for (int i = 0; i < u.n; ++i) {
    const double u1 = u.at(i, pair.i), u2 = u.at(i, pair.j);
    if (!std::isfinite(u1) || !std::isfinite(u2)) continue;
    out.push_back(0.5 * std::fabs(std::pow(u1, lambda) - std::pow(u2, lambda)));
  }
  return out;
}

namespace detail {

// Sum over lambdas of (nu_hat - Phi(a,lambda,thetaX,thetaY))^2. Minimizing it
// per bin is exactly equivalent to the per-observation least squares
// sum_i (Q_i - Phi)^2, since the latter is N*(nu_hat - Phi)^2 plus a constant.
struct BinObjective {
  double a;
  const std::vector<double>& lambdas;
  const std::vector<double>& nu_hat;  // one entry per lambda
  double operator()(double tx, double ty) const {
    double s = 0.0;
    for (size_t l = 0; l < lambdas.size(); ++l) {
      const double d = nu_hat[l] - flambda_mm_theoretical(a, lambdas[l], tx, ty);
      s += d * d;
    }
    return s;
  }
};

inline ThetaBinEstimate fit_bin(double h, double a, const std::vector<double>& lambdas,
                                const std::vector<double>& nu_hat, const NlsConfig& cfg) {
  BinObjective obj{a, lambdas, nu_hat};
  // Coarse grid, scanned in increasing (thetaX, thetaY) order so ties resolve
  // toward the smaller values.
  const int n = std::max(2, cfg.grid_n);
  double best_tx = 1.0, best_ty = 1.0, best_f = std::numeric_limits<double>::infinity();
  for (int ix = 0; ix < n; ++ix) {
    const double tx = 1.0 + ix / (n - 1.0);
    for (int iy = 0; iy < n; ++iy) {
      const double ty = 1.0 + iy / (n - 1.0);
      const double f = obj(tx, ty);
      if (f < best_f) {
        best_f = f;
        best_tx = tx;
        best_ty = ty;
      }
    }
  }
  const std::vector<double> lo{1.0, 1.0}, hi{2.0, 2.0};
  auto res = nelder_mead([&](const std::vector<double>& x) { return obj(x[0], x[1]); },
                         {best_tx, best_ty}, 0.5 / (n - 1.0), cfg.tol, cfg.max_iter, &lo, &hi);
  ThetaBinEstimate est;
  est.h = h;
  est.theta_x = res.x[0];
  est.theta_y = res.x[1];
  est.objective = res.fval;
  const double edge = 1e-6;
  est.at_boundary_x = est.theta_x < 1.0 + edge || est.theta_x > 2.0 - edge;
  est.at_boundary_y = est.theta_y < 1.0 + edge || est.theta_y > 2.0 - edge;
  return est;
}

}  // namespace detail

// Binned empirical madograms for a list of lambdas, shared by the NLS fit and
// the selection criterion so both see identical pooled statistics.
inline std::vector<MadogramCurve> madogram_stack(const FieldSample& field,
                                                 const std::vector<PairLag>& pairs,
                                                 const LagBins& bins,
                                                 const std::vector<double>& lambdas) {
  std::vector<MadogramCurve> out;
  out.reserve(lambdas.size());
  const FieldSample u = uniform_view(field);  // uniformize once
  for (double lam : lambdas) out.push_back(flambda_madogram_empirical(u, pairs, bins, lam));
  return out;
}

inline ThetaEstimates nls_fit_theta(const FieldSample& field, const std::vector<PairLag>& pairs,
                                    const LagBins& bins, double a, const NlsConfig& cfg) {
  if (!(a >= 0.0 && a <= 1.0)) throw invalid_input("nls_fit_theta: a must be in [0,1]");
  if (cfg.lambdas.empty()) throw invalid_input("nls_fit_theta: empty lambda grid");
  const auto stack = madogram_stack(field, pairs, bins, cfg.lambdas);
  ThetaEstimates est;
  est.a = a;
  const size_t nbins = stack.front().h.size();
  std::vector<double> nu_hat(cfg.lambdas.size());
  for (size_t b = 0; b < nbins; ++b) {
    for (size_t l = 0; l < cfg.lambdas.size(); ++l) nu_hat[l] = stack[l].value[b];
    est.bins.push_back(detail::fit_bin(stack.front().h[b], a, cfg.lambdas, nu_hat, cfg));
  }
  return est;
}

// DC(a) = sum_h w(h) * (nu_hat(h)/nu_model(h) - 1)^2 at the selection lambda.
// Bins whose model madogram is below 1e-12 are excluded and counted.
inline double dc_criterion(const std::vector<double>& nu_hat_sel, const ThetaEstimates& est,
                           double a, double lambda_sel, const std::vector<double>& weights,
                           int* excluded = nullptr) {
  if (nu_hat_sel.size() != est.bins.size() || weights.size() != est.bins.size())
    throw invalid_input("dc_criterion: size mismatch");
  double dc = 0.0;
  int skip = 0;
  for (size_t b = 0; b < est.bins.size(); ++b) {
    const double model =
        flambda_mm_theoretical(a, lambda_sel, est.bins[b].theta_x, est.bins[b].theta_y);
    if (model < 1e-12) {
      ++skip;
      continue;
    }
    const double r = nu_hat_sel[b] / model - 1.0;
    dc += weights[b] * r * r;
  }
  if (excluded) *excluded = skip;
  return dc;
}

inline std::vector<double> dc_weights(const std::vector<PairLag>& pairs, const LagBins& bins,
                                      DCWeights mode, double quantile = 0.5) {
  std::vector<double> w(bins.bins.size(), 1.0);
  if (mode == DCWeights::equal) return w;
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& p : pairs) d.push_back(p.h);
  std::sort(d.begin(), d.end());
  const double cutoff = d[static_cast<size_t>(quantile * (d.size() - 1))];
  for (size_t b = 0; b < bins.bins.size(); ++b) w[b] = bins.bins[b].rep <= cutoff ? 1.0 : 0.0;
  return w;
}

// Full model-free selection sweep: one madogram stack, one theta fit per a,
// DC minimized over the grid (ties toward the smaller a).
inline DCResult select_a(const FieldSample& field, const std::vector<PairLag>& pairs,
                         const LagBins& bins, const std::vector<double>& a_grid,
                         const NlsConfig& cfg, DCWeights wmode = DCWeights::equal,
                         double wquantile = 0.5) {
  if (a_grid.empty()) throw invalid_input("select_a: empty a grid");
  std::vector<double> all_lambdas = cfg.lambdas;
  all_lambdas.push_back(cfg.lambda_sel);
  const auto stack = madogram_stack(field, pairs, bins, all_lambdas);
  const auto& sel_curve = stack.back();

  const std::vector<double> weights = dc_weights(pairs, bins, wmode, wquantile);
  DCResult out;
  out.a_grid = a_grid;
  std::vector<double> nu_hat(cfg.lambdas.size());
  for (double a : a_grid) {
    ThetaEstimates est;
    est.a = a;
    for (size_t b = 0; b < sel_curve.h.size(); ++b) {
      for (size_t l = 0; l < cfg.lambdas.size(); ++l) nu_hat[l] = stack[l].value[b];
      est.bins.push_back(detail::fit_bin(sel_curve.h[b], a, cfg.lambdas, nu_hat, cfg));
    }
    int skip = 0;
    const double dc = dc_criterion(sel_curve.value, est, a, cfg.lambda_sel, weights, &skip);
    out.dc.push_back(dc);
    out.excluded_bins.push_back(skip);
    out.estimates.push_back(std::move(est));
  }
  out.argmin_index = 0;
  for (size_t i = 1; i < out.dc.size(); ++i)
    if (out.dc[i] < out.dc[out.argmin_index]) out.argmin_index = i;
  out.a_hat = out.a_grid[out.argmin_index];
  return out;
}

// Relative mean squared error per lag over repeated experiments.
inline std::vector<double> mse_rel(const std::vector<std::vector<double>>& theta_hat,
                                   const std::vector<double>& theta_true) {
  if (theta_hat.empty()) throw invalid_input("mse_rel: no experiments");
  std::vector<double> out(theta_true.size(), 0.0);
  for (const auto& run : theta_hat) {
    if (run.size() != theta_true.size()) throw invalid_input("mse_rel: ragged input");
    for (size_t b = 0; b < run.size(); ++b) {
      const double d = run[b] - theta_true[b];
      out[b] += d * d / theta_true[b];
    }
  }
  for (auto& v : out) v /= theta_hat.size();
  return out;
}

// Diagnostic: smallest ratio of image distance to parameter distance for the
// (thetaX, thetaY) -> (nu_lambda)_lambda map over a grid. Values near zero
// flag a direction of non-identifiability (e.g. thetaY at a=1, thetaX at a=0).
inline double injectivity_probe(double a, const std::vector<double>& lambdas, int n_grid = 21) {
  if (lambdas.empty()) throw invalid_input("injectivity_probe: empty lambda grid");
  struct Pt {
    double tx, ty;
    std::vector<double> img;
  };
  std::vector<Pt> pts;
  for (int ix = 0; ix < n_grid; ++ix)
    for (int iy = 0; iy < n_grid; ++iy) {
      Pt p;
      p.tx = 1.0 + ix / (n_grid - 1.0);
      p.ty = 1.0 + iy / (n_grid - 1.0);
      for (double lam : lambdas) p.img.push_back(flambda_mm_theoretical(a, lam, p.tx, p.ty));
      pts.push_back(std::move(p));
    }
  double min_ratio = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      double d2 = 0.0;
      for (size_t l = 0; l < lambdas.size(); ++l) {
        const double d = pts[i].img[l] - pts[j].img[l];
        d2 += d * d;
      }
      const double dp = std::hypot(pts[i].tx - pts[j].tx, pts[i].ty - pts[j].ty);
      min_ratio = std::min(min_ratio, std::sqrt(d2) / dp);
    }
  return min_ratio;
}

}  // namespace maxmix
