#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "maxmix/errors.hpp"

namespace maxmix {

struct SimplexResult {
  std::vector<double> x;
  double fval = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead with optional box projection (candidates are clamped into
// [lo,hi] before evaluation). Converges when the simplex collapses both in
// parameter spread and function spread.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x0, double step, double tol, int max_iter,
                                 const std::vector<double>* lo = nullptr,
                                 const std::vector<double>* hi = nullptr) {
  const size_t d = x0.size();
  if (d == 0) throw invalid_input("nelder_mead: empty start point");
  auto clamp = [&](std::vector<double>& x) {
    if (!lo && !hi) return;
    for (size_t i = 0; i < d; ++i) {
      if (lo) x[i] = std::max(x[i], (*lo)[i]);
      if (hi) x[i] = std::min(x[i], (*hi)[i]);
    }
  };

  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  clamp(pts[0]);
  fv[0] = f(pts[0]);
  for (size_t i = 0; i < d; ++i) {
    pts[i + 1][i] += step;
    clamp(pts[i + 1]);
    // A clamped vertex can collide with the start point; push inward instead.
    if (pts[i + 1][i] == pts[0][i]) pts[i + 1][i] -= step;
    clamp(pts[i + 1]);
    fv[i + 1] = f(pts[i + 1]);
  }

  SimplexResult res;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<size_t> order(d + 1);
    for (size_t i = 0; i <= d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    const size_t best = order[0], worst = order[d], second = order[d - 1];

    double spread = 0.0, fspread = std::fabs(fv[worst] - fv[best]);
    for (size_t i = 0; i < d; ++i)
      spread = std::max(spread, std::fabs(pts[worst][i] - pts[best][i]));
    res.iterations = it;
    if (spread < tol && fspread < tol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(d, 0.0);
    for (size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (size_t j = 0; j < d; ++j) centroid[j] += pts[i][j];
    }
    for (size_t j = 0; j < d; ++j) centroid[j] /= d;

    auto blend = [&](double coef) {
      std::vector<double> x(d);
      for (size_t j = 0; j < d; ++j) x[j] = centroid[j] + coef * (centroid[j] - pts[worst][j]);
      clamp(x);
      return x;
    };

    std::vector<double> xr = blend(1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      std::vector<double> xe = blend(2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      std::vector<double> xc = blend(fr < fv[worst] ? 0.5 : -0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (size_t i = 0; i <= d; ++i) {
          if (i == best) continue;
          for (size_t j = 0; j < d; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
          clamp(pts[i]);
          fv[i] = f(pts[i]);
        }
      }
    }
  }

  size_t best = 0;
  for (size_t i = 1; i <= d; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = pts[best];
  res.fval = fv[best];
  return res;
}

}  // namespace maxmix
