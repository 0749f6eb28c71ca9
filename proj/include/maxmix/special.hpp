#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "maxmix/errors.hpp"

namespace maxmix {

inline double std_normal_cdf(double x) {
  // 1/sqrt(2)
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

inline double std_normal_pdf(double x) {
  // 1/sqrt(2*pi)
  return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

inline double log_beta(double p, double q) {
  return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
}

inline double beta_fn(double p, double q) { return std::exp(log_beta(p, q)); }

// Regularized incomplete beta I_x(a,b) via the continued fraction of its
// standard expansion, evaluated with the modified Lentz algorithm.
// https://en.wikipedia.org/wiki/Beta_function#Incomplete_beta_function
inline double reg_inc_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw invalid_input("reg_inc_beta: a,b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Symmetry keeps the continued fraction in its fast-converging region.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - reg_inc_beta(1.0 - x, b, a);

  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b)) / a;
  const double tiny = 1e-30;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 300; ++i) {
    int m = i / 2;
    double numerator;
    if (i == 0)
      numerator = 1.0;
    else if (i % 2 == 0)
      numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    else
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::fabs(1.0 - cd) < 1e-15) return front * (f - 1.0);
  }
  throw numeric_failure("reg_inc_beta: continued fraction did not converge");
}

// Student-t CDF with (possibly fractional) dof v > 0.
inline double student_t_cdf(double x, double v) {
  if (!(v > 0.0)) throw invalid_input("student_t_cdf: dof must be positive");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  const double p = 0.5 * reg_inc_beta(v / (v + x * x), 0.5 * v, 0.5);
  return x > 0 ? 1.0 - p : p;
}

namespace detail {

// Gauss-Kronrod 7-15 nodes/weights on [-1,1]; abscissae symmetric about 0.
inline constexpr double kGK15Nodes[8] = {
    0.00000000000000000, 0.20778495500789847, 0.40584515137739717, 0.58608723546769113,
    0.74153118559939444, 0.86486442335976907, 0.94910791234275852, 0.99145537112081264};
inline constexpr double kGK15Weights[8] = {
    0.20948214108472783, 0.20443294007529889, 0.19035057806478541, 0.16900472663926790,
    0.14065325971552592, 0.10479001032225018, 0.06309209262997855, 0.02293532201052922};
inline constexpr double kG7Weights[4] = {
    0.41795918367346939, 0.38183005050511894, 0.27970539148927667, 0.12948496616886969};

struct QuadResult {
  double value;
  double error;
};

template <class F>
QuadResult gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double k = 0.0, g = 0.0;
  const double f0 = f(c);
  k += kGK15Weights[0] * f0;
  g += kG7Weights[0] * f0;
  for (int i = 1; i < 8; ++i) {
    const double dx = h * kGK15Nodes[i];
    const double fsum = f(c - dx) + f(c + dx);
    k += kGK15Weights[i] * fsum;
    if (i % 2 == 0) g += kG7Weights[i / 2] * fsum;
  }
  return {k * h, std::fabs((k - g) * h)};
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [a,b]. Exhausted panels are
// accepted with their error estimate booked against a global budget, so an
// integrable endpoint singularity (tiny leftover mass on a width-2^-48 panel)
// never aborts the run; only a genuinely unresolved integral does.
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-11, int max_depth = 48) {
  struct Rec {
    const F& f;
    double tol_floor;
    double err = 0.0;
    double run(double lo, double hi, double tol, int depth) {
      auto r = detail::gk15(f, lo, hi);
      if (r.error <= std::max(tol, tol_floor) || depth <= 0) {
        err += r.error;
        return r.value;
      }
      const double mid = 0.5 * (lo + hi);
      return run(lo, mid, 0.5 * tol, depth - 1) + run(mid, hi, 0.5 * tol, depth - 1);
    }
  };
  if (!(b >= a)) throw invalid_input("integrate: bad interval");
  Rec rec{f, std::numeric_limits<double>::min()};
  const double value = rec.run(a, b, tol, max_depth);
  const double budget =
      std::max(16.0 * tol, 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(value));
  if (rec.err > budget) throw numeric_failure("integrate: adaptive subdivision exhausted");
  return value;
}

}  // namespace maxmix
