#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "maxmix/errors.hpp"

namespace maxmix {

// rho(h) = exp(-h/range)
struct CorrelationSpec {
  double range = 1.0;
};

inline double correlation(const CorrelationSpec& c, double h) { return std::exp(-h / c.range); }

// 2*gamma(h) = (h/scale)^exponent
struct VariogramSpec {
  double scale = 1.0;
  double exponent = 1.0;
};

inline double semivariogram(const VariogramSpec& v, double h) {
  return 0.5 * std::pow(h / v.scale, v.exponent);
}

// Storm-profile covariance of the Gaussian-density storm shape.
struct SmithParams {
  double s11 = 1.0, s12 = 0.0, s22 = 1.0;
};

// Truncated extremal Gaussian: disk radius r and underlying correlation.
struct TegParams {
  double r = 1.0;
  CorrelationSpec corr;
};

struct BrownResnickParams {
  VariogramSpec vario;
};

struct ExtremalTParams {
  double dof = 1.0;
  CorrelationSpec corr;
};

struct MaxStableSpec {
  std::variant<SmithParams, TegParams, BrownResnickParams, ExtremalTParams> family;
};

// Z(s) = max{ a X(s), (1-a) Y(s) } with X max-stable (spec x) and Y the
// inverted max-stable process built from spec y.
struct MaxMixtureSpec {
  double a = 0.5;
  MaxStableSpec x;
  MaxStableSpec y;
};

inline void validate(const CorrelationSpec& c) {
  if (!(c.range > 0.0)) throw invalid_input("correlation range must be positive");
}

inline void validate(const VariogramSpec& v) {
  if (!(v.scale > 0.0)) throw invalid_input("variogram scale must be positive");
  if (!(v.exponent > 0.0 && v.exponent <= 2.0))
    throw invalid_input("variogram exponent must be in (0,2]");
}

inline void validate(const MaxStableSpec& s) {
  if (const auto* p = std::get_if<SmithParams>(&s.family)) {
    const double det = p->s11 * p->s22 - p->s12 * p->s12;
    if (!(p->s11 > 0.0) || !(det > 0.0))
      throw invalid_input("smith covariance must be symmetric positive-definite");
  } else if (const auto* p = std::get_if<TegParams>(&s.family)) {
    if (!(p->r > 0.0)) throw invalid_input("teg disk radius must be positive");
    validate(p->corr);
  } else if (const auto* p = std::get_if<BrownResnickParams>(&s.family)) {
    validate(p->vario);
  } else if (const auto* p = std::get_if<ExtremalTParams>(&s.family)) {
    if (!(p->dof >= 1.0)) throw invalid_input("extremal-t dof must be >= 1");
    validate(p->corr);
  }
}

inline void validate(const MaxMixtureSpec& m) {
  if (!(m.a >= 0.0 && m.a <= 1.0)) throw invalid_input("mixing coefficient a must be in [0,1]");
  validate(m.x);
  validate(m.y);
}

inline std::string family_name(const MaxStableSpec& s) {
  if (std::holds_alternative<SmithParams>(s.family)) return "smith";
  if (std::holds_alternative<TegParams>(s.family)) return "teg";
  if (std::holds_alternative<BrownResnickParams>(s.family)) return "brown-resnick";
  return "extremal-t";
}

}  // namespace maxmix
