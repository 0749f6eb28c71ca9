#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "maxmix/errors.hpp"

namespace maxmix {

enum class Margins { unit_frechet, uniform, raw };

// n replicates by k sites, row-major. NaN marks a missing observation.
struct FieldSample {
  int n = 0;
  int k = 0;
  Margins margins = Margins::raw;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string seed_label;

  FieldSample() = default;
  FieldSample(int n_, int k_, Margins m)
      : n(n_), k(k_), margins(m), values(static_cast<size_t>(n_) * k_, 0.0) {}

  double& at(int i, int j) { return values[static_cast<size_t>(i) * k + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * k + j]; }

  int valid_count(int j) const {
    int c = 0;
    for (int i = 0; i < n; ++i)
      if (std::isfinite(at(i, j))) ++c;
    return c;
  }
};

// Per-site empirical CDF transform u = #{z' <= z}/(n_valid+1); ties share the
// upper count. Strictly-increasing per-site transforms leave the result
// unchanged, which is what makes downstream estimators scale-free.
inline FieldSample to_pseudo_uniform(const FieldSample& f) {
  FieldSample out(f.n, f.k, Margins::uniform);
  out.seed = f.seed;
  out.seed_label = f.seed_label;
  std::vector<double> col;
  for (int j = 0; j < f.k; ++j) {
    col.clear();
    for (int i = 0; i < f.n; ++i) {
      const double z = f.at(i, j);
      if (std::isfinite(z)) col.push_back(z);
    }
    if (col.size() < 2) throw invalid_input("to_pseudo_uniform: site with <2 observations");
    std::sort(col.begin(), col.end());
    const double denom = static_cast<double>(col.size()) + 1.0;
    for (int i = 0; i < f.n; ++i) {
      const double z = f.at(i, j);
      if (!std::isfinite(z)) {
        out.at(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto ub = std::upper_bound(col.begin(), col.end(), z);
      out.at(i, j) = static_cast<double>(ub - col.begin()) / denom;
    }
  }
  return out;
}

// Uniform-margins view used by the dependence estimators: exact probability
// transform when margins are known, otherwise per-site ranks.
inline FieldSample uniform_view(const FieldSample& f) {
  switch (f.margins) {
    case Margins::uniform:
      return f;
    case Margins::unit_frechet: {
      FieldSample out(f.n, f.k, Margins::uniform);
      out.seed = f.seed;
      out.seed_label = f.seed_label;
      for (size_t idx = 0; idx < f.values.size(); ++idx) {
        const double z = f.values[idx];
        out.values[idx] = std::isfinite(z) ? std::exp(-1.0 / z)
                                           : std::numeric_limits<double>::quiet_NaN();
      }
      return out;
    }
    case Margins::raw:
      return to_pseudo_uniform(f);
  }
  throw invalid_input("uniform_view: unknown margins tag");
}

}  // namespace maxmix
